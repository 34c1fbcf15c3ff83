#pragma once

#include <stdexcept>

#include "gpda/banded.hpp"

namespace gpda {

class discretization_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Equally spaced observation grid: T locations, spacing delta > 0.
struct GridSpec {
  Eigen::Index T = 0;
  double delta = 1.0;

  GridSpec() = default;
  GridSpec(Eigen::Index t, double d) : T(t), delta(d) {
    if (T < 2) throw std::invalid_argument("GridSpec: T must be >= 2");
    if (!(delta > 0.0)) throw std::invalid_argument("GridSpec: delta must be > 0");
  }
};

/// Log length-scale field nu(t_1..t_T) with an optional uniform perturbation.
struct LogLengthScaleField {
  Eigen::VectorXd nu;
  double zeta = 0.0;
};

/// Gaussian posterior marginals of a log length-scale field: means and
/// per-location variances.
struct MomentField {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

/// Precision matrix of the discretized zero-mean process with marginal scale
/// tau and log length-scale field nu: first-order autoregression
/// z_j = a_{j-1} z_{j-1} + w_j with a_j = 1 - delta exp(-nu_j),
/// Var(w_j) = 2 tau delta exp(-nu_{j-1}), and stationary start z_1 ~ N(0, tau).
/// Throws discretization_error when any a_j <= 0 (grid too coarse for the
/// length-scale floor).
SymTridiagonal nonstationary_precision(double tau,
                                       const LogLengthScaleField& field,
                                       const GridSpec& grid);

/// Stationary special case: constant log length-scale log(lambda) with
/// marginal scale tau2.
SymTridiagonal stationary_precision(double tau2, double lambda,
                                    const GridSpec& grid);

/// The unit-marginal-scale matrix C with nonstationary_precision(tau, nu)
/// = (1/tau) C. Every entry of C is affine in exp(+nu_j) and exp(-nu_j).
SymTridiagonal unit_scale_precision(const LogLengthScaleField& field,
                                    const GridSpec& grid);

/// E[C(nu + zeta)] for nu_j ~ N(mean_j, var_j) independent across the affine
/// entry structure, via log-normal moments E exp(+-nu_j)
/// = exp(+-zeta) exp(+-mean_j + var_j / 2).
SymTridiagonal expected_unit_precision(const MomentField& moments, double zeta,
                                       const GridSpec& grid);

/// Field-dependent part of log det of the nonstationary precision:
/// sum_{j<T} nu_j (expectations pass through linearly).
double log_det_nu_linear_part(const Eigen::VectorXd& nu_expectation,
                              const GridSpec& grid);

/// The remaining constant: -T log tau - (T-1) log(2 delta).
double log_det_scale_part(double tau, const GridSpec& grid);

/// log det of stationary_precision(tau2, lambda).
double log_det_stationary(double tau2, double lambda, const GridSpec& grid);

/// Coefficients of the affine expansion tr(M C(nu)) =
/// sum_{j<T} [pos_j e^{nu_j} + neg_j e^{-nu_j}] + cnst, for a symmetric M
/// given by its band (diag, off). Used by every expected-trace computation.
struct TraceCoefficients {
  Eigen::VectorXd pos;  ///< length T-1, all >= 0 for PSD M
  Eigen::VectorXd neg;  ///< length T-1, all >= 0 for PSD M
  double cnst = 0.0;
};

TraceCoefficients trace_coefficients(const Eigen::VectorXd& m_diag,
                                     const Eigen::VectorXd& m_off,
                                     const GridSpec& grid);

}  // namespace gpda
