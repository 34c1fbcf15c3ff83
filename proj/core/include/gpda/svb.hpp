#pragma once

#include "gpda/model.hpp"

namespace gpda {

/// Closed-form objective for a Gaussian variational field q = N(m, (WW^T)^-1)
/// with 1-banded factor W:
///
///   F(m, W) = lin . m
///           - 1/2 sum_{j<T} [ pos_j e^{m_j + s_j/2} + neg_j e^{-m_j + s_j/2} ]
///           - 1/2 (m - prior_mean)^T Q0 (m - prior_mean)
///           - 1/2 tr(Q0 Cov)  - sum_j log ldiag_j  + cnst,
///
/// where s_j and the band of Cov come from the sparse inverse subset of W.
/// Both log length-scale updates (the mean-function fields and the common
/// field) reduce to this form; all expectations are analytic.
struct SvbProblem {
  Eigen::VectorXd lin;         ///< length T
  Eigen::VectorXd pos;         ///< length T-1
  Eigen::VectorXd neg;         ///< length T-1
  Eigen::VectorXd prior_mean;  ///< length T
  SymTridiagonal prior_prec;   ///< Q0
  double cnst = 0.0;

  Eigen::Index size() const { return lin.size(); }
};

struct SvbGradient {
  Eigen::VectorXd mean;
  Eigen::VectorXd ldiag;
  Eigen::VectorXd lsub;

  double inf_norm() const {
    return std::max({mean.cwiseAbs().maxCoeff(), ldiag.cwiseAbs().maxCoeff(),
                     lsub.cwiseAbs().maxCoeff()});
  }
};

double svb_objective(const SvbProblem& p, const Eigen::VectorXd& mean,
                     const BandedCholeskyFactor& omega,
                     const InverseSubset& cov);

/// Analytic gradient with respect to (mean, ldiag, lsub); the covariance-band
/// dependence is differentiated by reversing the Takahashi recursion.
SvbGradient svb_gradient(const SvbProblem& p, const Eigen::VectorXd& mean,
                         const BandedCholeskyFactor& omega,
                         const InverseSubset& cov);

struct SvbOptions {
  int max_steps = 25;
  double grad_tol = 1e-6;
  double step0 = 1.0;  ///< initial line-search fraction toward the block target
  int max_backtracks = 30;
};

struct SvbReport {
  int steps = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
};

/// Deterministic ascent on F: exact Newton direction for the mean, damped
/// fixed-point move for the precision, one shared backtracking line search.
/// Every accepted step increases the objective; the analytic gradient norm is
/// the convergence certificate. Updates q in place (mean, omega, cov).
SvbReport svb_maximize(const SvbProblem& p, GaussianFieldPosterior& q,
                       const SvbOptions& opts);

}  // namespace gpda
