#include "gpda/sde_gp.hpp"

#include <cmath>
#include <string>

namespace gpda {

namespace {

void check_field(const LogLengthScaleField& field, const GridSpec& grid) {
  if (field.nu.size() != grid.T) {
    throw std::invalid_argument("log length-scale field length mismatch");
  }
  // The AR coefficient 1 - delta exp(-nu_j) must stay positive; only the
  // first T-1 field values enter the construction.
  for (Eigen::Index j = 0; j < grid.T - 1; ++j) {
    const double nu = field.nu[j] + field.zeta;
    if (!(grid.delta * std::exp(-nu) < 1.0)) {
      throw discretization_error(
          "grid spacing " + std::to_string(grid.delta) +
          " is too coarse for length-scale exp(" + std::to_string(nu) +
          ") at location " + std::to_string(j) +
          "; refine the grid or raise the length-scale floor");
    }
  }
}

// Assembles C from the per-location values of e^{+nu_j} and e^{-nu_j}
// (j = 1..T-1; the last location never enters):
//   C_11  = e_1/(2d) + (d/2) f_1
//   C_jj  = e_{j-1}/(2d) + e_j/(2d) - 1 + (d/2) f_j   (interior)
//   C_TT  = e_{T-1}/(2d)
//   C_{j,j+1} = -e_j/(2d) + 1/2
SymTridiagonal assemble_unit_scale(const Eigen::VectorXd& e,
                                   const Eigen::VectorXd& f,
                                   const GridSpec& grid) {
  const Eigen::Index T = grid.T;
  const double d = grid.delta;
  SymTridiagonal C;
  C.diag.resize(T);
  C.off.resize(T - 1);
  C.diag[0] = e[0] / (2.0 * d) + 0.5 * d * f[0];
  for (Eigen::Index j = 1; j < T - 1; ++j) {
    C.diag[j] = e[j - 1] / (2.0 * d) + e[j] / (2.0 * d) - 1.0 + 0.5 * d * f[j];
  }
  C.diag[T - 1] = e[T - 2] / (2.0 * d);
  for (Eigen::Index j = 0; j < T - 1; ++j) {
    C.off[j] = -e[j] / (2.0 * d) + 0.5;
  }
  return C;
}

}  // namespace

SymTridiagonal unit_scale_precision(const LogLengthScaleField& field,
                                    const GridSpec& grid) {
  check_field(field, grid);
  const Eigen::VectorXd shifted =
      (field.nu.array() + field.zeta).head(grid.T - 1);
  const Eigen::VectorXd e = shifted.array().exp();
  const Eigen::VectorXd f = (-shifted.array()).exp();
  return assemble_unit_scale(e, f, grid);
}

SymTridiagonal nonstationary_precision(double tau,
                                       const LogLengthScaleField& field,
                                       const GridSpec& grid) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument("nonstationary_precision: tau must be > 0");
  }
  return unit_scale_precision(field, grid).scaled(1.0 / tau);
}

SymTridiagonal stationary_precision(double tau2, double lambda,
                                    const GridSpec& grid) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("stationary_precision: lambda must be > 0");
  }
  LogLengthScaleField field;
  field.nu = Eigen::VectorXd::Constant(grid.T, std::log(lambda));
  return nonstationary_precision(tau2, field, grid);
}

SymTridiagonal expected_unit_precision(const MomentField& moments, double zeta,
                                       const GridSpec& grid) {
  if (moments.mean.size() != grid.T || moments.var.size() != grid.T) {
    throw std::invalid_argument("expected_unit_precision: moment length mismatch");
  }
  const Eigen::Index T = grid.T;
  Eigen::VectorXd e(T - 1), f(T - 1);
  for (Eigen::Index j = 0; j < T - 1; ++j) {
    const double half_var = 0.5 * moments.var[j];
    e[j] = std::exp(zeta + moments.mean[j] + half_var);
    f[j] = std::exp(-zeta - moments.mean[j] + half_var);
  }
  return assemble_unit_scale(e, f, grid);
}

double log_det_nu_linear_part(const Eigen::VectorXd& nu_expectation,
                              const GridSpec& grid) {
  if (nu_expectation.size() != grid.T) {
    throw std::invalid_argument("log_det_nu_linear_part: length mismatch");
  }
  return nu_expectation.head(grid.T - 1).sum();
}

double log_det_scale_part(double tau, const GridSpec& grid) {
  return -static_cast<double>(grid.T) * std::log(tau) -
         static_cast<double>(grid.T - 1) * std::log(2.0 * grid.delta);
}

double log_det_stationary(double tau2, double lambda, const GridSpec& grid) {
  return log_det_scale_part(tau2, grid) +
         static_cast<double>(grid.T - 1) * std::log(lambda);
}

TraceCoefficients trace_coefficients(const Eigen::VectorXd& m_diag,
                                     const Eigen::VectorXd& m_off,
                                     const GridSpec& grid) {
  const Eigen::Index T = grid.T;
  if (m_diag.size() != T || m_off.size() != T - 1) {
    throw std::invalid_argument("trace_coefficients: band size mismatch");
  }
  TraceCoefficients tc;
  tc.pos.resize(T - 1);
  tc.neg.resize(T - 1);
  const double inv2d = 1.0 / (2.0 * grid.delta);
  for (Eigen::Index j = 0; j < T - 1; ++j) {
    // e^{nu_j} appears in C_jj, C_{j+1,j+1} (coefficient 1/(2d) each) and in
    // C_{j,j+1} (coefficient -1/(2d), counted twice by symmetry).
    tc.pos[j] = inv2d * (m_diag[j] + m_diag[j + 1] - 2.0 * m_off[j]);
    tc.neg[j] = 0.5 * grid.delta * m_diag[j];
  }
  // Constants: -1 on interior diagonal entries, +1/2 on each off-diagonal
  // pair.
  tc.cnst = m_off.sum();
  for (Eigen::Index j = 1; j < T - 1; ++j) {
    tc.cnst -= m_diag[j];
  }
  return tc;
}

}  // namespace gpda
