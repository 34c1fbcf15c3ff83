#include "gpda/banded.hpp"

#include <cmath>

#include "gpda/rng.hpp"

namespace gpda {

SymTridiagonal::SymTridiagonal(Eigen::VectorXd d, Eigen::VectorXd o)
    : diag(std::move(d)), off(std::move(o)) {
  if (diag.size() < 1 || off.size() != diag.size() - 1) {
    throw std::invalid_argument("SymTridiagonal: off must have length T-1");
  }
}

Eigen::VectorXd SymTridiagonal::matvec(const Eigen::VectorXd& x) const {
  const Eigen::Index T = size();
  if (x.size() != T) {
    throw std::invalid_argument("SymTridiagonal::matvec: size mismatch");
  }
  Eigen::VectorXd y = diag.cwiseProduct(x);
  y.head(T - 1) += off.cwiseProduct(x.tail(T - 1));
  y.tail(T - 1) += off.cwiseProduct(x.head(T - 1));
  return y;
}

double SymTridiagonal::quadform(const Eigen::VectorXd& x) const {
  const Eigen::Index T = size();
  if (x.size() != T) {
    throw std::invalid_argument("SymTridiagonal::quadform: size mismatch");
  }
  double s = diag.dot(x.cwiseProduct(x));
  s += 2.0 * off.dot(x.head(T - 1).cwiseProduct(x.tail(T - 1)));
  return s;
}

SymTridiagonal& SymTridiagonal::operator+=(const SymTridiagonal& other) {
  if (other.size() != size()) {
    throw std::invalid_argument("SymTridiagonal::operator+=: size mismatch");
  }
  diag += other.diag;
  off += other.off;
  return *this;
}

SymTridiagonal& SymTridiagonal::add_diagonal(const Eigen::VectorXd& d) {
  if (d.size() != size()) {
    throw std::invalid_argument("SymTridiagonal::add_diagonal: size mismatch");
  }
  diag += d;
  return *this;
}

SymTridiagonal SymTridiagonal::scaled(double s) const {
  return SymTridiagonal(diag * s, off * s);
}

SymTridiagonal BandedCholeskyFactor::reconstruct() const {
  const Eigen::Index T = size();
  SymTridiagonal Q;
  Q.diag = ldiag.cwiseProduct(ldiag);
  Q.diag.tail(T - 1) += lsub.cwiseProduct(lsub);
  Q.off = ldiag.head(T - 1).cwiseProduct(lsub);
  return Q;
}

Eigen::VectorXd thomas_solve(const SymTridiagonal& Q,
                             const Eigen::VectorXd& b) {
  const Eigen::Index T = Q.size();
  if (b.size() != T) {
    throw std::invalid_argument("thomas_solve: rhs length mismatch");
  }
  const double pivot_floor = 1e-14 * Q.diag.cwiseAbs().maxCoeff();

  Eigen::VectorXd c_prime(T), d_prime(T);
  double denom = Q.diag[0];
  if (std::abs(denom) < pivot_floor) {
    throw singular_matrix_error("thomas_solve: zero pivot at row 0");
  }
  c_prime[0] = (T > 1) ? Q.off[0] / denom : 0.0;
  d_prime[0] = b[0] / denom;
  for (Eigen::Index j = 1; j < T; ++j) {
    denom = Q.diag[j] - Q.off[j - 1] * c_prime[j - 1];
    if (std::abs(denom) < pivot_floor) {
      throw singular_matrix_error("thomas_solve: zero pivot at row " +
                                  std::to_string(j));
    }
    c_prime[j] = (j < T - 1) ? Q.off[j] / denom : 0.0;
    d_prime[j] = (b[j] - Q.off[j - 1] * d_prime[j - 1]) / denom;
  }

  Eigen::VectorXd x(T);
  x[T - 1] = d_prime[T - 1];
  for (Eigen::Index j = T - 2; j >= 0; --j) {
    x[j] = d_prime[j] - c_prime[j] * x[j + 1];
  }
  return x;
}

BandedCholeskyFactor cholesky_banded(const SymTridiagonal& Q) {
  const Eigen::Index T = Q.size();
  BandedCholeskyFactor L;
  L.ldiag.resize(T);
  L.lsub.resize(T - 1);
  double pivot = Q.diag[0];
  for (Eigen::Index j = 0; j < T; ++j) {
    if (!(pivot > 0.0)) {
      throw not_positive_definite_error(
          "cholesky_banded: non-positive pivot at row " + std::to_string(j));
    }
    L.ldiag[j] = std::sqrt(pivot);
    if (j < T - 1) {
      L.lsub[j] = Q.off[j] / L.ldiag[j];
      pivot = Q.diag[j + 1] - L.lsub[j] * L.lsub[j];
    }
  }
  return L;
}

Eigen::VectorXd cholesky_solve(const BandedCholeskyFactor& L,
                               const Eigen::VectorXd& b) {
  const Eigen::Index T = L.size();
  if (b.size() != T) {
    throw std::invalid_argument("cholesky_solve: rhs length mismatch");
  }
  Eigen::VectorXd y(T);
  y[0] = b[0] / L.ldiag[0];
  for (Eigen::Index j = 1; j < T; ++j) {
    y[j] = (b[j] - L.lsub[j - 1] * y[j - 1]) / L.ldiag[j];
  }
  Eigen::VectorXd x(T);
  x[T - 1] = y[T - 1] / L.ldiag[T - 1];
  for (Eigen::Index j = T - 2; j >= 0; --j) {
    x[j] = (y[j] - L.lsub[j] * x[j + 1]) / L.ldiag[j];
  }
  return x;
}

InverseSubset sparse_inverse_subset(const BandedCholeskyFactor& L) {
  const Eigen::Index T = L.size();
  InverseSubset S;
  S.inv_diag.resize(T);
  S.inv_off.resize(T - 1);
  S.inv_diag[T - 1] = 1.0 / (L.ldiag[T - 1] * L.ldiag[T - 1]);
  for (Eigen::Index j = T - 2; j >= 0; --j) {
    const double v = L.lsub[j] / L.ldiag[j];
    S.inv_off[j] = -v * S.inv_diag[j + 1];
    S.inv_diag[j] = 1.0 / (L.ldiag[j] * L.ldiag[j]) - v * S.inv_off[j];
  }
  return S;
}

void sparse_inverse_subset_adjoint(const BandedCholeskyFactor& L,
                                   const InverseSubset& subset,
                                   const Eigen::VectorXd& bar_inv_diag,
                                   const Eigen::VectorXd& bar_inv_off,
                                   Eigen::VectorXd& bar_ldiag,
                                   Eigen::VectorXd& bar_lsub) {
  const Eigen::Index T = L.size();
  bar_ldiag.setZero(T);
  bar_lsub.setZero(T - 1);

  // Accumulators for the recursion outputs; consumed in the order opposite
  // to the forward pass (forward ran j = T-2 .. 0, so reverse runs 0 .. T-2).
  Eigen::VectorXd acc_diag = bar_inv_diag;
  Eigen::VectorXd acc_off = bar_inv_off;

  for (Eigen::Index j = 0; j <= T - 2; ++j) {
    const double v = L.lsub[j] / L.ldiag[j];
    // inv_diag[j] = 1/ldiag_j^2 - v * inv_off[j]
    const double gd = acc_diag[j];
    bar_ldiag[j] += gd * (-2.0 / (L.ldiag[j] * L.ldiag[j] * L.ldiag[j]));
    double bar_v = -gd * subset.inv_off[j];
    acc_off[j] += -gd * v;
    // inv_off[j] = -v * inv_diag[j+1]
    const double go = acc_off[j];
    bar_v += -go * subset.inv_diag[j + 1];
    acc_diag[j + 1] += -go * v;
    // v = lsub_j / ldiag_j
    bar_lsub[j] += bar_v / L.ldiag[j];
    bar_ldiag[j] += -bar_v * L.lsub[j] / (L.ldiag[j] * L.ldiag[j]);
  }
  // inv_diag[T-1] = 1/ldiag_{T-1}^2
  bar_ldiag[T - 1] +=
      acc_diag[T - 1] *
      (-2.0 / (L.ldiag[T - 1] * L.ldiag[T - 1] * L.ldiag[T - 1]));
}

double log_det(const BandedCholeskyFactor& L) {
  return 2.0 * L.ldiag.array().log().sum();
}

Eigen::VectorXd sample_gaussian_with(const BandedCholeskyFactor& L,
                                     const Eigen::VectorXd& mean,
                                     const Eigen::VectorXd& eps) {
  const Eigen::Index T = L.size();
  if (mean.size() != T || eps.size() != T) {
    throw std::invalid_argument("sample_gaussian: size mismatch");
  }
  // Solve L^T u = eps by back-substitution; u has covariance (L L^T)^{-1}.
  Eigen::VectorXd u(T);
  u[T - 1] = eps[T - 1] / L.ldiag[T - 1];
  for (Eigen::Index j = T - 2; j >= 0; --j) {
    u[j] = (eps[j] - L.lsub[j] * u[j + 1]) / L.ldiag[j];
  }
  return mean + u;
}

Eigen::VectorXd sample_gaussian(const BandedCholeskyFactor& L,
                                const Eigen::VectorXd& mean,
                                std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  Eigen::VectorXd eps(L.size());
  for (Eigen::Index j = 0; j < eps.size(); ++j) {
    eps[j] = rng.normal();
  }
  return sample_gaussian_with(L, mean, eps);
}

double tridiag_quadform(const SymTridiagonal& Q, const Eigen::VectorXd& v) {
  return Q.quadform(v);
}

double band_trace_product(const Eigen::VectorXd& m_diag,
                          const Eigen::VectorXd& m_off,
                          const SymTridiagonal& C) {
  if (m_diag.size() != C.size() || m_off.size() != C.size() - 1) {
    throw std::invalid_argument("band_trace_product: size mismatch");
  }
  return m_diag.dot(C.diag) + 2.0 * m_off.dot(C.off);
}

}  // namespace gpda
