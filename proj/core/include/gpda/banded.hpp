#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>

namespace gpda {

class singular_matrix_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class not_positive_definite_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Symmetric tridiagonal matrix of order T: main diagonal plus the first
/// super/sub-diagonal (stored once, symmetry implicit).
struct SymTridiagonal {
  Eigen::VectorXd diag;  ///< length T
  Eigen::VectorXd off;   ///< length T-1

  SymTridiagonal() = default;
  SymTridiagonal(Eigen::VectorXd d, Eigen::VectorXd o);

  Eigen::Index size() const { return diag.size(); }

  /// y = Q x in O(T).
  Eigen::VectorXd matvec(const Eigen::VectorXd& x) const;

  /// x^T Q x in O(T).
  double quadform(const Eigen::VectorXd& x) const;

  /// Entrywise sum with another matrix of the same order.
  SymTridiagonal& operator+=(const SymTridiagonal& other);

  /// Adds a diagonal matrix.
  SymTridiagonal& add_diagonal(const Eigen::VectorXd& d);

  SymTridiagonal scaled(double s) const;
};

/// Lower-triangular 1-banded Cholesky factor L with Q = L L^T.
struct BandedCholeskyFactor {
  Eigen::VectorXd ldiag;  ///< length T, strictly positive
  Eigen::VectorXd lsub;   ///< length T-1

  Eigen::Index size() const { return ldiag.size(); }

  /// Reconstructs Q = L L^T.
  SymTridiagonal reconstruct() const;
};

/// Main diagonal and first off-diagonal of Q^{-1} for tridiagonal Q.
struct InverseSubset {
  Eigen::VectorXd inv_diag;  ///< (Q^{-1})_{jj}, length T
  Eigen::VectorXd inv_off;   ///< (Q^{-1})_{j,j+1}, length T-1
};

/// Solves Q x = b for tridiagonal Q by the Thomas algorithm in O(T).
/// Throws singular_matrix_error when a pivot falls below
/// 1e-14 * max |diag| in magnitude.
Eigen::VectorXd thomas_solve(const SymTridiagonal& Q, const Eigen::VectorXd& b);

/// Cholesky factorization Q = L L^T of an SPD tridiagonal matrix in O(T).
/// Throws not_positive_definite_error on a non-positive pivot.
BandedCholeskyFactor cholesky_banded(const SymTridiagonal& Q);

/// Solves (L L^T) x = b given the factor, via forward and back substitution.
Eigen::VectorXd cholesky_solve(const BandedCholeskyFactor& L,
                               const Eigen::VectorXd& b);

/// Takahashi recursion: the diagonal and first off-diagonal of (L L^T)^{-1},
/// running from index T down to 1 in O(T). Never forms the dense inverse.
InverseSubset sparse_inverse_subset(const BandedCholeskyFactor& L);

/// Reverse-mode companion to sparse_inverse_subset: given sensitivities of a
/// scalar function with respect to the inverse-subset entries, accumulates the
/// sensitivities with respect to the factor entries (ldiag, lsub) in O(T).
void sparse_inverse_subset_adjoint(const BandedCholeskyFactor& L,
                                   const InverseSubset& subset,
                                   const Eigen::VectorXd& bar_inv_diag,
                                   const Eigen::VectorXd& bar_inv_off,
                                   Eigen::VectorXd& bar_ldiag,
                                   Eigen::VectorXd& bar_lsub);

/// log det(L L^T) = 2 sum_j log ldiag_j.
double log_det(const BandedCholeskyFactor& L);

/// Draws mean + L^{-T} eps for a supplied standard-normal vector eps, so that
/// the result has precision L L^T around mean. Back-substitution only.
Eigen::VectorXd sample_gaussian_with(const BandedCholeskyFactor& L,
                                     const Eigen::VectorXd& mean,
                                     const Eigen::VectorXd& eps);

/// Seeded draw with covariance (L L^T)^{-1} around mean.
Eigen::VectorXd sample_gaussian(const BandedCholeskyFactor& L,
                                const Eigen::VectorXd& mean,
                                std::uint64_t rng_seed);

/// v^T Q v for tridiagonal Q in O(T).
double tridiag_quadform(const SymTridiagonal& Q, const Eigen::VectorXd& v);

/// tr(M C) where both band subsets are given: the diag/off-diag of M (for a
/// symmetric M this is all C touches, C tridiagonal).
double band_trace_product(const Eigen::VectorXd& m_diag,
                          const Eigen::VectorXd& m_off,
                          const SymTridiagonal& C);

}  // namespace gpda
