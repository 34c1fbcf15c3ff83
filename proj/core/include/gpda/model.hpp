#pragma once

#include <array>
#include <vector>

#include "gpda/banded.hpp"
#include "gpda/ising.hpp"
#include "gpda/sde_gp.hpp"
#include "gpda/special.hpp"

namespace gpda {

/// Shape/rate pair of an inverse-gamma prior.
struct InvGammaPrior {
  double shape = 2.0;
  double rate = 1.0;
};

struct LogNormalPrior {
  double mu = 0.0;
  double sigma = 1.0;
};

/// Fixed model hyperparameters. Length-scale prior locations default to a
/// tenth of the domain span; call resolved_for(grid) before fitting.
struct Hyperparams {
  InvGammaPrior mean_scale;       // scale of the class/shared mean fields
  InvGammaPrior noise;            // per-location noise variances
  InvGammaPrior latent_scale;     // scale of the observation-level process
  InvGammaPrior common_scale;     // scale of the common log length-scale field
  InvGammaPrior mean_ls_scale;    // scale of the mean-function length-scale fields
  LogNormalPrior mean_ls_length;  // length-scale of those fields
  LogNormalPrior common_ls_length;
  double mean_ls_prior_mean = 0.0;    // prior mean of the mean-function log length-scales
  double common_ls_prior_mean = 0.0;  // prior mean of the common field
  double zeta_variance = 1.0;         // variance of per-observation perturbations
  IsingHyper ising;
  bool auto_length_priors = true;  ///< derive length/level defaults from the grid

  /// Fills the grid-dependent defaults: length-scale priors centered at a
  /// tenth of the domain, matching prior means for the log length-scale
  /// fields themselves. Floored at twice the grid spacing so the stability
  /// requirement (length-scale above the spacing) holds on coarse grids.
  Hyperparams resolved_for(const GridSpec& grid) const {
    Hyperparams h = *this;
    if (h.auto_length_priors) {
      const double span =
          std::max(0.1 * static_cast<double>(grid.T) * grid.delta,
                   2.0 * grid.delta);
      h.mean_ls_length.mu = std::log(span);
      h.common_ls_length.mu = std::log(span);
      h.mean_ls_prior_mean = std::log(span);
      h.auto_length_priors = false;
    }
    return h;
  }
};

/// Inverse-gamma variational factor.
struct InvGammaVariational {
  double shape = 2.0;
  double rate = 1.0;

  double mean_inverse() const { return shape / rate; }
  double mean_log() const { return std::log(rate) - digamma(shape); }
};

/// Gaussian variational factor over a length-T field with tridiagonal
/// precision Omega Omega^T; the band of the covariance is cached alongside.
struct GaussianFieldPosterior {
  Eigen::VectorXd mean;
  BandedCholeskyFactor omega;
  InverseSubset cov;  ///< band of (Omega Omega^T)^{-1}

  Eigen::Index size() const { return mean.size(); }

  void set_precision(const SymTridiagonal& Q) {
    omega = cholesky_banded(Q);
    cov = sparse_inverse_subset(omega);
  }
  void refresh_cov() { cov = sparse_inverse_subset(omega); }

  /// Band of the second-moment matrix mean mean^T + Cov.
  Eigen::VectorXd second_moment_diag() const {
    return mean.cwiseProduct(mean) + cov.inv_diag;
  }
  Eigen::VectorXd second_moment_off() const {
    const Eigen::Index T = size();
    return mean.head(T - 1).cwiseProduct(mean.tail(T - 1)) + cov.inv_off;
  }
  MomentField moments() const { return MomentField{mean, cov.inv_diag}; }
};

/// Per-location inverse-gamma posteriors for one noise-variance field.
struct NoisePosterior {
  Eigen::VectorXd shape;
  Eigen::VectorXd rate;

  Eigen::VectorXd mean_inverse() const { return shape.cwiseQuotient(rate); }
  Eigen::VectorXd mean_log() const {
    Eigen::VectorXd out(shape.size());
    for (Eigen::Index j = 0; j < shape.size(); ++j) {
      out[j] = std::log(rate[j]) - digamma(shape[j]);
    }
    return out;
  }
};

/// n x T observations with binary labels on an equally spaced grid.
struct FunctionalDataset {
  Eigen::MatrixXd X;            ///< rows are observations
  Eigen::VectorXi y;            ///< entries in {0, 1}
  GridSpec grid;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index T() const { return X.cols(); }
  Eigen::Index count(int label) const {
    return (y.array() == label).count();
  }
  void validate(bool require_both_classes = true) const;
};

/// Class slots: 0, 1, and the shared (non-discriminative) component.
enum ClassSlot : int { kClass0 = 0, kClass1 = 1, kShared = 2 };
inline constexpr std::array<int, 3> kAllSlots{kClass0, kClass1, kShared};

/// MAP-estimated hyperparameters.
struct MapEstimates {
  double common_length = 1.0;   // length-scale of the common field
  double common_scale = 1.0;    // its marginal scale
  double mean_ls_scale = 1.0;   // marginal scale of mean-function LS fields
  double mean_ls_length = 1.0;  // their length-scale
};

/// Complete variational state of a fitted model.
struct ModelState {
  GridSpec grid;
  Eigen::Index n0 = 0, n1 = 0;

  std::array<GaussianFieldPosterior, 3> mean_fields;     // class/shared means
  std::array<GaussianFieldPosterior, 3> mean_ls_fields;  // their log length-scales
  std::array<InvGammaVariational, 3> mean_scales;
  std::array<NoisePosterior, 3> noise;

  std::vector<GaussianFieldPosterior> latents;  // one per training observation
  InvGammaVariational latent_scale;
  GaussianFieldPosterior common_ls;  // common log length-scale field
  Eigen::VectorXd selection;         // q(gamma_j = 1)
  Eigen::VectorXd perturbations;     // per-observation MAP shifts

  MapEstimates map;
  IsingParams ising;

  bool converged = false;
  bool warning = false;
  std::vector<double> elbo_trace;

  Eigen::Index T() const { return grid.T; }
  Eigen::Index n() const { return static_cast<Eigen::Index>(latents.size()); }
};

/// Options controlling fit(); freezes are test hooks and ablation switches.
struct FitOptions {
  double tol = 1e-4;
  int max_sweeps = 100;
  int threads = 1;
  bool pure_cavi = false;    ///< freeze all SVB and MAP updates
  bool freeze_svb = false;
  bool freeze_map = false;
  bool allow_empty = false;  ///< accept n = 0 or single-class data (tests)
  int svb_steps = 25;
  double svb_grad_tol = 1e-6;
  bool record_elbo = true;

  bool svb_frozen() const { return pure_cavi || freeze_svb; }
  bool map_frozen() const { return pure_cavi || freeze_map; }
};

struct FitReport {
  bool converged = false;
  int sweeps = 0;
  double final_change = 0.0;
};

}  // namespace gpda
