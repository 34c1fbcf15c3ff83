#pragma once

#include "gpda/model.hpp"
#include "gpda/svb.hpp"

namespace gpda {

/// State construction: class means from the data, everything else at its
/// prior; see fit() for the sweep schedule.
ModelState initialize_state(const FunctionalDataset& data,
                            const Hyperparams& hyper, const FitOptions& opts);

// --- closed-form coordinate updates -----------------------------------------

/// Gaussian update of one latent observation process.
void update_latent(ModelState& state, const FunctionalDataset& data,
                   const Hyperparams& hyper, Eigen::Index i);

/// All latent processes; embarrassingly parallel over observations.
void update_latent_fields(ModelState& state, const FunctionalDataset& data,
                          const Hyperparams& hyper, int threads);

/// Gaussian updates of the class-specific and shared mean fields.
void update_mean_functions(ModelState& state, const FunctionalDataset& data,
                           const Hyperparams& hyper);

/// Inverse-gamma updates of the mean-field scales.
void update_mean_scales(ModelState& state, const Hyperparams& hyper);

/// Inverse-gamma updates of the per-location noise variances.
void update_noise_variances(ModelState& state, const FunctionalDataset& data,
                            const Hyperparams& hyper);

/// Sequential sweep over the selection probabilities w_j, newest neighbor
/// values first.
void update_selection(ModelState& state, const FunctionalDataset& data,
                      const Hyperparams& hyper);

/// Inverse-gamma update of the latent-process scale.
void update_latent_scale(ModelState& state, const Hyperparams& hyper);

// --- deterministic-gradient variational updates -----------------------------

/// Objective assembly for the log length-scale field of mean component k.
SvbProblem mean_ls_problem(const ModelState& state, const Hyperparams& hyper,
                           int k);

/// Objective assembly for the common log length-scale field.
SvbProblem common_ls_problem(const ModelState& state, const Hyperparams& hyper);

SvbReport svb_update_mean_lengthscale(ModelState& state,
                                      const Hyperparams& hyper, int k,
                                      const SvbOptions& opts);

SvbReport svb_update_common_lengthscale(ModelState& state,
                                        const Hyperparams& hyper,
                                        const SvbOptions& opts);

// --- MAP hyperparameter steps ------------------------------------------------

/// Per-observation perturbation of the log length-scale field; safeguarded
/// 1-D Newton on a strictly concave objective.
void map_update_perturbation(ModelState& state, const Hyperparams& hyper,
                             Eigen::Index i);
void map_update_perturbations(ModelState& state, const Hyperparams& hyper,
                              int threads);

/// Closed-form rebalancing of the constant shift between the common field
/// and the perturbations (the likelihood is invariant along it).
void rebalance_perturbation_shift(ModelState& state, const Hyperparams& hyper);

/// Scale and length-scale of the common field prior.
void map_update_common_hyper(ModelState& state, const Hyperparams& hyper);

/// Scale and length-scale of the mean-function log length-scale prior.
void map_update_mean_ls_hyper(ModelState& state, const Hyperparams& hyper);

/// Sparsity/coupling parameters of the selection prior.
void map_update_ising_step(ModelState& state, const Hyperparams& hyper);

// --- objective ----------------------------------------------------------------

/// Per-group decomposition of the evidence lower bound. MAP hyperparameters
/// enter as fixed constants of the model; their own hyperprior densities are
/// part of the MAP objectives, not of this value.
struct ElboTerms {
  double likelihood = 0.0;
  double mean_fields = 0.0;
  double mean_ls_fields = 0.0;
  double mean_scales = 0.0;
  double noise = 0.0;
  double latents = 0.0;
  double latent_scale = 0.0;
  double common_ls = 0.0;
  double selection = 0.0;

  double total() const {
    return likelihood + mean_fields + mean_ls_fields + mean_scales + noise +
           latents + latent_scale + common_ls + selection;
  }
};

ElboTerms compute_elbo_terms(const ModelState& state,
                             const FunctionalDataset& data,
                             const Hyperparams& hyper);

double compute_elbo(const ModelState& state, const FunctionalDataset& data,
                    const Hyperparams& hyper);

/// Full mean-field loop: latent processes, mean functions, scales,
/// length-scale fields, noise, selection, perturbations, and the MAP
/// hyperparameter steps, in a fixed order; stops when the largest relative
/// parameter change drops below opts.tol.
ModelState fit(const FunctionalDataset& data, const Hyperparams& hyper,
               const FitOptions& opts, FitReport* report = nullptr);

// exposed for tests: KL between inverse-gamma densities
double invgamma_kl(double a, double b, double A, double B);

namespace detail {

/// Maximizer of g(z) = lin_coef z - scale/2 (e^z P + e^-z N) - z^2/(2 var):
/// strictly concave and coercive; safeguarded Newton to |dz| < 1e-8.
double maximize_perturbation_objective(double lin_coef, double scale, double P,
                                       double N, double var, double init);

/// Objective of the shared scale/length MAP step for c fields with pooled
/// trace coefficients (SA, SB, SC): see map_update_common_hyper.
double scale_length_objective(double c_fields, double SA, double SB, double SC,
                              const GridSpec& grid, const InvGammaPrior& ig,
                              const LogNormalPrior& ln, double scale,
                              double length);

struct ScaleLengthResult {
  double scale = 1.0;
  double length = 1.0;
  bool clamped = false;
};

ScaleLengthResult maximize_scale_length(double c_fields, double SA, double SB,
                                        double SC, const GridSpec& grid,
                                        const InvGammaPrior& ig,
                                        const LogNormalPrior& ln,
                                        double init_scale, double init_length);

}  // namespace detail

}  // namespace gpda
