#pragma once

#include "gpda/model.hpp"

namespace gpda {

/// Outcome of classifying one new observation.
struct Prediction {
  double xi1 = 0.5;        ///< q(y = 1)
  int predicted_label = 1; ///< 1 iff xi1 >= 0.5 (ties to 1)
  double qda_score = 0.0;
  Eigen::VectorXd z_mean;
  double zeta_new = 0.0;
  int rounds = 0;
};

struct PredictOptions {
  double tol = 1e-6;
  int max_rounds = 50;
  double threshold = 0.5;
};

/// Weighted quadratic discriminant contrast at the selected locations, given
/// the posterior latent mean for the new observation. O(T).
double qda_score(const Eigen::VectorXd& x_new, const ModelState& model,
                 const Eigen::VectorXd& z_mean);

/// MAP perturbation for the new observation's log length-scale shift; same
/// objective as the training-time update.
double map_update_zeta_new(const ModelState& model, const Hyperparams& hyper,
                           const GaussianFieldPosterior& q_z_new, double init);

/// Fixed-point alternation of (latent process, perturbation, class
/// probability) for one new observation against a fitted model.
Prediction predict(const Eigen::VectorXd& x_new, const ModelState& model,
                   const Hyperparams& hyper, const PredictOptions& opts = {});

}  // namespace gpda
