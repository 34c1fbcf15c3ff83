#pragma once

#include <cstdint>

#include "gpda/model.hpp"

namespace gpda {

/// Synthetic-data generator settings. Settings 1 and 2 draw from the
/// two-level model itself (weak wide signal / strong narrow signal), setting
/// 3 uses independent locations with equal class variances, setting 4 an
/// exchangeable covariance with constant correlation.
struct SimConfig {
  int setting = 2;
  Eigen::Index T = 5000;
  Eigen::Index n = 100;
  double delta = 0.0;  ///< grid spacing; 0 means 1/T (unit domain)
  double signal_fraction = 0.05;
  double signal_strength = 1.0;  ///< amplitude of the class-1 mean bump
  double signal_var_ratio = 1.0; ///< class-1 noise variance multiplier on the block
  double block_position = 0.45;  ///< block start as a fraction of the free range
  double noise_sd = 0.5;
  double tau_star = 1.5;
  double tau2_star = 2.0;
  double lambda_star = 500.0;
  bool index_perturbations = true;  ///< zeta_i = 0.5 exp(i^0.05) - 1.5, else 0
  double uniform_rho = 0.95;
  double class_balance = 0.5;
  std::uint64_t seed = 1;

  double resolved_delta() const {
    return (delta > 0.0) ? delta : 1.0 / static_cast<double>(T);
  }
};

/// The generating parameters behind a simulated dataset.
struct GroundTruth {
  Eigen::VectorXi gamma_star;              ///< 1 on the signal block
  std::array<Eigen::VectorXd, 2> mu_star;  ///< class means
  std::array<Eigen::VectorXd, 2> sigma_star;  ///< class noise std deviations
  Eigen::VectorXd R_star;  ///< common log length-scale field (settings 1-2)
};

/// Draws a labeled dataset; bit-identical for identical configs.
std::pair<FunctionalDataset, GroundTruth> generate_dataset(const SimConfig& cfg);

/// Monte Carlo estimate of the error of the known-parameter likelihood-ratio
/// classifier under the generating model; the anchor for achievable accuracy.
double ground_truth_bayes_error(const SimConfig& cfg, const GroundTruth& truth,
                                Eigen::Index n_mc);

}  // namespace gpda
