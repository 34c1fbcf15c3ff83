#pragma once

#include <Eigen/Core>

namespace gpda {

/// Linear-chain Ising parameters: alpha drives sparsity (larger alpha,
/// fewer active sites), beta >= 0 couples neighbors.
struct IsingParams {
  double alpha = 0.0;
  double beta = 0.0;
};

/// Hyperprior for the MAP step on (alpha, beta). The flat variant drops the
/// prior terms entirely (test hook and sensitivity runs).
struct IsingHyper {
  bool flat = false;
  double alpha_mean = 0.0;
  double alpha_sd = 10.0;
  double log_beta_mean = 0.0;
  double log_beta_sd = 1.5;
  double alpha_min = -10.0;
  double alpha_max = 10.0;
  double beta_max = 10.0;
};

/// log Z(alpha, beta, T) with Z = sum over {0,1}^T of
/// exp(-alpha sum_j g_j + beta sum_j g_j g_{j+1}).
/// Transfer-matrix product with per-step rescaling; O(T).
double log_partition(const IsingParams& params, Eigen::Index T);

/// E[log p(gamma | alpha, beta)] under a fully factorized Bernoulli(w_j)
/// field, using E[g_j g_{j+1}] = w_j w_{j+1}.
double expected_log_prior(const Eigen::VectorXd& w, const IsingParams& params);

/// Exact chain moments under p(gamma | alpha, beta):
/// sum_j E[g_j] and sum_j E[g_j g_{j+1}], by forward-backward in O(T).
struct IsingChainMoments {
  double sum_mean = 0.0;
  double sum_pair = 0.0;
};
IsingChainMoments chain_moments(const IsingParams& params, Eigen::Index T);

struct IsingMapResult {
  IsingParams params;
  bool converged = true;
  bool hit_box = false;
};

/// MAP step for (alpha, beta): maximizes expected_log_prior(w) plus the
/// hyperprior terms, beta constrained >= 0, by coordinate ascent with
/// safeguarded 1-D Newton steps (alpha, then log beta; beta may rest at the
/// boundary). Converged when the parameter change drops below 1e-6.
IsingMapResult map_update_ising(const Eigen::VectorXd& w, const IsingHyper& hyper,
                                IsingParams init = {});

}  // namespace gpda
