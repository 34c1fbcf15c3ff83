#include "gpda/simulate.hpp"

#include <cmath>

#include "gpda/rng.hpp"

namespace gpda {

namespace {

double zeta_rule(const SimConfig& cfg, Eigen::Index i) {
  if (!cfg.index_perturbations || cfg.setting > 2) return 0.0;
  // 1-based observation index.
  return 0.5 * std::exp(std::pow(static_cast<double>(i + 1), 0.05)) - 1.5;
}

struct TruthLayout {
  Eigen::Index block_start = 0;
  Eigen::Index block_len = 0;
};

TruthLayout make_layout(const SimConfig& cfg) {
  TruthLayout layout;
  layout.block_len = static_cast<Eigen::Index>(
      std::ceil(cfg.signal_fraction * static_cast<double>(cfg.T)));
  layout.block_len = std::min(layout.block_len, cfg.T);
  const Eigen::Index free_range = cfg.T - layout.block_len;
  layout.block_start = static_cast<Eigen::Index>(
      std::floor(cfg.block_position * static_cast<double>(free_range)));
  return layout;
}

GroundTruth make_truth(const SimConfig& cfg, Rng& rng) {
  const Eigen::Index T = cfg.T;
  const TruthLayout layout = make_layout(cfg);

  GroundTruth truth;
  truth.gamma_star = Eigen::VectorXi::Zero(T);
  truth.mu_star[0] = Eigen::VectorXd::Zero(T);
  truth.mu_star[1] = Eigen::VectorXd::Zero(T);
  const double base_sd = (cfg.setting == 4) ? 0.0 : cfg.noise_sd;
  truth.sigma_star[0] = Eigen::VectorXd::Constant(T, base_sd);
  truth.sigma_star[1] = Eigen::VectorXd::Constant(T, base_sd);

  for (Eigen::Index j = 0; j < layout.block_len; ++j) {
    const Eigen::Index loc = layout.block_start + j;
    truth.gamma_star[loc] = 1;
    // Raised-cosine bump on the class-1 mean.
    const double phase =
        (layout.block_len > 1)
            ? static_cast<double>(j) / static_cast<double>(layout.block_len - 1)
            : 0.5;
    truth.mu_star[1][loc] = cfg.signal_strength *
                            0.5 * (1.0 - std::cos(2.0 * M_PI * phase));
    truth.sigma_star[1][loc] *= std::sqrt(cfg.signal_var_ratio);
  }
  // Setting 3 keeps class variances equal by definition.
  if (cfg.setting == 3) truth.sigma_star[1] = truth.sigma_star[0];

  if (cfg.setting <= 2) {
    const GridSpec grid(T, cfg.resolved_delta());
    const SymTridiagonal Qs =
        stationary_precision(cfg.tau2_star, cfg.lambda_star, grid);
    Eigen::VectorXd eps(T);
    for (Eigen::Index j = 0; j < T; ++j) eps[j] = rng.normal();
    truth.R_star = sample_gaussian_with(cholesky_banded(Qs),
                                        Eigen::VectorXd::Zero(T), eps);
  } else {
    truth.R_star = Eigen::VectorXd::Zero(T);
  }
  return truth;
}

// One observation from the generating model.
Eigen::VectorXd draw_observation(const SimConfig& cfg, const GroundTruth& truth,
                                 Eigen::Index i, int label, Rng& rng) {
  const Eigen::Index T = cfg.T;
  Eigen::VectorXd x = truth.mu_star[label];

  if (cfg.setting <= 2) {
    const GridSpec grid(T, cfg.resolved_delta());
    LogLengthScaleField field;
    field.nu = truth.R_star;
    field.zeta = zeta_rule(cfg, i);
    const BandedCholeskyFactor L =
        cholesky_banded(nonstationary_precision(cfg.tau_star, field, grid));
    Eigen::VectorXd eps(T);
    for (Eigen::Index j = 0; j < T; ++j) eps[j] = rng.normal();
    x += sample_gaussian_with(L, Eigen::VectorXd::Zero(T), eps);
    for (Eigen::Index j = 0; j < T; ++j) {
      x[j] += truth.sigma_star[label][j] * rng.normal();
    }
  } else if (cfg.setting == 3) {
    for (Eigen::Index j = 0; j < T; ++j) {
      x[j] += truth.sigma_star[label][j] * rng.normal();
    }
  } else {
    // Exchangeable unit-variance covariance via the rank-1 construction.
    const double shared = rng.normal();
    const double a = std::sqrt(cfg.uniform_rho);
    const double b = std::sqrt(1.0 - cfg.uniform_rho);
    for (Eigen::Index j = 0; j < T; ++j) {
      x[j] += a * shared + b * rng.normal();
    }
  }
  return x;
}

}  // namespace

std::pair<FunctionalDataset, GroundTruth> generate_dataset(
    const SimConfig& cfg) {
  if (cfg.setting < 1 || cfg.setting > 4) {
    throw std::invalid_argument("generate_dataset: setting must be 1..4");
  }
  if (cfg.signal_fraction < 0.0 || cfg.signal_fraction > 1.0) {
    throw std::invalid_argument("generate_dataset: signal_fraction outside [0,1]");
  }
  if (cfg.setting == 4 && (cfg.uniform_rho < 0.0 || cfg.uniform_rho >= 1.0)) {
    throw std::invalid_argument("generate_dataset: uniform_rho outside [0,1)");
  }

  Rng truth_rng(derive_seed(cfg.seed, 0));
  const GroundTruth truth = make_truth(cfg, truth_rng);

  FunctionalDataset data;
  data.grid = GridSpec(cfg.T, cfg.resolved_delta());
  data.X.resize(cfg.n, cfg.T);
  data.y.resize(cfg.n);
  Rng label_rng(derive_seed(cfg.seed, 1));
  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    data.y[i] = (label_rng.uniform01() <= cfg.class_balance) ? 1 : 0;
    Rng obs_rng(derive_seed(cfg.seed, 2 + static_cast<std::uint64_t>(i)));
    data.X.row(i) = draw_observation(cfg, truth, i, data.y[i], obs_rng).transpose();
  }
  return {std::move(data), truth};
}

namespace {

// log N(x; mu, Q^{-1} + D) in O(T) through the tridiagonal structure:
//   (Q^{-1} + D)^{-1} = D^{-1} - D^{-1} (Q + D^{-1})^{-1} D^{-1}
//   log det(Q^{-1} + D) = log det(Q + D^{-1}) - log det Q + log det D.
double structured_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                         const SymTridiagonal& Q, const Eigen::VectorXd& d) {
  const Eigen::Index T = x.size();
  SymTridiagonal inner = Q;
  inner.add_diagonal(d.cwiseInverse());
  const BandedCholeskyFactor L_inner = cholesky_banded(inner);
  const BandedCholeskyFactor L_Q = cholesky_banded(Q);

  const Eigen::VectorXd r = x - mu;
  const Eigen::VectorXd dr = r.cwiseQuotient(d);
  const double quad = dr.dot(r) - dr.dot(thomas_solve(inner, dr));
  const double ld =
      log_det(L_inner) - log_det(L_Q) + d.array().log().sum();
  return -0.5 * static_cast<double>(T) * std::log(2.0 * M_PI) - 0.5 * ld -
         0.5 * quad;
}

}  // namespace

double ground_truth_bayes_error(const SimConfig& cfg, const GroundTruth& truth,
                                Eigen::Index n_mc) {
  const Eigen::Index T = cfg.T;
  const double log_odds_prior =
      std::log(cfg.class_balance) - std::log(1.0 - cfg.class_balance);
  Rng label_rng(derive_seed(cfg.seed, 1000003));
  Eigen::Index errors = 0;

  for (Eigen::Index m = 0; m < n_mc; ++m) {
    const int label = (label_rng.uniform01() <= cfg.class_balance) ? 1 : 0;
    Rng obs_rng(derive_seed(cfg.seed, 2000003 + static_cast<std::uint64_t>(m)));
    // Fresh draws continue the perturbation rule past the training block.
    const Eigen::VectorXd x =
        draw_observation(cfg, truth, cfg.n + m, label, obs_rng);

    double score = log_odds_prior;
    if (cfg.setting <= 2) {
      const GridSpec grid(T, cfg.resolved_delta());
      LogLengthScaleField field;
      field.nu = truth.R_star;
      field.zeta = zeta_rule(cfg, cfg.n + m);
      const SymTridiagonal Q =
          nonstationary_precision(cfg.tau_star, field, grid);
      score += structured_logpdf(
                   x, truth.mu_star[1], Q,
                   truth.sigma_star[1].cwiseProduct(truth.sigma_star[1])) -
               structured_logpdf(
                   x, truth.mu_star[0], Q,
                   truth.sigma_star[0].cwiseProduct(truth.sigma_star[0]));
    } else if (cfg.setting == 3) {
      for (Eigen::Index j = 0; j < T; ++j) {
        const double v1 = truth.sigma_star[1][j] * truth.sigma_star[1][j];
        const double v0 = truth.sigma_star[0][j] * truth.sigma_star[0][j];
        const double r1 = x[j] - truth.mu_star[1][j];
        const double r0 = x[j] - truth.mu_star[0][j];
        score += -0.5 * std::log(v1) - 0.5 * r1 * r1 / v1 +
                 0.5 * std::log(v0) + 0.5 * r0 * r0 / v0;
      }
    } else {
      // Shared exchangeable covariance: only means differ.
      const double rho = cfg.uniform_rho;
      const double denom = 1.0 - rho + rho * static_cast<double>(T);
      auto quad = [&](const Eigen::VectorXd& r) {
        const double s = r.sum();
        return (r.squaredNorm() - rho * s * s / denom) / (1.0 - rho);
      };
      score += -0.5 * quad(x - truth.mu_star[1]) +
               0.5 * quad(x - truth.mu_star[0]);
    }
    const int decided = (score >= 0.0) ? 1 : 0;
    if (decided != label) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(n_mc);
}

}  // namespace gpda
