#include <cmath>

#include "gpda/vi_engine.hpp"

namespace gpda {

double invgamma_kl(double a, double b, double A, double B) {
  return A * std::log(b / B) + std::lgamma(A) - std::lgamma(a) +
         (a - A) * digamma(a) + (B - b) * a / b;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// E log p(field | scale, nu) + H(q) for a Gaussian field with the
// nonstationary prior: scale is an inverse-gamma factor, nu a Gaussian
// length-scale field entering through E[C]. The -T/2 log 2pi of the prior and
// the +T/2 log 2pi e of the entropy collapse to T/2.
double gaussian_field_term(const GaussianFieldPosterior& q,
                           const InvGammaVariational& scale,
                           const Eigen::VectorXd& nu_linear,  // E nu, length T
                           const SymTridiagonal& expected_C,
                           const GridSpec& grid, double zeta = 0.0) {
  const double T = static_cast<double>(grid.T);
  const double e_log_det =
      T * (digamma(scale.shape) - std::log(scale.rate)) -
      (T - 1.0) * std::log(2.0 * grid.delta) +
      log_det_nu_linear_part(nu_linear, grid) + (T - 1.0) * zeta;
  const double tr = band_trace_product(q.second_moment_diag(),
                                       q.second_moment_off(), expected_C);
  return 0.5 * T + 0.5 * e_log_det -
         0.5 * scale.mean_inverse() * tr - 0.5 * log_det(q.omega);
}

// Same for a field with the fixed stationary prior N(mu 1, Q_S^{-1}).
double gaussian_field_term_stationary(const GaussianFieldPosterior& q,
                                      double prior_mean, double scale,
                                      double length, const GridSpec& grid) {
  const double T = static_cast<double>(grid.T);
  const SymTridiagonal Qs = stationary_precision(scale, length, grid);
  const Eigen::VectorXd centered =
      q.mean - Eigen::VectorXd::Constant(grid.T, prior_mean);
  return 0.5 * T + 0.5 * log_det_stationary(scale, length, grid) -
         0.5 * (Qs.quadform(centered) +
                band_trace_product(q.cov.inv_diag, q.cov.inv_off, Qs)) -
         0.5 * log_det(q.omega);
}

}  // namespace

ElboTerms compute_elbo_terms(const ModelState& state,
                             const FunctionalDataset& data,
                             const Hyperparams& hyper_in) {
  const Hyperparams hyper = hyper_in.resolved_for(state.grid);
  const Eigen::Index n = data.n();
  const Eigen::Index T = state.T();
  ElboTerms terms;

  std::array<Eigen::VectorXd, 3> einv, elog;
  for (int k : kAllSlots) {
    einv[k] = state.noise[k].mean_inverse();
    elog[k] = state.noise[k].mean_log();
  }
  const Eigen::VectorXd& w = state.selection;

  // Likelihood: per location a w-mixture of the class and shared noise
  // models around mean-plus-latent.
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = data.y[i];
    Eigen::VectorXd resid_k = data.X.row(i).transpose() -
                              state.mean_fields[k].mean -
                              state.latents[i].mean;
    Eigen::VectorXd r_k = resid_k.cwiseProduct(resid_k) +
                          state.mean_fields[k].cov.inv_diag +
                          state.latents[i].cov.inv_diag;
    Eigen::VectorXd resid_s = data.X.row(i).transpose() -
                              state.mean_fields[kShared].mean -
                              state.latents[i].mean;
    Eigen::VectorXd r_s = resid_s.cwiseProduct(resid_s) +
                          state.mean_fields[kShared].cov.inv_diag +
                          state.latents[i].cov.inv_diag;
    for (Eigen::Index j = 0; j < T; ++j) {
      terms.likelihood +=
          w[j] * (-0.5 * kLog2Pi - 0.5 * elog[k][j] -
                  0.5 * einv[k][j] * r_k[j]) +
          (1.0 - w[j]) * (-0.5 * kLog2Pi - 0.5 * elog[kShared][j] -
                          0.5 * einv[kShared][j] * r_s[j]);
    }
  }

  for (int k : kAllSlots) {
    const SymTridiagonal EC = expected_unit_precision(
        state.mean_ls_fields[k].moments(), 0.0, state.grid);
    terms.mean_fields +=
        gaussian_field_term(state.mean_fields[k], state.mean_scales[k],
                            state.mean_ls_fields[k].mean, EC, state.grid);
    terms.mean_ls_fields += gaussian_field_term_stationary(
        state.mean_ls_fields[k], hyper.mean_ls_prior_mean,
        state.map.mean_ls_scale, state.map.mean_ls_length, state.grid);
    terms.mean_scales -=
        invgamma_kl(state.mean_scales[k].shape, state.mean_scales[k].rate,
                    hyper.mean_scale.shape, hyper.mean_scale.rate);
    for (Eigen::Index j = 0; j < T; ++j) {
      terms.noise -= invgamma_kl(state.noise[k].shape[j],
                                 state.noise[k].rate[j], hyper.noise.shape,
                                 hyper.noise.rate);
    }
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    const SymTridiagonal EC = expected_unit_precision(
        state.common_ls.moments(), state.perturbations[i], state.grid);
    terms.latents += gaussian_field_term(
        state.latents[i], state.latent_scale, state.common_ls.mean, EC,
        state.grid, state.perturbations[i]);
  }
  terms.latent_scale -=
      invgamma_kl(state.latent_scale.shape, state.latent_scale.rate,
                  hyper.latent_scale.shape, hyper.latent_scale.rate);

  terms.common_ls = gaussian_field_term_stationary(
      state.common_ls, hyper.common_ls_prior_mean, state.map.common_scale,
      state.map.common_length, state.grid);

  terms.selection = expected_log_prior(w, state.ising);
  for (Eigen::Index j = 0; j < T; ++j) {
    terms.selection += bernoulli_entropy(w[j]);
  }
  return terms;
}

double compute_elbo(const ModelState& state, const FunctionalDataset& data,
                    const Hyperparams& hyper) {
  return compute_elbo_terms(state, data, hyper).total();
}

}  // namespace gpda
