#include "gpda/vi_engine.hpp"

#include <cmath>

#include "gpda/parallel.hpp"

namespace gpda {

namespace {

Eigen::Index slot_count(const ModelState& state, int k) {
  switch (k) {
    case kClass0: return state.n0;
    case kClass1: return state.n1;
    default: return state.n0 + state.n1;
  }
}

bool in_slot(int label, int k) { return k == kShared || label == k; }

// E[C(nu_k + 0)] for the mean-function length-scale field of slot k.
SymTridiagonal expected_C_mean(const ModelState& state, int k) {
  return expected_unit_precision(state.mean_ls_fields[k].moments(), 0.0,
                                 state.grid);
}

// E[C(R + zeta_i)] for the latent process of observation i.
SymTridiagonal expected_C_latent(const ModelState& state, Eigen::Index i) {
  return expected_unit_precision(state.common_ls.moments(),
                                 state.perturbations[i], state.grid);
}

// E (x_ij - mu_kj - z_ij)^2 for every j of one observation.
Eigen::VectorXd residual_moments(const ModelState& state,
                                 const FunctionalDataset& data, int k,
                                 Eigen::Index i) {
  const Eigen::VectorXd resid = data.X.row(i).transpose() -
                                state.mean_fields[k].mean -
                                state.latents[i].mean;
  return resid.cwiseProduct(resid) + state.mean_fields[k].cov.inv_diag +
         state.latents[i].cov.inv_diag;
}

}  // namespace

void FunctionalDataset::validate(bool require_both_classes) const {
  if (X.rows() != y.size()) {
    throw std::invalid_argument("dataset: label count does not match rows");
  }
  if (X.cols() != grid.T) {
    throw std::invalid_argument("dataset: grid length does not match columns");
  }
  if (!X.allFinite()) {
    throw std::invalid_argument("dataset: non-finite observation values");
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) {
      throw std::invalid_argument("dataset: labels must be 0 or 1");
    }
  }
  if (require_both_classes && (count(0) < 1 || count(1) < 1)) {
    throw std::invalid_argument("dataset: both classes must be present");
  }
}

ModelState initialize_state(const FunctionalDataset& data,
                            const Hyperparams& hyper, const FitOptions& opts) {
  data.validate(!opts.allow_empty);
  const Eigen::Index n = data.n();
  const Eigen::Index T = data.T();

  ModelState state;
  state.grid = data.grid;
  state.n0 = data.count(0);
  state.n1 = data.count(1);

  state.map.common_length = std::exp(hyper.common_ls_length.mu);
  state.map.common_scale =
      hyper.common_scale.rate / (hyper.common_scale.shape + 1.0);
  state.map.mean_ls_length = std::exp(hyper.mean_ls_length.mu);
  state.map.mean_ls_scale =
      hyper.mean_ls_scale.rate / (hyper.mean_ls_scale.shape + 1.0);
  state.ising = IsingParams{2.0, 1.0};

  // Log length-scale fields start at their priors.
  const SymTridiagonal prior_nu = stationary_precision(
      state.map.mean_ls_scale, state.map.mean_ls_length, state.grid);
  const SymTridiagonal prior_R = stationary_precision(
      state.map.common_scale, state.map.common_length, state.grid);
  for (int k : kAllSlots) {
    state.mean_ls_fields[k].mean =
        Eigen::VectorXd::Constant(T, hyper.mean_ls_prior_mean);
    state.mean_ls_fields[k].set_precision(prior_nu);
    state.mean_scales[k] = InvGammaVariational{hyper.mean_scale.shape,
                                               hyper.mean_scale.rate};
    state.noise[k].shape = Eigen::VectorXd::Constant(T, hyper.noise.shape);
    state.noise[k].rate = Eigen::VectorXd::Constant(T, hyper.noise.rate);
  }
  state.common_ls.mean =
      Eigen::VectorXd::Constant(T, hyper.common_ls_prior_mean);
  state.common_ls.set_precision(prior_R);

  state.latent_scale =
      InvGammaVariational{hyper.latent_scale.shape, hyper.latent_scale.rate};
  state.selection = Eigen::VectorXd::Constant(T, 0.5);
  state.perturbations = Eigen::VectorXd::Zero(n);

  // Mean fields: class sample means (grand mean for the shared slot) under a
  // prior-consistent precision.
  for (int k : kAllSlots) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(T);
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_slot(data.y[i], k)) {
        m += data.X.row(i).transpose();
        ++count;
      }
    }
    if (count > 0) m /= static_cast<double>(count);
    state.mean_fields[k].mean = m;
    const double scale_moment = state.mean_scales[k].mean_inverse();
    state.mean_fields[k].set_precision(
        expected_C_mean(state, k).scaled(scale_moment));
  }

  // Latent processes: zero mean, prior precision.
  state.latents.resize(n);
  const double tau_moment = state.latent_scale.mean_inverse();
  for (Eigen::Index i = 0; i < n; ++i) {
    state.latents[i].mean = Eigen::VectorXd::Zero(T);
    state.latents[i].set_precision(
        expected_C_latent(state, i).scaled(tau_moment));
  }
  return state;
}

void update_latent(ModelState& state, const FunctionalDataset& data,
                   const Hyperparams& hyper, Eigen::Index i) {
  (void)hyper;
  const int k = data.y[i];
  const Eigen::VectorXd einv_k = state.noise[k].mean_inverse();
  const Eigen::VectorXd einv_s = state.noise[kShared].mean_inverse();
  const Eigen::VectorXd& w = state.selection;

  const Eigen::VectorXd lik_diag =
      w.cwiseProduct(einv_k) +
      (Eigen::VectorXd::Ones(w.size()) - w).cwiseProduct(einv_s);

  SymTridiagonal Q =
      expected_C_latent(state, i).scaled(state.latent_scale.mean_inverse());
  Q.add_diagonal(lik_diag);

  const Eigen::VectorXd x = data.X.row(i).transpose();
  const Eigen::VectorXd rhs =
      w.cwiseProduct(einv_k).cwiseProduct(x - state.mean_fields[k].mean) +
      (Eigen::VectorXd::Ones(w.size()) - w)
          .cwiseProduct(einv_s)
          .cwiseProduct(x - state.mean_fields[kShared].mean);

  state.latents[i].mean = thomas_solve(Q, rhs);
  state.latents[i].set_precision(Q);
}

void update_latent_fields(ModelState& state, const FunctionalDataset& data,
                          const Hyperparams& hyper, int threads) {
  parallel_for(data.n(), threads, [&](Eigen::Index i) {
    update_latent(state, data, hyper, i);
  });
}

void update_mean_functions(ModelState& state, const FunctionalDataset& data,
                           const Hyperparams& hyper) {
  (void)hyper;
  const Eigen::Index n = data.n();
  const Eigen::Index T = data.T();
  const Eigen::VectorXd& w = state.selection;

  for (int k : kAllSlots) {
    const Eigen::VectorXd einv = state.noise[k].mean_inverse();
    const Eigen::VectorXd gate =
        (k == kShared) ? Eigen::VectorXd(Eigen::VectorXd::Ones(T) - w) : w;
    const double nk = static_cast<double>(slot_count(state, k));

    Eigen::VectorXd resid_sum = Eigen::VectorXd::Zero(T);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_slot(data.y[i], k)) {
        resid_sum += data.X.row(i).transpose() - state.latents[i].mean;
      }
    }

    SymTridiagonal Q =
        expected_C_mean(state, k).scaled(state.mean_scales[k].mean_inverse());
    Q.add_diagonal(nk * gate.cwiseProduct(einv));

    const Eigen::VectorXd rhs =
        gate.cwiseProduct(einv).cwiseProduct(resid_sum);
    state.mean_fields[k].mean = thomas_solve(Q, rhs);
    state.mean_fields[k].set_precision(Q);
  }
}

void update_mean_scales(ModelState& state, const Hyperparams& hyper) {
  const double T = static_cast<double>(state.T());
  for (int k : kAllSlots) {
    const double tr = band_trace_product(
        state.mean_fields[k].second_moment_diag(),
        state.mean_fields[k].second_moment_off(), expected_C_mean(state, k));
    state.mean_scales[k].shape = hyper.mean_scale.shape + 0.5 * T;
    state.mean_scales[k].rate = hyper.mean_scale.rate + 0.5 * tr;
  }
}

void update_noise_variances(ModelState& state, const FunctionalDataset& data,
                            const Hyperparams& hyper) {
  const Eigen::Index n = data.n();
  const Eigen::Index T = data.T();
  const Eigen::VectorXd& w = state.selection;

  for (int k : kAllSlots) {
    const Eigen::VectorXd gate =
        (k == kShared) ? Eigen::VectorXd(Eigen::VectorXd::Ones(T) - w) : w;
    const double nk = static_cast<double>(slot_count(state, k));

    Eigen::VectorXd sq_sum = Eigen::VectorXd::Zero(T);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_slot(data.y[i], k)) {
        sq_sum += residual_moments(state, data, k, i);
      }
    }
    state.noise[k].shape =
        Eigen::VectorXd::Constant(T, hyper.noise.shape) + 0.5 * nk * gate;
    state.noise[k].rate = Eigen::VectorXd::Constant(T, hyper.noise.rate) +
                          0.5 * gate.cwiseProduct(sq_sum);
  }
}

void update_selection(ModelState& state, const FunctionalDataset& data,
                      const Hyperparams& hyper) {
  (void)hyper;
  const Eigen::Index n = data.n();
  const Eigen::Index T = data.T();
  const double n0 = static_cast<double>(state.n0);
  const double n1 = static_cast<double>(state.n1);

  const Eigen::VectorXd elog0 = state.noise[kClass0].mean_log();
  const Eigen::VectorXd elog1 = state.noise[kClass1].mean_log();
  const Eigen::VectorXd elogs = state.noise[kShared].mean_log();
  const Eigen::VectorXd einv0 = state.noise[kClass0].mean_inverse();
  const Eigen::VectorXd einv1 = state.noise[kClass1].mean_inverse();
  const Eigen::VectorXd einvs = state.noise[kShared].mean_inverse();

  // u_j collects the class/shared log-variance contrast; G_j the
  // precision-weighted residual contrast summed over observations.
  const Eigen::VectorXd u =
      0.5 * (n1 * elog1 + n0 * elog0 - (n0 + n1) * elogs);
  Eigen::VectorXd G = Eigen::VectorXd::Zero(T);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = data.y[i];
    const Eigen::VectorXd& einv_k = (k == kClass1) ? einv1 : einv0;
    G += einv_k.cwiseProduct(residual_moments(state, data, k, i)) -
         einvs.cwiseProduct(residual_moments(state, data, kShared, i));
  }

  Eigen::VectorXd& w = state.selection;
  for (Eigen::Index j = 0; j < T; ++j) {
    double neighbor = 0.0;
    if (j > 0) neighbor += w[j - 1];
    if (j < T - 1) neighbor += w[j + 1];
    w[j] = expit(-u[j] - 0.5 * G[j] - state.ising.alpha +
                 state.ising.beta * neighbor);
  }
}

void update_latent_scale(ModelState& state, const Hyperparams& hyper) {
  const double n = static_cast<double>(state.n());
  const double T = static_cast<double>(state.T());
  double tr = 0.0;
  for (Eigen::Index i = 0; i < state.n(); ++i) {
    tr += band_trace_product(state.latents[i].second_moment_diag(),
                             state.latents[i].second_moment_off(),
                             expected_C_latent(state, i));
  }
  state.latent_scale.shape = hyper.latent_scale.shape + 0.5 * n * T;
  state.latent_scale.rate = hyper.latent_scale.rate + 0.5 * tr;
}

SvbProblem mean_ls_problem(const ModelState& state, const Hyperparams& hyper,
                           int k) {
  const Eigen::Index T = state.T();
  const double scale_moment = state.mean_scales[k].mean_inverse();
  const TraceCoefficients tc =
      trace_coefficients(state.mean_fields[k].second_moment_diag(),
                         state.mean_fields[k].second_moment_off(), state.grid);

  SvbProblem p;
  p.lin = Eigen::VectorXd::Constant(T, 0.5);
  p.lin[T - 1] = 0.0;
  p.pos = scale_moment * tc.pos;
  p.neg = scale_moment * tc.neg;
  p.prior_mean = Eigen::VectorXd::Constant(T, hyper.mean_ls_prior_mean);
  p.prior_prec = stationary_precision(state.map.mean_ls_scale,
                                      state.map.mean_ls_length, state.grid);
  // Constant chosen so the objective equals this field's share of the ELBO.
  p.cnst = -0.5 * scale_moment * tc.cnst +
           0.5 * log_det_stationary(state.map.mean_ls_scale,
                                    state.map.mean_ls_length, state.grid) +
           0.5 * static_cast<double>(T);
  return p;
}

SvbProblem common_ls_problem(const ModelState& state,
                             const Hyperparams& hyper) {
  const Eigen::Index T = state.T();
  const Eigen::Index n = state.n();
  const double tau_moment = state.latent_scale.mean_inverse();

  SvbProblem p;
  p.lin = Eigen::VectorXd::Constant(T, 0.5 * static_cast<double>(n));
  p.lin[T - 1] = 0.0;
  p.pos = Eigen::VectorXd::Zero(T - 1);
  p.neg = Eigen::VectorXd::Zero(T - 1);
  double cnst_traces = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const TraceCoefficients tc =
        trace_coefficients(state.latents[i].second_moment_diag(),
                           state.latents[i].second_moment_off(), state.grid);
    const double zeta = state.perturbations[i];
    p.pos += std::exp(zeta) * tc.pos;
    p.neg += std::exp(-zeta) * tc.neg;
    cnst_traces += tc.cnst;
  }
  p.pos *= tau_moment;
  p.neg *= tau_moment;
  p.prior_mean = Eigen::VectorXd::Constant(T, hyper.common_ls_prior_mean);
  p.prior_prec = stationary_precision(state.map.common_scale,
                                      state.map.common_length, state.grid);
  p.cnst = -0.5 * tau_moment * cnst_traces +
           0.5 * static_cast<double>(T - 1) * state.perturbations.sum() +
           0.5 * log_det_stationary(state.map.common_scale,
                                    state.map.common_length, state.grid) +
           0.5 * static_cast<double>(T);
  return p;
}

SvbReport svb_update_mean_lengthscale(ModelState& state,
                                      const Hyperparams& hyper, int k,
                                      const SvbOptions& opts) {
  const SvbProblem p = mean_ls_problem(state, hyper, k);
  return svb_maximize(p, state.mean_ls_fields[k], opts);
}

SvbReport svb_update_common_lengthscale(ModelState& state,
                                        const Hyperparams& hyper,
                                        const SvbOptions& opts) {
  const SvbProblem p = common_ls_problem(state, hyper);
  return svb_maximize(p, state.common_ls, opts);
}

ModelState fit(const FunctionalDataset& data, const Hyperparams& hyper_in,
               const FitOptions& opts, FitReport* report) {
  const Hyperparams hyper = hyper_in.resolved_for(data.grid);
  ModelState state = initialize_state(data, hyper, opts);
  const SvbOptions svb_opts{opts.svb_steps, opts.svb_grad_tol, 0.1, 30};

  // Snapshot of everything the stopping rule watches.
  auto snapshot = [&state]() {
    std::vector<double> v;
    auto push_vec = [&v](const Eigen::VectorXd& x) {
      v.insert(v.end(), x.data(), x.data() + x.size());
    };
    push_vec(state.selection);
    for (int k : kAllSlots) {
      push_vec(state.mean_fields[k].mean);
      push_vec(state.mean_ls_fields[k].mean);
      push_vec(state.noise[k].rate);
      v.push_back(state.mean_scales[k].rate);
    }
    for (const auto& z : state.latents) push_vec(z.mean);
    push_vec(state.common_ls.mean);
    v.push_back(state.latent_scale.rate);
    push_vec(state.perturbations);
    v.push_back(state.map.common_length);
    v.push_back(state.map.common_scale);
    v.push_back(state.map.mean_ls_scale);
    v.push_back(state.map.mean_ls_length);
    v.push_back(state.ising.alpha);
    v.push_back(state.ising.beta);
    return v;
  };

  std::vector<double> prev = snapshot();
  double change = std::numeric_limits<double>::infinity();
  int sweep = 0;
  for (; sweep < opts.max_sweeps; ++sweep) {
    update_latent_fields(state, data, hyper, opts.threads);
    update_mean_functions(state, data, hyper);
    update_mean_scales(state, hyper);
    if (!opts.svb_frozen()) {
      for (int k : kAllSlots) {
        svb_update_mean_lengthscale(state, hyper, k, svb_opts);
      }
    }
    update_noise_variances(state, data, hyper);
    update_selection(state, data, hyper);
    update_latent_scale(state, hyper);
    if (!opts.svb_frozen()) {
      svb_update_common_lengthscale(state, hyper, svb_opts);
    }
    if (!opts.map_frozen()) {
      map_update_perturbations(state, hyper, opts.threads);
      map_update_common_hyper(state, hyper);
      map_update_mean_ls_hyper(state, hyper);
      map_update_ising_step(state, hyper);
    }
    if (opts.record_elbo) {
      state.elbo_trace.push_back(compute_elbo(state, data, hyper));
    }

    const std::vector<double> cur = snapshot();
    change = 0.0;
    for (std::size_t idx = 0; idx < cur.size(); ++idx) {
      change = std::max(change, std::abs(cur[idx] - prev[idx]) /
                                    (1.0 + std::abs(prev[idx])));
    }
    prev = cur;
    if (change < opts.tol) {
      state.converged = true;
      ++sweep;
      break;
    }
  }
  if (report) {
    report->converged = state.converged;
    report->sweeps = sweep;
    report->final_change = change;
  }
  return state;
}

}  // namespace gpda
