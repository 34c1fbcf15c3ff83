#include <cmath>

#include "gpda/parallel.hpp"
#include "gpda/vi_engine.hpp"

namespace gpda {

namespace detail {

double maximize_perturbation_objective(double lin_coef, double scale, double P,
                                       double N, double var, double init) {
  auto deriv = [&](double z) {
    return lin_coef - 0.5 * scale * (std::exp(z) * P - std::exp(-z) * N) -
           z / var;
  };
  auto second = [&](double z) {
    return -0.5 * scale * (std::exp(z) * P + std::exp(-z) * N) - 1.0 / var;
  };

  // Bracket the root of the strictly decreasing derivative.
  double lo = init, hi = init;
  double d = deriv(init);
  if (d > 0.0) {
    double step = 1.0;
    while (deriv(hi) > 0.0) {
      lo = hi;
      hi += step;
      step *= 2.0;
    }
  } else if (d < 0.0) {
    double step = 1.0;
    while (deriv(lo) < 0.0) {
      hi = lo;
      lo -= step;
      step *= 2.0;
    }
  } else {
    return init;
  }

  double z = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    d = deriv(z);
    if (d > 0.0) {
      lo = z;
    } else {
      hi = z;
    }
    double z_new = z - d / second(z);
    if (!(z_new > lo && z_new < hi)) {
      z_new = 0.5 * (lo + hi);
    }
    if (std::abs(z_new - z) < 1e-8) {
      return z_new;
    }
    z = z_new;
  }
  return z;
}

double scale_length_objective(double c_fields, double SA, double SB, double SC,
                              const GridSpec& grid, const InvGammaPrior& ig,
                              const LogNormalPrior& ln, double scale,
                              double length) {
  const double quad = length * SA + SB / length + SC;
  return 0.5 * c_fields * log_det_stationary(scale, length, grid) -
         0.5 * quad / scale + invgamma_logpdf(scale, ig.shape, ig.rate) +
         lognormal_logpdf(length, ln.mu, ln.sigma);
}

ScaleLengthResult maximize_scale_length(double c_fields, double SA, double SB,
                                        double SC, const GridSpec& grid,
                                        const InvGammaPrior& ig,
                                        const LogNormalPrior& ln,
                                        double init_scale, double init_length) {
  const double T = static_cast<double>(grid.T);
  const double length_floor = 1.01 * grid.delta;

  ScaleLengthResult out;
  out.scale = init_scale;
  out.length = std::max(init_length, length_floor);

  auto best_scale = [&](double length) {
    const double quad = length * SA + SB / length + SC;
    return (ig.rate + 0.5 * quad) / (ig.shape + 1.0 + 0.5 * c_fields * T);
  };
  // Derivative of the profile objective in u = log(length).
  auto u_deriv = [&](double u, double scale) {
    const double length = std::exp(u);
    return 0.5 * c_fields * (T - 1.0) -
           0.5 * (length * SA - SB / length) / scale - 1.0 -
           (u - ln.mu) / (ln.sigma * ln.sigma);
  };
  auto u_second = [&](double u, double scale) {
    const double length = std::exp(u);
    return -0.5 * (length * SA + SB / length) / scale -
           1.0 / (ln.sigma * ln.sigma);
  };

  for (int sweep = 0; sweep < 200; ++sweep) {
    const double prev_scale = out.scale;
    const double prev_length = out.length;

    out.scale = best_scale(out.length);

    const double u_floor = std::log(length_floor);
    double lo = u_floor, hi = std::log(out.length);
    double d_lo = u_deriv(lo, out.scale);
    if (d_lo <= 0.0) {
      out.length = length_floor;
      out.clamped = true;
    } else {
      double d_hi = u_deriv(hi, out.scale);
      double step = 1.0;
      while (d_hi > 0.0) {
        lo = hi;
        hi += step;
        step *= 2.0;
        d_hi = u_deriv(hi, out.scale);
      }
      double u = 0.5 * (lo + hi);
      for (int it = 0; it < 200; ++it) {
        const double d = u_deriv(u, out.scale);
        if (d > 0.0) {
          lo = u;
        } else {
          hi = u;
        }
        double u_new = u - d / u_second(u, out.scale);
        if (!(u_new > lo && u_new < hi)) {
          u_new = 0.5 * (lo + hi);
        }
        if (std::abs(u_new - u) < 1e-8) {
          u = u_new;
          break;
        }
        u = u_new;
      }
      out.length = std::exp(std::max(u, u_floor));
    }

    if (std::abs(out.scale - prev_scale) < 1e-6 &&
        std::abs(out.length - prev_length) < 1e-6) {
      break;
    }
  }
  return out;
}

}  // namespace detail

namespace {

// Pooled trace coefficients of a Gaussian field against the stationary
// kernel: band of (m - mu)(m - mu)^T + Cov.
TraceCoefficients centered_coefficients(const GaussianFieldPosterior& q,
                                        double prior_mean,
                                        const GridSpec& grid) {
  const Eigen::Index T = q.size();
  const Eigen::VectorXd centered =
      q.mean - Eigen::VectorXd::Constant(T, prior_mean);
  const Eigen::VectorXd diag =
      centered.cwiseProduct(centered) + q.cov.inv_diag;
  const Eigen::VectorXd off =
      centered.head(T - 1).cwiseProduct(centered.tail(T - 1)) + q.cov.inv_off;
  return trace_coefficients(diag, off, grid);
}

}  // namespace

void map_update_perturbation(ModelState& state, const Hyperparams& hyper,
                             Eigen::Index i) {
  const Eigen::Index T = state.T();
  const TraceCoefficients tc =
      trace_coefficients(state.latents[i].second_moment_diag(),
                         state.latents[i].second_moment_off(), state.grid);
  double P = 0.0, N = 0.0;
  for (Eigen::Index j = 0; j < T - 1; ++j) {
    const double half_var = 0.5 * state.common_ls.cov.inv_diag[j];
    P += tc.pos[j] * std::exp(state.common_ls.mean[j] + half_var);
    N += tc.neg[j] * std::exp(-state.common_ls.mean[j] + half_var);
  }
  state.perturbations[i] = detail::maximize_perturbation_objective(
      0.5 * static_cast<double>(T - 1), state.latent_scale.mean_inverse(), P,
      N, hyper.zeta_variance, state.perturbations[i]);
}

void map_update_perturbations(ModelState& state, const Hyperparams& hyper,
                              int threads) {
  parallel_for(state.n(), threads, [&](Eigen::Index i) {
    map_update_perturbation(state, hyper, i);
  });
  rebalance_perturbation_shift(state, hyper);
}

void rebalance_perturbation_shift(ModelState& state, const Hyperparams& hyper) {
  // The decomposition nu_i = R + zeta_i is invariant under (R + c, zeta - c);
  // only the two prior quadratics pin the split, which makes plain coordinate
  // updates crawl along that direction. Jump to the exact optimum of the
  // shift: c = [sum(zeta)/var - 1'Q(m - mu)] / [1'Q1 + n/var].
  const Eigen::Index n = state.n();
  if (n == 0) return;
  const Eigen::Index T = state.T();
  const SymTridiagonal Qs = stationary_precision(
      state.map.common_scale, state.map.common_length, state.grid);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(T);
  const Eigen::VectorXd Q_ones = Qs.matvec(ones);
  const Eigen::VectorXd centered =
      state.common_ls.mean -
      Eigen::VectorXd::Constant(T, hyper.common_ls_prior_mean);
  const double denom =
      ones.dot(Q_ones) + static_cast<double>(n) / hyper.zeta_variance;
  const double numer = state.perturbations.sum() / hyper.zeta_variance -
                       Q_ones.dot(centered);
  const double shift = numer / denom;
  state.common_ls.mean.array() += shift;
  state.perturbations.array() -= shift;
}

void map_update_common_hyper(ModelState& state, const Hyperparams& hyper) {
  const TraceCoefficients tc = centered_coefficients(
      state.common_ls, hyper.common_ls_prior_mean, state.grid);
  const auto res = detail::maximize_scale_length(
      1.0, tc.pos.sum(), tc.neg.sum(), tc.cnst, state.grid, hyper.common_scale,
      hyper.common_ls_length, state.map.common_scale, state.map.common_length);
  state.map.common_scale = res.scale;
  state.map.common_length = res.length;
  state.warning = state.warning || res.clamped;
}

void map_update_mean_ls_hyper(ModelState& state, const Hyperparams& hyper) {
  double SA = 0.0, SB = 0.0, SC = 0.0;
  for (int k : kAllSlots) {
    const TraceCoefficients tc = centered_coefficients(
        state.mean_ls_fields[k], hyper.mean_ls_prior_mean, state.grid);
    SA += tc.pos.sum();
    SB += tc.neg.sum();
    SC += tc.cnst;
  }
  const auto res = detail::maximize_scale_length(
      3.0, SA, SB, SC, state.grid, hyper.mean_ls_scale, hyper.mean_ls_length,
      state.map.mean_ls_scale, state.map.mean_ls_length);
  state.map.mean_ls_scale = res.scale;
  state.map.mean_ls_length = res.length;
  state.warning = state.warning || res.clamped;
}

void map_update_ising_step(ModelState& state, const Hyperparams& hyper) {
  const IsingMapResult res =
      map_update_ising(state.selection, hyper.ising, state.ising);
  state.ising = res.params;
  state.warning = state.warning || res.hit_box || !res.converged;
}

}  // namespace gpda
