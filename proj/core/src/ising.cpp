#include "gpda/ising.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace gpda {

namespace {

// Local site factor exp(-alpha g) and edge factor exp(beta g g').
inline double site(double alpha, int g) { return std::exp(-alpha * g); }
inline double edge(double beta, int g, int gp) {
  return (g == 1 && gp == 1) ? std::exp(beta) : 1.0;
}

// Root of a smooth monotone-enough derivative on [lo, hi] by Newton steps
// safeguarded with bisection on a sign-changing bracket. Returns the boundary
// when the derivative does not change sign inside the box.
struct RootResult {
  double x;
  bool at_boundary;
};

RootResult safeguarded_newton(const std::function<double(double)>& deriv,
                              double lo, double hi, double x0, double tol) {
  double dlo = deriv(lo);
  double dhi = deriv(hi);
  if (dlo <= 0.0) return {lo, true};   // decreasing from the start
  if (dhi >= 0.0) return {hi, true};   // still increasing at the end
  double x = std::min(std::max(x0, lo), hi);
  double dx = deriv(x);
  for (int it = 0; it < 200; ++it) {
    if (dx > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double h = 1e-6 * (1.0 + std::abs(x));
    const double second = (deriv(x + h) - deriv(x - h)) / (2.0 * h);
    double x_new = (second < 0.0) ? x - dx / second : 0.5 * (lo + hi);
    if (!(x_new > lo && x_new < hi)) {
      x_new = 0.5 * (lo + hi);
    }
    if (std::abs(x_new - x) < tol) {
      return {x_new, false};
    }
    x = x_new;
    dx = deriv(x);
  }
  return {x, false};
}

}  // namespace

double log_partition(const IsingParams& params, Eigen::Index T) {
  if (T < 1) throw std::invalid_argument("log_partition: T must be >= 1");
  double u0 = site(params.alpha, 0);
  double u1 = site(params.alpha, 1);
  double log_scale = 0.0;
  for (Eigen::Index j = 1; j < T; ++j) {
    const double n0 = u0 * edge(params.beta, 0, 0) * site(params.alpha, 0) +
                      u1 * edge(params.beta, 1, 0) * site(params.alpha, 0);
    const double n1 = u0 * edge(params.beta, 0, 1) * site(params.alpha, 1) +
                      u1 * edge(params.beta, 1, 1) * site(params.alpha, 1);
    const double scale = std::max(n0, n1);
    u0 = n0 / scale;
    u1 = n1 / scale;
    log_scale += std::log(scale);
  }
  return log_scale + std::log(u0 + u1);
}

double expected_log_prior(const Eigen::VectorXd& w, const IsingParams& params) {
  const Eigen::Index T = w.size();
  if (T < 1) throw std::invalid_argument("expected_log_prior: empty field");
  double pair = 0.0;
  for (Eigen::Index j = 0; j < T - 1; ++j) {
    pair += w[j] * w[j + 1];
  }
  return -params.alpha * w.sum() + params.beta * pair -
         log_partition(params, T);
}

IsingChainMoments chain_moments(const IsingParams& params, Eigen::Index T) {
  if (T < 1) throw std::invalid_argument("chain_moments: T must be >= 1");
  // Normalized forward and backward messages; marginals are scale-free
  // ratios, so per-step normalization is enough.
  Eigen::MatrixXd fwd(T, 2), bwd(T, 2);
  fwd(0, 0) = site(params.alpha, 0);
  fwd(0, 1) = site(params.alpha, 1);
  fwd.row(0) /= fwd.row(0).sum();
  for (Eigen::Index j = 1; j < T; ++j) {
    for (int g = 0; g < 2; ++g) {
      fwd(j, g) = site(params.alpha, g) *
                  (fwd(j - 1, 0) * edge(params.beta, 0, g) +
                   fwd(j - 1, 1) * edge(params.beta, 1, g));
    }
    fwd.row(j) /= fwd.row(j).sum();
  }
  bwd(T - 1, 0) = bwd(T - 1, 1) = 0.5;
  for (Eigen::Index j = T - 2; j >= 0; --j) {
    for (int g = 0; g < 2; ++g) {
      bwd(j, g) = edge(params.beta, g, 0) * site(params.alpha, 0) * bwd(j + 1, 0) +
                  edge(params.beta, g, 1) * site(params.alpha, 1) * bwd(j + 1, 1);
    }
    bwd.row(j) /= bwd.row(j).sum();
  }

  IsingChainMoments m;
  for (Eigen::Index j = 0; j < T; ++j) {
    const double p1 = fwd(j, 1) * bwd(j, 1);
    const double p0 = fwd(j, 0) * bwd(j, 0);
    m.sum_mean += p1 / (p0 + p1);
  }
  for (Eigen::Index j = 0; j < T - 1; ++j) {
    double total = 0.0;
    double on = 0.0;
    for (int g = 0; g < 2; ++g) {
      for (int gp = 0; gp < 2; ++gp) {
        const double v = fwd(j, g) * edge(params.beta, g, gp) *
                         site(params.alpha, gp) * bwd(j + 1, gp);
        total += v;
        if (g == 1 && gp == 1) on = v;
      }
    }
    m.sum_pair += on / total;
  }
  return m;
}

IsingMapResult map_update_ising(const Eigen::VectorXd& w,
                                const IsingHyper& hyper, IsingParams init) {
  const Eigen::Index T = w.size();
  if (T < 1) throw std::invalid_argument("map_update_ising: empty field");
  for (Eigen::Index j = 0; j < T; ++j) {
    if (w[j] < 0.0 || w[j] > 1.0) {
      throw std::invalid_argument("map_update_ising: w outside [0,1]");
    }
  }
  const double sum_w = w.sum();
  double sum_pair = 0.0;
  for (Eigen::Index j = 0; j < T - 1; ++j) {
    sum_pair += w[j] * w[j + 1];
  }

  IsingMapResult out;
  out.params = init;
  out.params.alpha =
      std::min(std::max(out.params.alpha, hyper.alpha_min), hyper.alpha_max);
  out.params.beta = std::min(std::max(out.params.beta, 0.0), hyper.beta_max);

  const double tol = 1e-6;
  bool hit_box = false;
  for (int sweep = 0; sweep < 200; ++sweep) {
    const IsingParams before = out.params;

    // alpha step: d/d alpha = -sum_w + E_chain[sum gamma] + prior term.
    auto alpha_deriv = [&](double a) {
      IsingParams p{a, out.params.beta};
      double d = -sum_w + chain_moments(p, T).sum_mean;
      if (!hyper.flat) {
        d -= (a - hyper.alpha_mean) / (hyper.alpha_sd * hyper.alpha_sd);
      }
      return d;
    };
    RootResult ra = safeguarded_newton(alpha_deriv, hyper.alpha_min,
                                       hyper.alpha_max, out.params.alpha, tol);
    out.params.alpha = ra.x;
    hit_box = hit_box || ra.at_boundary;

    // beta step (skipped when the chain has no edges).
    if (T >= 2) {
      auto beta_deriv = [&](double b) {
        IsingParams p{out.params.alpha, b};
        double d = sum_pair - chain_moments(p, T).sum_pair;
        if (!hyper.flat) {
          const double lb = std::log(b);
          d += (-1.0 - (lb - hyper.log_beta_mean) /
                           (hyper.log_beta_sd * hyper.log_beta_sd)) / b;
        }
        return d;
      };
      const double beta_floor = hyper.flat ? 0.0 : 1e-8;
      RootResult rb = safeguarded_newton(beta_deriv, std::max(beta_floor, 1e-12),
                                         hyper.beta_max, out.params.beta, tol);
      out.params.beta = rb.x;
      if (hyper.flat && rb.at_boundary && rb.x <= 1e-12) {
        out.params.beta = 0.0;  // flat-prior boundary solution
      } else {
        hit_box = hit_box || (rb.at_boundary && rb.x >= hyper.beta_max);
      }
    } else if (!hyper.flat) {
      // No pair evidence: the log-normal prior mode.
      out.params.beta = std::exp(hyper.log_beta_mean -
                                 hyper.log_beta_sd * hyper.log_beta_sd);
    }

    if (std::abs(out.params.alpha - before.alpha) < tol &&
        std::abs(out.params.beta - before.beta) < tol) {
      out.hit_box = hit_box;
      return out;
    }
  }
  out.converged = false;
  out.hit_box = hit_box;
  return out;
}

}  // namespace gpda
