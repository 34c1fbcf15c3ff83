#include "gpda/svb.hpp"

#include <cmath>

namespace gpda {

namespace {

void check_problem(const SvbProblem& p) {
  const Eigen::Index T = p.size();
  if (p.pos.size() != T - 1 || p.neg.size() != T - 1 ||
      p.prior_mean.size() != T || p.prior_prec.size() != T) {
    throw std::invalid_argument("SvbProblem: inconsistent sizes");
  }
}

}  // namespace

double svb_objective(const SvbProblem& p, const Eigen::VectorXd& mean,
                     const BandedCholeskyFactor& omega,
                     const InverseSubset& cov) {
  check_problem(p);
  const Eigen::Index T = p.size();
  double f = p.lin.dot(mean) + p.cnst;
  for (Eigen::Index j = 0; j < T - 1; ++j) {
    const double hv = 0.5 * cov.inv_diag[j];
    f -= 0.5 * (p.pos[j] * std::exp(mean[j] + hv) +
                p.neg[j] * std::exp(-mean[j] + hv));
  }
  const Eigen::VectorXd centered = mean - p.prior_mean;
  f -= 0.5 * p.prior_prec.quadform(centered);
  f -= 0.5 * band_trace_product(cov.inv_diag, cov.inv_off, p.prior_prec);
  f -= omega.ldiag.array().log().sum();
  return f;
}

SvbGradient svb_gradient(const SvbProblem& p, const Eigen::VectorXd& mean,
                         const BandedCholeskyFactor& omega,
                         const InverseSubset& cov) {
  check_problem(p);
  const Eigen::Index T = p.size();

  Eigen::VectorXd ev(T - 1), fv(T - 1);
  for (Eigen::Index j = 0; j < T - 1; ++j) {
    const double hv = 0.5 * cov.inv_diag[j];
    ev[j] = p.pos[j] * std::exp(mean[j] + hv);
    fv[j] = p.neg[j] * std::exp(-mean[j] + hv);
  }

  SvbGradient g;
  g.mean = p.lin - p.prior_prec.matvec(mean - p.prior_mean);
  g.mean.head(T - 1) -= 0.5 * (ev - fv);

  // Sensitivities with respect to the covariance band, then reverse through
  // the Takahashi recursion to reach the factor entries.
  Eigen::VectorXd bar_diag = -0.5 * p.prior_prec.diag;
  bar_diag.head(T - 1) -= 0.25 * (ev + fv);
  const Eigen::VectorXd bar_off = -p.prior_prec.off;
  sparse_inverse_subset_adjoint(omega, cov, bar_diag, bar_off, g.ldiag,
                                g.lsub);
  g.ldiag -= omega.ldiag.cwiseInverse();  // entropy term -sum log ldiag
  return g;
}

SvbReport svb_maximize(const SvbProblem& p, GaussianFieldPosterior& q,
                       const SvbOptions& opts) {
  check_problem(p);
  if (q.size() != p.size()) {
    throw std::invalid_argument("svb_maximize: posterior size mismatch");
  }
  const Eigen::Index T = p.size();

  // The objective is jointly concave in (mean, precision). Each step moves
  // toward the blockwise optimum: an exact Newton step on the mean (its
  // Hessian is the tridiagonal Q0 + diag data curvature) and the fixed-point
  // target for the precision, damped by a shared backtracking line search.
  // The segment stays inside the SPD cone, so positivity cannot break.
  SvbReport report;
  double f = svb_objective(p, q.mean, q.omega, q.cov);

  for (int it = 0; it < opts.max_steps; ++it) {
    const SvbGradient g = svb_gradient(p, q.mean, q.omega, q.cov);
    report.grad_norm = g.inf_norm();
    if (report.grad_norm < opts.grad_tol) {
      report.converged = true;
      break;
    }

    Eigen::VectorXd curvature = Eigen::VectorXd::Zero(T);
    for (Eigen::Index j = 0; j < T - 1; ++j) {
      const double hv = 0.5 * q.cov.inv_diag[j];
      curvature[j] = 0.5 * (p.pos[j] * std::exp(q.mean[j] + hv) +
                            p.neg[j] * std::exp(-q.mean[j] + hv));
    }
    SymTridiagonal target = p.prior_prec;
    target.add_diagonal(curvature);
    const Eigen::VectorXd newton_dm = thomas_solve(target, g.mean);
    const SymTridiagonal current = q.omega.reconstruct();

    bool accepted = false;
    double step = 1.0;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      GaussianFieldPosterior trial;
      trial.mean = q.mean + step * newton_dm;
      SymTridiagonal blend = current.scaled(1.0 - step);
      blend += target.scaled(step);
      trial.omega = cholesky_banded(blend);
      trial.refresh_cov();
      const double f_trial = svb_objective(p, trial.mean, trial.omega, trial.cov);
      if (f_trial > f) {
        q = std::move(trial);
        f = f_trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++report.steps;
    if (!accepted) {
      break;  // objective is flat at line-search resolution
    }
  }
  report.objective = f;
  return report;
}

}  // namespace gpda
