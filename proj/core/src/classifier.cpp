#include "gpda/classifier.hpp"

#include <cmath>

#include "gpda/special.hpp"
#include "gpda/vi_engine.hpp"

namespace gpda {

double qda_score(const Eigen::VectorXd& x_new, const ModelState& model,
                 const Eigen::VectorXd& z_mean) {
  if (x_new.size() != model.T() || z_mean.size() != model.T()) {
    throw std::invalid_argument("qda_score: length mismatch");
  }
  const Eigen::VectorXd einv1 = model.noise[kClass1].mean_inverse();
  const Eigen::VectorXd einv0 = model.noise[kClass0].mean_inverse();
  const Eigen::VectorXd r1 = x_new - model.mean_fields[kClass1].mean - z_mean;
  const Eigen::VectorXd r0 = x_new - model.mean_fields[kClass0].mean - z_mean;
  double score = 0.0;
  for (Eigen::Index j = 0; j < model.T(); ++j) {
    score += model.selection[j] *
             (einv1[j] * r1[j] * r1[j] - einv0[j] * r0[j] * r0[j]);
  }
  return score;
}

double map_update_zeta_new(const ModelState& model, const Hyperparams& hyper,
                           const GaussianFieldPosterior& q_z_new,
                           double init) {
  const Eigen::Index T = model.T();
  const TraceCoefficients tc = trace_coefficients(
      q_z_new.second_moment_diag(), q_z_new.second_moment_off(), model.grid);
  double P = 0.0, N = 0.0;
  for (Eigen::Index j = 0; j < T - 1; ++j) {
    const double half_var = 0.5 * model.common_ls.cov.inv_diag[j];
    P += tc.pos[j] * std::exp(model.common_ls.mean[j] + half_var);
    N += tc.neg[j] * std::exp(-model.common_ls.mean[j] + half_var);
  }
  return detail::maximize_perturbation_objective(
      0.5 * static_cast<double>(T - 1), model.latent_scale.mean_inverse(), P,
      N, hyper.zeta_variance, init);
}

Prediction predict(const Eigen::VectorXd& x_new, const ModelState& model,
                   const Hyperparams& hyper, const PredictOptions& opts) {
  const Eigen::Index T = model.T();
  if (model.n0 < 1 || model.n1 < 1) {
    throw std::invalid_argument("predict: model lacks fitted class counts");
  }
  if (x_new.size() != T) {
    throw std::invalid_argument("predict: observation length " +
                                std::to_string(x_new.size()) +
                                " does not match model T " +
                                std::to_string(T));
  }

  const Eigen::VectorXd& w = model.selection;
  const Eigen::VectorXd one_minus_w = Eigen::VectorXd::Ones(T) - w;
  std::array<Eigen::VectorXd, 3> einv, elog;
  for (int k : kAllSlots) {
    einv[k] = model.noise[k].mean_inverse();
    elog[k] = model.noise[k].mean_log();
  }
  const double log_prior_odds = std::log(static_cast<double>(model.n1) /
                                         static_cast<double>(model.n0));
  const double tau_moment = model.latent_scale.mean_inverse();

  Prediction pred;
  pred.xi1 = static_cast<double>(model.n1) /
             static_cast<double>(model.n0 + model.n1);
  pred.zeta_new = 0.0;

  GaussianFieldPosterior q_z;
  for (int round = 0; round < opts.max_rounds; ++round) {
    // (a) latent process under the current class belief and perturbation
    const Eigen::VectorXd class_mix =
        pred.xi1 * einv[kClass1] + (1.0 - pred.xi1) * einv[kClass0];
    SymTridiagonal Q = expected_unit_precision(model.common_ls.moments(),
                                               pred.zeta_new, model.grid)
                           .scaled(tau_moment);
    Q.add_diagonal(w.cwiseProduct(class_mix) +
                   one_minus_w.cwiseProduct(einv[kShared]));
    const Eigen::VectorXd rhs =
        w.cwiseProduct(pred.xi1 * einv[kClass1].cwiseProduct(
                                      x_new - model.mean_fields[kClass1].mean) +
                       (1.0 - pred.xi1) *
                           einv[kClass0].cwiseProduct(
                               x_new - model.mean_fields[kClass0].mean)) +
        one_minus_w.cwiseProduct(einv[kShared].cwiseProduct(
            x_new - model.mean_fields[kShared].mean));
    q_z.mean = thomas_solve(Q, rhs);
    q_z.set_precision(Q);

    // (b) perturbation
    pred.zeta_new = map_update_zeta_new(model, hyper, q_z, pred.zeta_new);

    // (c) class probability
    pred.qda_score = qda_score(x_new, model, q_z.mean);
    double trace1 = 0.0, trace0 = 0.0;
    for (Eigen::Index j = 0; j < T; ++j) {
      const double shared_var = model.mean_fields[kClass1].cov.inv_diag[j];
      const double shared_var0 = model.mean_fields[kClass0].cov.inv_diag[j];
      trace1 += w[j] * einv[kClass1][j] * (shared_var + q_z.cov.inv_diag[j]);
      trace0 += w[j] * einv[kClass0][j] * (shared_var0 + q_z.cov.inv_diag[j]);
    }
    double log_var_contrast = 0.0;
    for (Eigen::Index j = 0; j < T; ++j) {
      log_var_contrast += w[j] * (elog[kClass1][j] - elog[kClass0][j]);
    }
    const double xi_new =
        expit(-0.5 * log_var_contrast - 0.5 * pred.qda_score - 0.5 * trace1 +
              0.5 * trace0 + log_prior_odds);

    pred.rounds = round + 1;
    const double change = std::abs(xi_new - pred.xi1);
    pred.xi1 = xi_new;
    if (change < opts.tol) break;
  }

  pred.z_mean = q_z.mean;
  pred.predicted_label = (pred.xi1 >= opts.threshold) ? 1 : 0;
  return pred;
}

}  // namespace gpda
