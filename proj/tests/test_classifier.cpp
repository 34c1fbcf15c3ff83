#include <doctest.h>

#include "gpda/classifier.hpp"
#include "gpda/metrics.hpp"
#include "gpda/simulate.hpp"
#include "gpda/special.hpp"
#include "gpda/vi_engine.hpp"
#include "support/fixtures.hpp"

using namespace gpda;

namespace {

// State with the two class slots forced identical.
ModelState symmetric_model(testing::Instance& inst, Eigen::Index n0,
                           Eigen::Index n1) {
  ModelState m = inst.state;
  m.mean_fields[kClass0] = m.mean_fields[kClass1];
  m.noise[kClass0] = m.noise[kClass1];
  m.mean_scales[kClass0] = m.mean_scales[kClass1];
  m.mean_ls_fields[kClass0] = m.mean_ls_fields[kClass1];
  m.n0 = n0;
  m.n1 = n1;
  return m;
}

ModelState swap_classes(const ModelState& m) {
  ModelState s = m;
  std::swap(s.mean_fields[kClass0], s.mean_fields[kClass1]);
  std::swap(s.noise[kClass0], s.noise[kClass1]);
  std::swap(s.mean_scales[kClass0], s.mean_scales[kClass1]);
  std::swap(s.mean_ls_fields[kClass0], s.mean_ls_fields[kClass1]);
  std::swap(s.n0, s.n1);
  return s;
}

}  // namespace

TEST_CASE("identical classes reduce to the prior odds") {
  auto inst = testing::make_instance(10, 6, 61);
  const ModelState m = symmetric_model(inst, 30, 70);
  const Eigen::VectorXd x = inst.data.X.row(0).transpose();
  const Prediction p = predict(x, m, inst.hyper);
  CHECK(p.xi1 == doctest::Approx(expit(std::log(70.0 / 30.0))).epsilon(1e-12));
  CHECK(std::abs(p.qda_score) < 1e-12);

  const ModelState balanced = symmetric_model(inst, 50, 50);
  const Prediction pb = predict(x, balanced, inst.hyper);
  CHECK(pb.xi1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(pb.predicted_label == 1);  // ties go to class 1
}

TEST_CASE("qda score hand instance and gating") {
  auto inst = testing::make_instance(2, 4, 62);
  ModelState m = inst.state;
  m.selection << 1.0, 0.5;
  m.mean_fields[kClass1].mean << 1.0, 0.0;
  m.mean_fields[kClass0].mean << -1.0, 0.5;
  m.noise[kClass1].shape << 2.0, 3.0;
  m.noise[kClass1].rate << 1.0, 1.0;  // E 1/sigma^2 = (2, 3)
  m.noise[kClass0].shape << 4.0, 2.0;
  m.noise[kClass0].rate << 2.0, 1.0;  // E 1/sigma^2 = (2, 2)
  Eigen::VectorXd x(2), z(2);
  x << 0.5, 1.0;
  z << 0.25, -0.5;

  const double r1a = 0.5 - 1.0 - 0.25, r1b = 1.0 - 0.0 + 0.5;
  const double r0a = 0.5 + 1.0 - 0.25, r0b = 1.0 - 0.5 + 0.5;
  const double expect = 1.0 * (2.0 * r1a * r1a - 2.0 * r0a * r0a) +
                        0.5 * (3.0 * r1b * r1b - 2.0 * r0b * r0b);
  CHECK(qda_score(x, m, z) == doctest::Approx(expect).epsilon(1e-12));

  m.selection.setZero();
  CHECK(qda_score(x, m, z) == doctest::Approx(0.0));
}

TEST_CASE("relabeling the classes flips the probability") {
  auto inst = testing::make_instance(12, 8, 63, 3);
  ModelState m = inst.state;
  m.n0 = 3;
  m.n1 = 5;
  const Eigen::VectorXd x = inst.data.X.row(1).transpose();
  const Prediction p = predict(x, m, inst.hyper);
  const Prediction q = predict(x, swap_classes(m), inst.hyper);
  CHECK(std::abs(p.xi1 - (1.0 - q.xi1)) < 1e-10);
  CHECK(std::abs(p.qda_score + q.qda_score) < 1e-10 * (1.0 + std::abs(p.qda_score)));
}

TEST_CASE("moving toward the class-1 mean never lowers the probability") {
  auto inst = testing::make_instance(15, 8, 64, 3);
  const ModelState& m = inst.state;
  const Eigen::VectorXd x0 = inst.data.X.row(0).transpose();
  double prev = -1.0;
  for (int step = 0; step <= 10; ++step) {
    const double t = step / 10.0;
    Eigen::VectorXd x = x0;
    for (Eigen::Index j = 0; j < m.T(); ++j) {
      if (m.selection[j] > 0.5) {
        x[j] = (1.0 - t) * x0[j] + t * m.mean_fields[kClass1].mean[j];
      }
    }
    const Prediction p = predict(x, m, inst.hyper);
    CHECK(p.xi1 >= prev - 1e-12);
    prev = p.xi1;
  }
}

TEST_CASE("new-observation perturbation step mirrors the training one") {
  auto inst = testing::make_instance(12, 5, 65, 3);
  // A latent posterior standing in for the new observation.
  const GaussianFieldPosterior q_z = inst.state.latents[2];
  const double z_new =
      map_update_zeta_new(inst.state, inst.hyper, q_z, 0.0);
  map_update_perturbation(inst.state, inst.hyper, 2);
  CHECK(std::abs(z_new - inst.state.perturbations[2]) < 1e-8);
}

TEST_CASE("separable synthetic data classifies below ten percent error") {
  SimConfig cfg;
  cfg.setting = 2;
  cfg.T = 500;
  cfg.n = 600;
  cfg.signal_fraction = 0.08;
  cfg.signal_strength = 3.0;
  cfg.signal_var_ratio = 1.5;
  cfg.noise_sd = 0.5;
  cfg.tau_star = 1.5;
  cfg.seed = 4242 + 5000;
  const auto [all, truth] = generate_dataset(cfg);
  FunctionalDataset train, test;
  train.grid = test.grid = all.grid;
  train.X = all.X.topRows(100);
  train.y = all.y.head(100);
  test.X = all.X.bottomRows(500);
  test.y = all.y.tail(500);

  const Hyperparams hyper = Hyperparams{}.resolved_for(train.grid);
  FitOptions opts;
  opts.max_sweeps = 60;
  opts.tol = 1e-4;
  opts.record_elbo = false;
  opts.threads = 4;
  const ModelState state = fit(train, hyper, opts);

  Eigen::VectorXi pred(test.n());
  for (Eigen::Index i = 0; i < test.n(); ++i) {
    pred[i] = predict(test.X.row(i).transpose(), state, hyper).predicted_label;
  }
  CHECK(classification_metrics(pred, test.y).error_rate < 0.10);
}

TEST_CASE("predict validates its inputs") {
  auto inst = testing::make_instance(6, 4, 66);
  ModelState unfitted = inst.state;
  unfitted.n1 = 0;
  CHECK_THROWS_AS(
      predict(inst.data.X.row(0).transpose(), unfitted, inst.hyper),
      std::invalid_argument);
  CHECK_THROWS_AS(predict(Eigen::VectorXd::Zero(5), inst.state, inst.hyper),
                  std::invalid_argument);
}

TEST_CASE("the alternation settles on a fitted model") {
  auto inst = testing::make_instance(30, 10, 67, 0);
  FitOptions opts;
  opts.max_sweeps = 150;
  opts.tol = 1e-5;
  opts.record_elbo = false;
  const ModelState model = fit(inst.data, inst.hyper, opts);
  const Eigen::VectorXd x = inst.data.X.row(0).transpose();
  const Prediction p = predict(x, model, inst.hyper);
  CHECK(p.xi1 >= 0.0);
  CHECK(p.xi1 <= 1.0);
  // The returned probability is stable against a much longer budget.
  PredictOptions longer;
  longer.max_rounds = 400;
  const Prediction q = predict(x, model, inst.hyper, longer);
  CHECK(std::abs(p.xi1 - q.xi1) < 1e-3);
  CHECK(p.predicted_label == q.predicted_label);
}
