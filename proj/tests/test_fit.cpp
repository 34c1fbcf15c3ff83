#include <doctest.h>

#include "gpda/metrics.hpp"
#include "gpda/simulate.hpp"
#include "gpda/vi_engine.hpp"
#include "support/fixtures.hpp"

using namespace gpda;

TEST_CASE("pure-CAVI fit keeps a non-decreasing objective trace") {
  auto inst = testing::make_instance(20, 8, 51, 0);
  FitOptions opts;
  opts.pure_cavi = true;
  opts.max_sweeps = 20;
  opts.tol = 1e-12;
  FitReport report;
  const ModelState state = fit(inst.data, inst.hyper, opts, &report);
  REQUIRE(state.elbo_trace.size() >= 2);
  for (std::size_t s = 1; s < state.elbo_trace.size(); ++s) {
    CHECK(state.elbo_trace[s] >= state.elbo_trace[s - 1] - 1e-8);
  }
}

TEST_CASE("fit is equivariant under observation order") {
  auto inst = testing::make_instance(12, 6, 52, 0);
  FitOptions opts;
  opts.max_sweeps = 5;
  opts.tol = 1e-12;
  opts.record_elbo = false;
  const ModelState a = fit(inst.data, inst.hyper, opts);

  // Reverse the rows.
  FunctionalDataset flipped;
  flipped.grid = inst.data.grid;
  flipped.X = inst.data.X.colwise().reverse();
  flipped.y = inst.data.y.reverse();
  const ModelState b = fit(flipped, inst.hyper, opts);

  CHECK((a.selection - b.selection).cwiseAbs().maxCoeff() < 1e-10);
  for (int k : kAllSlots) {
    CHECK((a.mean_fields[k].mean - b.mean_fields[k].mean)
              .cwiseAbs()
              .maxCoeff() < 1e-10);
    CHECK((a.mean_ls_fields[k].mean - b.mean_ls_fields[k].mean)
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
  CHECK((a.common_ls.mean - b.common_ls.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(a.latent_scale.rate ==
        doctest::Approx(b.latent_scale.rate).epsilon(1e-10));
  // Per-observation quantities follow the permutation.
  CHECK((a.perturbations.reverse() - b.perturbations).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("fit results do not depend on the worker count") {
  auto inst = testing::make_instance(15, 7, 53, 0);
  FitOptions opts;
  opts.max_sweeps = 6;
  opts.record_elbo = false;
  opts.threads = 1;
  const ModelState a = fit(inst.data, inst.hyper, opts);
  opts.threads = 8;
  const ModelState b = fit(inst.data, inst.hyper, opts);

  CHECK(a.selection == b.selection);  // bitwise
  for (int k : kAllSlots) {
    CHECK(a.mean_fields[k].mean == b.mean_fields[k].mean);
    CHECK(a.noise[k].rate == b.noise[k].rate);
  }
  for (Eigen::Index i = 0; i < inst.data.n(); ++i) {
    CHECK(a.latents[i].mean == b.latents[i].mean);
  }
  CHECK(a.perturbations == b.perturbations);
}

TEST_CASE("convergence flag reflects the stopping rule") {
  auto inst = testing::make_instance(10, 4, 54, 0);
  FitOptions tight;
  tight.max_sweeps = 1;
  tight.tol = 1e-14;
  FitReport r1;
  CHECK_FALSE(fit(inst.data, inst.hyper, tight, &r1).converged);
  CHECK(r1.sweeps == 1);

  FitOptions loose;
  loose.max_sweeps = 80;
  loose.tol = 1e-3;
  FitReport r2;
  CHECK(fit(inst.data, inst.hyper, loose, &r2).converged);
}

TEST_CASE("with no data the factors sit at their priors") {
  const Eigen::Index T = 8;
  FunctionalDataset empty;
  empty.grid = GridSpec(T, 0.1);
  empty.X.resize(0, T);
  empty.y.resize(0);
  Hyperparams hyper = Hyperparams{}.resolved_for(empty.grid);

  FitOptions opts;
  opts.allow_empty = true;
  opts.freeze_map = true;
  opts.max_sweeps = 300;
  opts.tol = 1e-10;
  opts.svb_steps = 60;
  opts.record_elbo = false;
  const ModelState state = fit(empty, hyper, opts);

  // Conjugate factors with no data: exactly the priors.
  for (int k : kAllSlots) {
    CHECK(state.noise[k].shape.isApproxToConstant(hyper.noise.shape));
    CHECK(state.noise[k].rate.isApproxToConstant(hyper.noise.rate));
  }
  CHECK(state.latent_scale.shape == hyper.latent_scale.shape);
  CHECK(state.latent_scale.rate == hyper.latent_scale.rate);

  // Gaussian mean fields: zero mean, prior-consistent precision.
  for (int k : kAllSlots) {
    CHECK(state.mean_fields[k].mean.cwiseAbs().maxCoeff() == 0.0);
    const SymTridiagonal EQ =
        expected_unit_precision(state.mean_ls_fields[k].moments(), 0.0,
                                state.grid)
            .scaled(state.mean_scales[k].mean_inverse());
    const SymTridiagonal got = state.mean_fields[k].omega.reconstruct();
    CHECK((got.diag - EQ.diag).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((got.off - EQ.off).cwiseAbs().maxCoeff() < 1e-9);
  }

  // The common field has no observations attached: back to its prior.
  const SymTridiagonal prior_R = stationary_precision(
      state.map.common_scale, state.map.common_length, state.grid);
  CHECK(state.common_ls.mean.cwiseAbs().maxCoeff() < 1e-6);
  const SymTridiagonal R_prec = state.common_ls.omega.reconstruct();
  CHECK((R_prec.diag - prior_R.diag).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((R_prec.off - prior_R.off).cwiseAbs().maxCoeff() < 1e-6);

  // The mean-scale factors settle at the documented hierarchical fixed
  // point: the inverse moment matches the prior, the rate carries the
  // mean-field coupling through the mean fields.
  const double A = hyper.mean_scale.shape, B = hyper.mean_scale.rate;
  for (int k : kAllSlots) {
    CHECK(state.mean_scales[k].mean_inverse() ==
          doctest::Approx(A / B).epsilon(1e-9));
    CHECK(state.mean_scales[k].rate ==
          doctest::Approx(B * (A + 0.5 * T) / A).epsilon(1e-7));
  }
}

TEST_CASE("no-signal data leaves selection sparse") {
  SimConfig cfg;
  cfg.setting = 3;
  cfg.T = 60;
  cfg.n = 24;
  cfg.signal_fraction = 0.0;
  cfg.seed = 99;
  const auto [data, truth] = generate_dataset(cfg);

  FitOptions opts;
  opts.max_sweeps = 40;
  opts.record_elbo = false;
  const ModelState state = fit(data, Hyperparams{}, opts);
  CHECK(state.selection.mean() < 0.2);
}

TEST_CASE("strong localized signal is recovered") {
  SimConfig cfg;
  cfg.setting = 2;
  cfg.T = 100;
  cfg.n = 50;
  cfg.signal_fraction = 0.1;
  cfg.signal_strength = 3.0;
  cfg.noise_sd = 0.4;
  cfg.tau_star = 0.5;
  cfg.seed = 7;
  const auto [data, truth] = generate_dataset(cfg);

  FitOptions opts;
  opts.max_sweeps = 60;
  opts.record_elbo = false;
  const ModelState state = fit(data, Hyperparams{}, opts);

  double on = 0.0, off = 0.0;
  int n_on = 0, n_off = 0;
  for (Eigen::Index j = 0; j < cfg.T; ++j) {
    if (truth.gamma_star[j] == 1) {
      on += state.selection[j];
      ++n_on;
    } else {
      off += state.selection[j];
      ++n_off;
    }
  }
  CHECK(on / n_on > 0.5);
  CHECK(off / n_off < 0.3);
  CHECK(mcc(threshold_selection(state.selection, 0.5), truth.gamma_star) > 0.3);
}
