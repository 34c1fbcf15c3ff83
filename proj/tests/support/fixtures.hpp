// Shared construction of small consistent model instances for update-level
// tests.
#pragma once

#include "gpda/rng.hpp"
#include "gpda/vi_engine.hpp"

namespace gpda::testing {

struct Instance {
  FunctionalDataset data;
  Hyperparams hyper;
  FitOptions opts;
  ModelState state;
};

/// Random dataset with a mild class shift on the middle third of the grid,
/// state initialized and optionally warmed with a few closed-form sweeps.
inline Instance make_instance(Eigen::Index T, Eigen::Index n,
                              std::uint64_t seed, int warm_sweeps = 2,
                              double delta = 0.0) {
  Instance inst;
  Rng rng(seed);
  inst.data.grid = GridSpec(T, delta > 0.0 ? delta : 1.0 / static_cast<double>(T));
  inst.data.X.resize(n, T);
  inst.data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    inst.data.y[i] = (i % 2 == 0) ? 0 : 1;  // both classes guaranteed
    for (Eigen::Index j = 0; j < T; ++j) {
      double v = rng.normal();
      if (inst.data.y[i] == 1 && j >= T / 3 && j < 2 * T / 3) v += 1.0;
      inst.data.X(i, j) = v;
    }
  }
  inst.hyper = Hyperparams{}.resolved_for(inst.data.grid);
  inst.opts.threads = 1;
  inst.state = initialize_state(inst.data, inst.hyper, inst.opts);
  for (int s = 0; s < warm_sweeps; ++s) {
    update_latent_fields(inst.state, inst.data, inst.hyper, 1);
    update_mean_functions(inst.state, inst.data, inst.hyper);
    update_mean_scales(inst.state, inst.hyper);
    update_noise_variances(inst.state, inst.data, inst.hyper);
    update_selection(inst.state, inst.data, inst.hyper);
    update_latent_scale(inst.state, inst.hyper);
  }
  return inst;
}

}  // namespace gpda::testing
