#pragma once

#include <cstdint>

#include "fpmd/net.hpp"

namespace fpmd {

struct AdamConfig {
  float lr = 3e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// Adam accumulators shaped like the parameters they update.
struct OptState {
  MlpGrads m;
  MlpGrads v;
  std::int64_t step = 0;    // completed updates
  std::int64_t skipped = 0; // updates dropped because of non-finite gradients
  AdamConfig cfg;
};

OptState make_opt_state(const MlpParams& params, AdamConfig cfg);

/// Standard bias-corrected Adam update, in place. Returns false and leaves
/// state and params untouched when the gradients contain non-finite entries
/// (the skip is counted in state.skipped).
bool adam_step(OptState& state, MlpParams& params, const MlpGrads& grads);

}  // namespace fpmd
