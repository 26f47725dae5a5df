#include "fpmd/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace fpmd {

OptState make_opt_state(const MlpParams& params, AdamConfig cfg) {
  OptState s;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  s.cfg = cfg;
  return s;
}

bool adam_step(OptState& state, MlpParams& params, const MlpGrads& grads) {
  if (grads.weight.size() != params.layers.size())
    throw std::invalid_argument("adam_step: gradient layer count mismatch");
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    if (grads.weight[i].rows() != params.layers[i].weight.rows() ||
        grads.weight[i].cols() != params.layers[i].weight.cols() ||
        grads.bias[i].size() != params.layers[i].bias.size())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
  }

  if (!all_finite(grads)) {
    ++state.skipped;
    return false;
  }

  const auto& c = state.cfg;
  const float t = static_cast<float>(state.step + 1);
  const float corr1 = 1.0f - std::pow(c.beta1, t);
  const float corr2 = 1.0f - std::pow(c.beta2, t);

  auto update = [&](auto& m, auto& v, auto& w, const auto& g) {
    m = c.beta1 * m + (1.0f - c.beta1) * g;
    v = (c.beta2 * v.array() + (1.0f - c.beta2) * g.array().square()).matrix();
    w.array() -= c.lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + c.eps);
  };

  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(state.m.weight[i], state.v.weight[i], params.layers[i].weight, grads.weight[i]);
    update(state.m.bias[i], state.v.bias[i], params.layers[i].bias, grads.bias[i]);
  }
  ++state.step;
  return true;
}

}  // namespace fpmd
