#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpmd/types.hpp"

namespace fpmd {

struct EnvSpec {
  std::string id;
  int state_dim = 0;
  int action_dim = 0;
  std::vector<std::pair<float, float>> action_bounds;  // per dimension
  int horizon = 0;
  float gamma = 0.99f;
};

struct EnvState {
  Vector s;
  int step_index = 0;
};

struct StepResult {
  EnvState next;
  float reward = 0.0f;
  DoneFlag done = DoneFlag::None;
};

/// Registered ids: pointmass2d, pendulum, twogoal. Unknown ids throw.
const EnvSpec& env_spec(const std::string& id);
std::vector<std::string> env_ids();

/// Deterministic given (id, seed); step index starts at 0.
EnvState env_reset(const std::string& id, std::uint64_t seed);

/// Pure function of (state, action). Out-of-range action components are
/// clipped to the spec bounds before the dynamics apply.
StepResult env_step(const std::string& id, const EnvState& state, const Vector& action);

/// Mean undiscounted return of the straight-to-goal reference policy over
/// reset seeds 0..999. Only pointmass2d has a tractable reference.
double oracle_return(const std::string& id);

}  // namespace fpmd
