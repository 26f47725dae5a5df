#include "fpmd/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fpmd/rng.hpp"

namespace fpmd {

namespace {

constexpr float kPi = 3.14159265358979323846f;

const EnvSpec kPointmass{"pointmass2d", 2, 2, {{-1, 1}, {-1, 1}}, 100, 0.95f};
const EnvSpec kPendulum{"pendulum", 2, 1, {{-2, 2}}, 200, 0.98f};
const EnvSpec kTwogoal{"twogoal", 2, 2, {{-1, 1}, {-1, 1}}, 100, 0.95f};

float wrap_angle(float x) { return std::remainderf(x, 2.0f * kPi); }

Vector pointmass_goal() {
  Vector g(2);
  g << 0.8f, 0.8f;
  return g;
}

StepResult pointmass_like_step(const EnvSpec& spec, const EnvState& state, const Vector& a,
                               bool two_goals) {
  StepResult out;
  out.next.s = (state.s + 0.1f * a).cwiseMax(-1.0f).cwiseMin(1.0f);
  out.next.step_index = state.step_index + 1;
  const Vector g = pointmass_goal();
  float dist = (out.next.s - g).norm();
  if (two_goals) dist = std::min(dist, (out.next.s + g).norm());
  out.reward = -dist;
  out.done = out.next.step_index >= spec.horizon ? DoneFlag::Truncated : DoneFlag::None;
  return out;
}

StepResult pendulum_step(const EnvSpec& spec, const EnvState& state, const Vector& a) {
  // Explicit Euler on theta'' = 3g/(2l) sin(theta) + 3/(m l^2) u with
  // g=10, m=1, l=1, dt=0.05; theta=0 is upright.
  constexpr float g = 10.0f, m = 1.0f, l = 1.0f, dt = 0.05f;
  const float theta = state.s(0);
  const float theta_dot = state.s(1);
  const float u = std::clamp(a(0), -2.0f, 2.0f);
  const float accel = 3.0f * g / (2.0f * l) * std::sin(theta) + 3.0f / (m * l * l) * u;

  StepResult out;
  out.next.s.resize(2);
  out.next.s(0) = wrap_angle(theta + dt * theta_dot);
  out.next.s(1) = std::clamp(theta_dot + dt * accel, -8.0f, 8.0f);
  out.next.step_index = state.step_index + 1;
  const float wt = wrap_angle(out.next.s(0));
  out.reward = -(wt * wt + 0.1f * out.next.s(1) * out.next.s(1) + 0.001f * u * u);
  out.done = out.next.step_index >= spec.horizon ? DoneFlag::Truncated : DoneFlag::None;
  return out;
}

}  // namespace

const EnvSpec& env_spec(const std::string& id) {
  if (id == "pointmass2d") return kPointmass;
  if (id == "pendulum") return kPendulum;
  if (id == "twogoal") return kTwogoal;
  throw std::invalid_argument("unknown environment id: " + id);
}

std::vector<std::string> env_ids() { return {"pointmass2d", "pendulum", "twogoal"}; }

EnvState env_reset(const std::string& id, std::uint64_t seed) {
  const EnvSpec& spec = env_spec(id);
  Rng rng(derive_seed(seed, 0x5eedf00d));
  EnvState st;
  st.s.resize(spec.state_dim);
  st.step_index = 0;
  if (id == "pendulum") {
    st.s(0) = rng.uniform(-kPi, kPi);
    st.s(1) = rng.uniform(-1.0f, 1.0f);
  } else {
    st.s(0) = rng.uniform(-1.0f, 1.0f);
    st.s(1) = rng.uniform(-1.0f, 1.0f);
  }
  return st;
}

StepResult env_step(const std::string& id, const EnvState& state, const Vector& action) {
  const EnvSpec& spec = env_spec(id);
  if (action.size() != spec.action_dim)
    throw std::invalid_argument("env_step: action dimension mismatch");
  if (!action.allFinite()) throw std::invalid_argument("env_step: non-finite action");
  if (state.s.size() != spec.state_dim)
    throw std::invalid_argument("env_step: state dimension mismatch");
  const Vector a = clip_to_bounds(action, spec.action_bounds);

  if (id == "pointmass2d") return pointmass_like_step(spec, state, a, false);
  if (id == "twogoal") return pointmass_like_step(spec, state, a, true);
  return pendulum_step(spec, state, a);
}

double oracle_return(const std::string& id) {
  if (id != "pointmass2d")
    throw std::invalid_argument("oracle_return: no tractable reference policy for " + id);
  const EnvSpec& spec = env_spec(id);
  const Vector g = pointmass_goal();

  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    EnvState st = env_reset(id, seed);
    double ep = 0.0;
    for (int t = 0; t < spec.horizon; ++t) {
      const Vector d = g - st.s;
      const float dist = d.norm();
      Vector a = Vector::Zero(2);
      if (dist > 1e-9f) a = dist > 0.1f ? Vector(d / dist) : Vector(d / 0.1f);
      StepResult r = env_step(id, st, a);
      ep += r.reward;
      st = r.next;
    }
    total += ep;
  }
  return total / 1000.0;
}

}  // namespace fpmd
