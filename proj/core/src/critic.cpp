#include "fpmd/critic.hpp"

#include <stdexcept>

namespace fpmd {

CriticPair make_critic(int state_dim, int action_dim, const std::vector<Eigen::Index>& hidden,
                       std::uint64_t seed, float tau) {
  if (!(tau > 0.0f && tau <= 1.0f)) throw std::invalid_argument("make_critic: tau outside (0, 1]");
  CriticPair c;
  c.state_dim = state_dim;
  c.action_dim = action_dim;
  c.tau = tau;
  c.q1 = make_mlp(state_dim + action_dim, hidden, 1, Activation::Tanh, seed, 0.01f);
  c.q2 = make_mlp(state_dim + action_dim, hidden, 1, Activation::Tanh, seed + 1, 0.01f);
  c.q1_target = c.q1;
  c.q2_target = c.q2;
  return c;
}

namespace {

Batch critic_input(int state_dim, int action_dim, const Batch& s, const Batch& a) {
  if (s.rows() != a.rows()) throw std::invalid_argument("critic: row count mismatch");
  if (s.cols() != state_dim || a.cols() != action_dim)
    throw std::invalid_argument("critic: column count mismatch");
  Batch x(s.rows(), state_dim + action_dim);
  x << s, a;
  return x;
}

}  // namespace

float q_value(const CriticPair& c, const Vector& s, const Vector& a, int head, bool target) {
  if (head != 1 && head != 2) throw std::invalid_argument("q_value: head must be 1 or 2");
  const MlpParams& net = head == 1 ? (target ? c.q1_target : c.q1)
                                   : (target ? c.q2_target : c.q2);
  Batch x = critic_input(c.state_dim, c.action_dim, Batch(s.transpose()), Batch(a.transpose()));
  return forward(net, x)(0, 0);
}

Vector q_batch(const MlpParams& net, const Batch& s, const Batch& a) {
  Batch x(s.rows(), s.cols() + a.cols());
  x << s, a;
  return forward(net, x).col(0);
}

Vector q_min_online(const CriticPair& c, const Batch& s, const Batch& a) {
  return q_batch(c.q1, s, a).cwiseMin(q_batch(c.q2, s, a));
}

CriticLossResult critic_loss(const CriticPair& c, const TransitionBatch& batch,
                             const Batch& a_next, float gamma) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw std::invalid_argument("critic_loss: empty batch");
  if (a_next.rows() != n) throw std::invalid_argument("critic_loss: a_next row count mismatch");

  const Vector qt = q_batch(c.q1_target, batch.s_next, a_next)
                        .cwiseMin(q_batch(c.q2_target, batch.s_next, a_next));

  CriticLossResult out;
  out.targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool bootstrap = batch.done[static_cast<std::size_t>(i)] != DoneFlag::Terminated;
    out.targets(i) = batch.r(i) + (bootstrap ? gamma * qt(i) : 0.0f);
  }
  if (!out.targets.allFinite()) throw std::runtime_error("critic_loss: non-finite target");

  const Batch x = critic_input(c.state_dim, c.action_dim, batch.s, batch.a);
  const float inv_n = 1.0f / static_cast<float>(n);
  float loss = 0.0f;
  auto head = [&](const MlpParams& net, MlpGrads& g) {
    const Vector q = forward(net, x).col(0);
    const Vector err = q - out.targets;
    loss += inv_n * err.squaredNorm();
    g = grad(net, x, Batch(2.0f * inv_n * err));
  };
  head(c.q1, out.g1);
  head(c.q2, out.g2);
  out.loss = loss;
  return out;
}

void polyak_update(CriticPair& c, float tau) {
  if (!(tau >= 0.0f && tau <= 1.0f))
    throw std::invalid_argument("polyak_update: tau outside [0, 1]");
  auto blend = [tau](MlpParams& target, const MlpParams& online) {
    for (std::size_t i = 0; i < target.layers.size(); ++i) {
      target.layers[i].weight =
          tau * online.layers[i].weight + (1.0f - tau) * target.layers[i].weight;
      target.layers[i].bias = tau * online.layers[i].bias + (1.0f - tau) * target.layers[i].bias;
    }
  };
  blend(c.q1_target, c.q1);
  blend(c.q2_target, c.q2);
}

}  // namespace fpmd
