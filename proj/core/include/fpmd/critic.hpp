#pragma once

#include <cstdint>
#include <vector>

#include "fpmd/net.hpp"
#include "fpmd/types.hpp"

namespace fpmd {

/// Clipped double Q: two online heads and two slow target copies.
/// Network input rows are [s | a], scalar output.
struct CriticPair {
  MlpParams q1;
  MlpParams q2;
  MlpParams q1_target;
  MlpParams q2_target;
  float tau = 0.005f;
  int state_dim = 0;
  int action_dim = 0;
};

/// Targets start as exact copies of the online heads.
CriticPair make_critic(int state_dim, int action_dim, const std::vector<Eigen::Index>& hidden,
                       std::uint64_t seed, float tau);

float q_value(const CriticPair& c, const Vector& s, const Vector& a, int head, bool target);

/// Column of Q values for one head network.
Vector q_batch(const MlpParams& net, const Batch& s, const Batch& a);

/// Pessimistic value min(Q1, Q2) from the online heads.
Vector q_min_online(const CriticPair& c, const Batch& s, const Batch& a);

struct CriticLossResult {
  float loss = 0.0f;  // sum of the two per-head mean squared errors
  MlpGrads g1;
  MlpGrads g2;
  Vector targets;  // shared bootstrap targets, exposed for inspection
};

/// One-step TD targets y = r + gamma * min_k Q_target_k(s', a') for
/// non-terminated rows, y = r for terminated ones (truncation bootstraps).
/// Targets are constants: no gradient reaches the target networks or a'.
CriticLossResult critic_loss(const CriticPair& c, const TransitionBatch& batch,
                             const Batch& a_next, float gamma);

/// target <- tau * online + (1 - tau) * target, elementwise.
void polyak_update(CriticPair& c, float tau);

}  // namespace fpmd
