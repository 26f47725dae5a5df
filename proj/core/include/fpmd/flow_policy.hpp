#pragma once

#include <cstdint>
#include <vector>

#include "fpmd/net.hpp"
#include "fpmd/rng.hpp"
#include "fpmd/types.hpp"

namespace fpmd {

/// Conditional velocity field v(a_t, t | s) plus the Gaussian prior it
/// transports. Network input rows are [s | a_t | time-embedding(t)].
struct FlowPolicy {
  MlpParams net;
  Vector prior_mu;
  Vector prior_sigma;
  int state_dim = 0;
  int action_dim = 0;
};

FlowPolicy make_flow_policy(int state_dim, int action_dim, const std::vector<Eigen::Index>& hidden,
                            std::uint64_t seed, float prior_mu = 0.0f, float prior_sigma = 1.0f);

/// Throws if t is outside [0, 1].
Vector velocity(const FlowPolicy& p, const Vector& s, const Vector& a, float t);

/// Batched evaluation, one shared t (left) or one t per row (right).
/// `nfe` counts network forward passes when provided.
Batch velocity_batch(const FlowPolicy& p, const Batch& s, const Batch& a, float t,
                     long* nfe = nullptr);
Batch velocity_batch(const FlowPolicy& p, const Batch& s, const Batch& a, const Vector& t,
                     long* nfe = nullptr);

/// K explicit-Euler steps of da/dt = v(a, t | s) from a0 at t=0 to t=1.
/// With `trajectory` set, records the K+1 points including a0. Non-finite
/// intermediates throw with the failing step index.
Vector euler_sample(const FlowPolicy& p, const Vector& s, const Vector& a0, int k,
                    std::vector<Vector>* trajectory = nullptr, long* nfe = nullptr);
Batch euler_sample_batch(const FlowPolicy& p, const Batch& s, const Batch& a0, int k,
                         long* nfe = nullptr);

/// Draws a0 from the prior, integrates K steps, clips to bounds.
Vector sample_action(const FlowPolicy& p, const Vector& s, int k, Rng& rng,
                     const std::vector<std::pair<float, float>>& bounds, long* nfe = nullptr);

Batch sample_prior(const FlowPolicy& p, Eigen::Index n, Rng& rng);

struct FlowBatch {
  Batch s;
  Batch a1;  // targets drawn from the previous policy iterate
  Batch a0;  // fresh prior draws
  Vector t;  // one interpolation time per row
};

struct PolicyLoss {
  float loss = 0.0f;
  MlpGrads grads;
  float mean_weight = 1.0f;
};

/// Importance-weighted conditional flow-matching loss
///   mean_i w_i || (a1_i - a0_i) - v(a_t_i, t_i | s_i) ||^2,
/// a_t = t a1 + (1-t) a0, w = exp_q_weights(q, lambda). q holds the
/// pessimistic critic values at (s_i, a1_i); with q identically zero the
/// weights are all one and this is the plain flow-matching loss.
/// Gradients flow only into the velocity network.
PolicyLoss fpmd_loss(const FlowPolicy& p, const FlowBatch& batch, const Vector& q, double lambda);

/// Input rows [s | a | emb(t)] shared by the loss and samplers.
Batch flow_net_input(const FlowPolicy& p, const Batch& s, const Batch& a, const Vector& t);

}  // namespace fpmd
