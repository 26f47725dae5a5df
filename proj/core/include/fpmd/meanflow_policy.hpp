#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fpmd/adam.hpp"
#include "fpmd/flow_policy.hpp"
#include "fpmd/net.hpp"
#include "fpmd/rng.hpp"
#include "fpmd/types.hpp"

namespace fpmd {

/// Which interpolant the average-velocity net is trained at.
///
/// PaperLiteral regresses u at a_t (the point at the later time t) with
/// tangent (v, 0, 1) and still samples a1 = a0 + u(a0, 0, 1 | s).
/// ForwardFromR regresses u at a_r (the point the one-step rule actually
/// evaluates) with tangent (v, 1, 0); the matching differential identity is
///   u = v(a_r, r) + (t - r)(v da/du + d/dr u),
/// with a plus sign, since d/dr of (t - r) u(a_r, r, t) along the flow
/// equals -v(a_r, r).
enum class MeanFlowConvention { PaperLiteral, ForwardFromR };

const char* to_string(MeanFlowConvention c);
MeanFlowConvention meanflow_convention_from_string(const std::string& s);

/// Average-velocity field u(a, r, t | s). Network input rows are
/// [s | a | time-embedding(r) | time-embedding(t)].
struct MeanFlowPolicy {
  MlpParams net;
  Vector prior_mu;
  Vector prior_sigma;
  int state_dim = 0;
  int action_dim = 0;
};

MeanFlowPolicy make_meanflow_policy(int state_dim, int action_dim,
                                    const std::vector<Eigen::Index>& hidden, std::uint64_t seed,
                                    float prior_mu = 0.0f, float prior_sigma = 1.0f);

/// (r, t) sampling distribution: two independent uniforms, ordered.
/// p_r_neq_t is the probability of drawing distinct endpoints; at 1.0 every
/// draw satisfies r < t.
struct RtSchedule {
  float p_r_neq_t = 1.0f;
};

std::pair<float, float> sample_rt(const RtSchedule& schedule, Rng& rng);

/// Throws unless 0 <= r <= t <= 1.
Vector avg_velocity(const MeanFlowPolicy& p, const Vector& s, const Vector& a, float r, float t);
Batch avg_velocity_batch(const MeanFlowPolicy& p, const Batch& s, const Batch& a, const Vector& r,
                         const Vector& t, long* nfe = nullptr);

/// Regression target built from one forward-mode pass through `target_net`
/// (the frozen previous iterate): no second-order derivatives anywhere.
/// PaperLiteral:  u_tgt = v_cond - (t - r) * J * (v_cond, 0, emb'(t))
/// ForwardFromR:  u_tgt = v_cond + (t - r) * J * (v_cond, emb'(r), 0)
/// The result is a constant for gradient purposes (stop-gradient).
Batch meanflow_target_batch(const MlpParams& target_net, int state_dim, int action_dim,
                            const Batch& s, const Batch& x, const Vector& r, const Vector& t,
                            const Batch& v_cond,
                            MeanFlowConvention conv = MeanFlowConvention::PaperLiteral);

Vector meanflow_target(const MeanFlowPolicy& p, const Vector& s, const Vector& a_t, float r,
                       float t, const Vector& v_cond,
                       MeanFlowConvention conv = MeanFlowConvention::PaperLiteral);

struct MeanFlowBatch {
  Batch s;
  Batch a1;  // one-step draws from the previous policy iterate
  Batch a0;  // fresh prior draws
  Vector r;
  Vector t;
};

/// Importance-weighted MeanFlow residual loss
///   mean_i w_i || u(x_i, r_i, t_i | s_i) - u_tgt_i ||^2
/// with x the convention's interpolant of (a0, a1) and u_tgt built from
/// `target_net`. Weights as in fpmd_loss; gradients never touch the target
/// branch.
PolicyLoss mpmd_loss(const MeanFlowPolicy& p, const MlpParams& target_net,
                     const MeanFlowBatch& batch, const Vector& q, double lambda,
                     MeanFlowConvention conv = MeanFlowConvention::PaperLiteral);

/// a0 ~ prior, a1 = a0 + u(a0, 0, 1 | s), clipped to bounds.
Vector one_step_sample(const MeanFlowPolicy& p, const Vector& s, Rng& rng,
                       const std::vector<std::pair<float, float>>& bounds, long* nfe = nullptr);
Batch one_step_sample_batch(const MeanFlowPolicy& p, const Batch& s, Rng& rng,
                            long* nfe = nullptr);

Batch sample_prior(const MeanFlowPolicy& p, Eigen::Index n, Rng& rng);

/// Supplies fitting batches: training points x, their times, and the
/// conditional (or analytic) velocity at x.
struct MeanFlowFitBatch {
  Batch s;
  Batch x;
  Batch v_cond;
  Vector r;
  Vector t;
};
using MeanFlowFitSource = std::function<MeanFlowFitBatch(Rng&)>;

/// One approximate application of the MeanFlow operator: freezes the input
/// policy as the target branch, runs n_grad_steps Adam steps on the
/// residual loss (uniform weights), and returns the minimized copy as the
/// next iterate.
MeanFlowPolicy fixed_point_iterate(const MeanFlowPolicy& u, const MeanFlowFitSource& source,
                                   int n_grad_steps, const AdamConfig& adam_cfg, Rng& rng,
                                   MeanFlowConvention conv = MeanFlowConvention::PaperLiteral);

Batch meanflow_net_input(const MeanFlowPolicy& p, const Batch& s, const Batch& a, const Vector& r,
                         const Vector& t);

}  // namespace fpmd
