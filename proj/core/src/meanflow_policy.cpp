#include "fpmd/meanflow_policy.hpp"

#include <cmath>
#include <stdexcept>

#include "fpmd/mirror_weights.hpp"
#include "fpmd/time_embedding.hpp"

namespace fpmd {

const char* to_string(MeanFlowConvention c) {
  return c == MeanFlowConvention::PaperLiteral ? "paper-literal" : "forward-from-r";
}

MeanFlowConvention meanflow_convention_from_string(const std::string& s) {
  if (s == "paper-literal") return MeanFlowConvention::PaperLiteral;
  if (s == "forward-from-r") return MeanFlowConvention::ForwardFromR;
  throw std::invalid_argument("unknown meanflow convention: " + s);
}

MeanFlowPolicy make_meanflow_policy(int state_dim, int action_dim,
                                    const std::vector<Eigen::Index>& hidden, std::uint64_t seed,
                                    float prior_mu, float prior_sigma) {
  if (action_dim < 1 || state_dim < 0)
    throw std::invalid_argument("make_meanflow_policy: bad dimensions");
  if (!(prior_sigma > 0.0f))
    throw std::invalid_argument("make_meanflow_policy: prior sigma <= 0");
  MeanFlowPolicy p;
  p.state_dim = state_dim;
  p.action_dim = action_dim;
  p.net = make_mlp(state_dim + action_dim + 2 * kTimeEmbedDim, hidden, action_dim,
                   Activation::Tanh, seed, 0.01f);
  p.prior_mu = Vector::Constant(action_dim, prior_mu);
  p.prior_sigma = Vector::Constant(action_dim, prior_sigma);
  return p;
}

std::pair<float, float> sample_rt(const RtSchedule& schedule, Rng& rng) {
  if (rng.uniform() >= schedule.p_r_neq_t) {
    const float u = rng.uniform();
    return {u, u};
  }
  float a = rng.uniform();
  float b = rng.uniform();
  while (a == b) b = rng.uniform();  // measure-zero redraw
  return {std::min(a, b), std::max(a, b)};
}

namespace {

void check_rt(float r, float t) {
  if (!(r >= 0.0f && t <= 1.0f && r <= t))
    throw std::invalid_argument("avg_velocity: need 0 <= r <= t <= 1");
}

Batch net_input(int state_dim, int action_dim, const Batch& s, const Batch& a, const Vector& r,
                const Vector& t) {
  const Eigen::Index n = a.rows();
  if (s.rows() != n || r.size() != n || t.size() != n)
    throw std::invalid_argument("meanflow_net_input: row count mismatch");
  if (s.cols() != state_dim || a.cols() != action_dim)
    throw std::invalid_argument("meanflow_net_input: column count mismatch");
  Batch x(n, state_dim + action_dim + 2 * kTimeEmbedDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.block(i, 0, 1, state_dim) = s.row(i);
    x.block(i, state_dim, 1, action_dim) = a.row(i);
    x.block(i, state_dim + action_dim, 1, kTimeEmbedDim) = time_embedding(r(i)).transpose();
    x.block(i, state_dim + action_dim + kTimeEmbedDim, 1, kTimeEmbedDim) =
        time_embedding(t(i)).transpose();
  }
  return x;
}

}  // namespace

Batch meanflow_net_input(const MeanFlowPolicy& p, const Batch& s, const Batch& a, const Vector& r,
                         const Vector& t) {
  return net_input(p.state_dim, p.action_dim, s, a, r, t);
}

Vector avg_velocity(const MeanFlowPolicy& p, const Vector& s, const Vector& a, float r, float t) {
  check_rt(r, t);
  Batch out = avg_velocity_batch(p, Batch(s.transpose()), Batch(a.transpose()),
                                 Vector(Vector::Constant(1, r)), Vector(Vector::Constant(1, t)));
  return out.row(0).transpose();
}

Batch avg_velocity_batch(const MeanFlowPolicy& p, const Batch& s, const Batch& a, const Vector& r,
                         const Vector& t, long* nfe) {
  for (Eigen::Index i = 0; i < r.size(); ++i) check_rt(r(i), t(i));
  if (nfe) ++*nfe;
  return forward(p.net, meanflow_net_input(p, s, a, r, t));
}

Batch meanflow_target_batch(const MlpParams& target_net, int state_dim, int action_dim,
                            const Batch& s, const Batch& x, const Vector& r, const Vector& t,
                            const Batch& v_cond, MeanFlowConvention conv) {
  const Eigen::Index n = x.rows();
  if (v_cond.rows() != n || v_cond.cols() != action_dim)
    throw std::invalid_argument("meanflow_target: v_cond shape mismatch");
  const Batch input = net_input(state_dim, action_dim, s, x, r, t);

  // Input-space tangent: v_cond in the action slot plus the chain-ruled
  // derivative of the moving time embedding.
  Batch tangent = Batch::Zero(n, input.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    tangent.block(i, state_dim, 1, action_dim) = v_cond.row(i);
    if (conv == MeanFlowConvention::PaperLiteral) {
      tangent.block(i, state_dim + action_dim + kTimeEmbedDim, 1, kTimeEmbedDim) =
          time_embedding_dot(t(i)).transpose();
    } else {
      tangent.block(i, state_dim + action_dim, 1, kTimeEmbedDim) =
          time_embedding_dot(r(i)).transpose();
    }
  }

  const auto [value, directional] = jvp(target_net, input, tangent);
  (void)value;
  Batch target(n, action_dim);
  const float sign = conv == MeanFlowConvention::PaperLiteral ? -1.0f : 1.0f;
  for (Eigen::Index i = 0; i < n; ++i)
    target.row(i) = v_cond.row(i) + sign * (t(i) - r(i)) * directional.row(i);
  return stop_gradient(target);
}

Vector meanflow_target(const MeanFlowPolicy& p, const Vector& s, const Vector& a_t, float r,
                       float t, const Vector& v_cond, MeanFlowConvention conv) {
  check_rt(r, t);
  Batch out = meanflow_target_batch(p.net, p.state_dim, p.action_dim, Batch(s.transpose()),
                                    Batch(a_t.transpose()), Vector(Vector::Constant(1, r)),
                                    Vector(Vector::Constant(1, t)), Batch(v_cond.transpose()),
                                    conv);
  return out.row(0).transpose();
}

PolicyLoss mpmd_loss(const MeanFlowPolicy& p, const MlpParams& target_net,
                     const MeanFlowBatch& batch, const Vector& q, double lambda,
                     MeanFlowConvention conv) {
  const Eigen::Index n = batch.a1.rows();
  if (n == 0) throw std::invalid_argument("mpmd_loss: empty batch");
  if (batch.a0.rows() != n || batch.s.rows() != n || batch.r.size() != n ||
      batch.t.size() != n || q.size() != n)
    throw std::invalid_argument("mpmd_loss: batch row counts disagree");
  for (Eigen::Index i = 0; i < n; ++i) check_rt(batch.r(i), batch.t(i));

  const Vector w = exp_q_weights(q, lambda);
  const Batch v_cond = batch.a1 - batch.a0;

  // Training point: interpolant at t (paper-literal) or at r (forward-from-r).
  Batch x(n, p.action_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const float tau = conv == MeanFlowConvention::PaperLiteral ? batch.t(i) : batch.r(i);
    x.row(i) = tau * batch.a1.row(i) + (1.0f - tau) * batch.a0.row(i);
  }

  const Batch u_tgt = meanflow_target_batch(target_net, p.state_dim, p.action_dim, batch.s, x,
                                            batch.r, batch.t, v_cond, conv);

  const Batch input = meanflow_net_input(p, batch.s, x, batch.r, batch.t);
  const Batch u = forward(p.net, input);
  const Batch residual = u - u_tgt;

  PolicyLoss out;
  const float inv_n = 1.0f / static_cast<float>(n);
  out.loss = inv_n * (residual.rowwise().squaredNorm().array() * w.array()).sum();
  out.mean_weight = w.mean();

  Batch upstream = (2.0f * inv_n) * (residual.array().colwise() * w.array()).matrix();
  out.grads = grad(p.net, input, upstream);
  return out;
}

Batch sample_prior(const MeanFlowPolicy& p, Eigen::Index n, Rng& rng) {
  Batch a0(n, p.action_dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < p.action_dim; ++j)
      a0(i, j) = rng.normal(p.prior_mu(j), p.prior_sigma(j));
  return a0;
}

Vector one_step_sample(const MeanFlowPolicy& p, const Vector& s, Rng& rng,
                       const std::vector<std::pair<float, float>>& bounds, long* nfe) {
  Vector a0(p.action_dim);
  for (int j = 0; j < p.action_dim; ++j) a0(j) = rng.normal(p.prior_mu(j), p.prior_sigma(j));
  if (nfe) ++*nfe;
  Vector a1 = a0 + forward(p.net, meanflow_net_input(p, Batch(s.transpose()),
                                                     Batch(a0.transpose()), Vector::Zero(1),
                                                     Vector::Ones(1)))
                       .row(0)
                       .transpose();
  return clip_to_bounds(std::move(a1), bounds);
}

Batch one_step_sample_batch(const MeanFlowPolicy& p, const Batch& s, Rng& rng, long* nfe) {
  const Eigen::Index n = s.rows();
  const Batch a0 = sample_prior(p, n, rng);
  return a0 + avg_velocity_batch(p, s, a0, Vector::Zero(n), Vector::Ones(n), nfe);
}

MeanFlowPolicy fixed_point_iterate(const MeanFlowPolicy& u, const MeanFlowFitSource& source,
                                   int n_grad_steps, const AdamConfig& adam_cfg, Rng& rng,
                                   MeanFlowConvention conv) {
  MeanFlowPolicy next = u;
  const MlpParams frozen = u.net;  // target branch stays at the previous iterate
  OptState opt = make_opt_state(next.net, adam_cfg);
  for (int step = 0; step < n_grad_steps; ++step) {
    const MeanFlowFitBatch b = source(rng);
    const Batch u_tgt = meanflow_target_batch(frozen, next.state_dim, next.action_dim, b.s, b.x,
                                              b.r, b.t, b.v_cond, conv);
    const Batch input = meanflow_net_input(next, b.s, b.x, b.r, b.t);
    const Batch pred = forward(next.net, input);
    const Batch residual = pred - u_tgt;
    const float inv_n = 2.0f / static_cast<float>(residual.rows());
    MlpGrads grads = grad(next.net, input, Batch(inv_n * residual));
    adam_step(opt, next.net, grads);
  }
  return next;
}

}  // namespace fpmd
