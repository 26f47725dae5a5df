#include "fpmd/flow_policy.hpp"

#include <cmath>
#include <stdexcept>

#include "fpmd/mirror_weights.hpp"
#include "fpmd/time_embedding.hpp"

namespace fpmd {

FlowPolicy make_flow_policy(int state_dim, int action_dim, const std::vector<Eigen::Index>& hidden,
                            std::uint64_t seed, float prior_mu, float prior_sigma) {
  if (action_dim < 1 || state_dim < 0)
    throw std::invalid_argument("make_flow_policy: bad dimensions");
  if (!(prior_sigma > 0.0f)) throw std::invalid_argument("make_flow_policy: prior sigma <= 0");
  FlowPolicy p;
  p.state_dim = state_dim;
  p.action_dim = action_dim;
  // 0.01-scaled final layer: the initial velocity is near zero, so the
  // initial policy is approximately the prior.
  p.net = make_mlp(state_dim + action_dim + kTimeEmbedDim, hidden, action_dim, Activation::Tanh,
                   seed, 0.01f);
  p.prior_mu = Vector::Constant(action_dim, prior_mu);
  p.prior_sigma = Vector::Constant(action_dim, prior_sigma);
  return p;
}

Batch flow_net_input(const FlowPolicy& p, const Batch& s, const Batch& a, const Vector& t) {
  const Eigen::Index n = a.rows();
  if (s.rows() != n || t.size() != n)
    throw std::invalid_argument("flow_net_input: row count mismatch");
  if (s.cols() != p.state_dim || a.cols() != p.action_dim)
    throw std::invalid_argument("flow_net_input: column count mismatch");
  Batch x(n, p.state_dim + p.action_dim + kTimeEmbedDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.block(i, 0, 1, p.state_dim) = s.row(i);
    x.block(i, p.state_dim, 1, p.action_dim) = a.row(i);
    x.block(i, p.state_dim + p.action_dim, 1, kTimeEmbedDim) =
        time_embedding(t(i)).transpose();
  }
  return x;
}

namespace {

void check_time(float t) {
  if (!(t >= 0.0f && t <= 1.0f))
    throw std::invalid_argument("velocity: t outside [0, 1]");
}

}  // namespace

Vector velocity(const FlowPolicy& p, const Vector& s, const Vector& a, float t) {
  check_time(t);
  Batch out = velocity_batch(p, Batch(s.transpose()), Batch(a.transpose()), t);
  return out.row(0).transpose();
}

Batch velocity_batch(const FlowPolicy& p, const Batch& s, const Batch& a, float t, long* nfe) {
  check_time(t);
  return velocity_batch(p, s, a, Vector(Vector::Constant(a.rows(), t)), nfe);
}

Batch velocity_batch(const FlowPolicy& p, const Batch& s, const Batch& a, const Vector& t,
                     long* nfe) {
  for (Eigen::Index i = 0; i < t.size(); ++i) check_time(t(i));
  if (nfe) ++*nfe;
  return forward(p.net, flow_net_input(p, s, a, t));
}

Vector euler_sample(const FlowPolicy& p, const Vector& s, const Vector& a0, int k,
                    std::vector<Vector>* trajectory, long* nfe) {
  if (k < 1) throw std::invalid_argument("euler_sample: k must be >= 1");
  if (trajectory) {
    trajectory->clear();
    trajectory->push_back(a0);
  }
  Vector a = a0;
  const float h = 1.0f / static_cast<float>(k);
  for (int i = 0; i < k; ++i) {
    const float t = static_cast<float>(i) * h;
    if (nfe) ++*nfe;
    Batch v = forward(p.net, flow_net_input(p, Batch(s.transpose()), Batch(a.transpose()),
                                            Vector(Vector::Constant(1, t))));
    a += h * v.row(0).transpose();
    if (!a.allFinite())
      throw std::runtime_error("euler_sample: non-finite state at step " + std::to_string(i));
    if (trajectory) trajectory->push_back(a);
  }
  return a;
}

Batch euler_sample_batch(const FlowPolicy& p, const Batch& s, const Batch& a0, int k, long* nfe) {
  if (k < 1) throw std::invalid_argument("euler_sample: k must be >= 1");
  Batch a = a0;
  const float h = 1.0f / static_cast<float>(k);
  for (int i = 0; i < k; ++i) {
    const float t = static_cast<float>(i) * h;
    a += h * velocity_batch(p, s, a, t, nfe);
    if (!a.allFinite())
      throw std::runtime_error("euler_sample: non-finite state at step " + std::to_string(i));
  }
  return a;
}

Batch sample_prior(const FlowPolicy& p, Eigen::Index n, Rng& rng) {
  Batch a0(n, p.action_dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < p.action_dim; ++j)
      a0(i, j) = rng.normal(p.prior_mu(j), p.prior_sigma(j));
  return a0;
}

Vector sample_action(const FlowPolicy& p, const Vector& s, int k, Rng& rng,
                     const std::vector<std::pair<float, float>>& bounds, long* nfe) {
  Vector a0(p.action_dim);
  for (int j = 0; j < p.action_dim; ++j) a0(j) = rng.normal(p.prior_mu(j), p.prior_sigma(j));
  Vector a1 = euler_sample(p, s, a0, k, nullptr, nfe);
  return clip_to_bounds(std::move(a1), bounds);
}

PolicyLoss fpmd_loss(const FlowPolicy& p, const FlowBatch& batch, const Vector& q, double lambda) {
  const Eigen::Index n = batch.a1.rows();
  if (n == 0) throw std::invalid_argument("fpmd_loss: empty batch");
  if (batch.a0.rows() != n || batch.s.rows() != n || batch.t.size() != n || q.size() != n)
    throw std::invalid_argument("fpmd_loss: batch row counts disagree");

  const Vector w = exp_q_weights(q, lambda);

  // straight interpolation a_t = t a1 + (1-t) a0
  Batch a_t(n, p.action_dim);
  for (Eigen::Index i = 0; i < n; ++i)
    a_t.row(i) = batch.t(i) * batch.a1.row(i) + (1.0f - batch.t(i)) * batch.a0.row(i);

  const Batch x = flow_net_input(p, batch.s, a_t, batch.t);
  const Batch v = forward(p.net, x);
  const Batch residual = (batch.a1 - batch.a0) - v;

  PolicyLoss out;
  const float inv_n = 1.0f / static_cast<float>(n);
  out.loss = inv_n * (residual.rowwise().squaredNorm().array() * w.array()).sum();
  out.mean_weight = w.mean();

  // d loss / d v = -(2/n) w_i residual_i
  Batch upstream = (-2.0f * inv_n) * (residual.array().colwise() * w.array()).matrix();
  out.grads = grad(p.net, x, upstream);
  return out;
}

}  // namespace fpmd
