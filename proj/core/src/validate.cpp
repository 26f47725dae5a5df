#include "fpmd/validate.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include <nlohmann/json.hpp>

#include "fpmd/adam.hpp"
#include "fpmd/envs.hpp"

namespace fpmd {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// estimation allowance
// ---------------------------------------------------------------------------

double epsilon_floor(Eigen::Index n, int d, std::uint64_t seed) {
  static std::mutex mu;
  static std::map<std::tuple<Eigen::Index, int, std::uint64_t>, double> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find({n, d, seed}); it != cache.end()) return it->second;
  }

  double worst = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    Rng rng(derive_seed(seed, 100 + static_cast<std::uint64_t>(trial)));
    auto draw = [&] {
      Eigen::MatrixXd x(n, d);
      for (Eigen::Index i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
      return x;
    };
    const SampleSet a{draw(), "calib_a"};
    const SampleSet b{draw(), "calib_b"};
    const double w2 = empirical_w2(a, b).distance;
    worst = std::max(worst, w2 * w2);
  }
  const double floor = 2.0 * worst;
  std::lock_guard<std::mutex> lock(mu);
  cache[{n, d, seed}] = floor;
  return floor;
}

double epsilon_est(Eigen::Index n, int d, double var_hat, std::uint64_t seed) {
  return epsilon_floor(n, d, seed) * std::max(1.0, var_hat);
}

// ---------------------------------------------------------------------------
// known-target flow fixtures
// ---------------------------------------------------------------------------

const char* to_string(FlowFixture f) {
  switch (f) {
    case FlowFixture::PointMass: return "point_mass";
    case FlowFixture::Gaussian: return "gaussian";
    default: return "mixture2d";
  }
}

int fixture_dim(FlowFixture f) { return f == FlowFixture::Mixture2d ? 2 : 1; }

namespace {

constexpr double kPointMassTarget = 0.7;
constexpr double kGaussMean = 0.5;
constexpr double kGaussStd = 0.2;
constexpr double kMixOffset = 0.6;
constexpr double kMixStd = 0.15;

}  // namespace

double fixture_variance(FlowFixture f) {
  switch (f) {
    case FlowFixture::PointMass: return 0.0;
    case FlowFixture::Gaussian: return kGaussStd * kGaussStd;
    default:
      // two symmetric components: per-dim var = sigma^2 + offset^2
      return 2.0 * (kMixStd * kMixStd + kMixOffset * kMixOffset);
  }
}

Eigen::MatrixXd sample_fixture(FlowFixture f, Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd out(n, fixture_dim(f));
  for (Eigen::Index i = 0; i < n; ++i) {
    switch (f) {
      case FlowFixture::PointMass: out(i, 0) = kPointMassTarget; break;
      case FlowFixture::Gaussian: out(i, 0) = rng.normal() * kGaussStd + kGaussMean; break;
      case FlowFixture::Mixture2d: {
        const double sign = rng.uniform() < 0.5f ? 1.0 : -1.0;
        out(i, 0) = sign * kMixOffset + rng.normal() * kMixStd;
        out(i, 1) = sign * kMixOffset + rng.normal() * kMixStd;
        break;
      }
    }
  }
  return out;
}

namespace {

/// Plain flow-matching fit of an unconditional field to a fixture target.
FlowPolicy train_flow(FlowFixture f, std::uint64_t seed, int steps, Eigen::Index batch,
                      float lr_start, float lr_end) {
  const int d = fixture_dim(f);
  FlowPolicy p = make_flow_policy(0, d, {64, 64}, derive_seed(seed, 11));
  Rng rng(derive_seed(seed, 12));
  OptState opt = make_opt_state(p.net, {lr_start});
  const Vector q = Vector::Zero(batch);  // uniform weights

  for (int step = 0; step < steps; ++step) {
    opt.cfg.lr = lr_start + (lr_end - lr_start) * static_cast<float>(step) /
                                static_cast<float>(steps);
    FlowBatch fb;
    fb.s = Batch(batch, 0);
    fb.a1 = sample_fixture(f, batch, rng).cast<float>();
    fb.a0 = sample_prior(p, batch, rng);
    fb.t.resize(batch);
    for (Eigen::Index i = 0; i < batch; ++i) fb.t(i) = rng.uniform();
    PolicyLoss loss = fpmd_loss(p, fb, q, 1.0);
    adam_step(opt, p.net, loss.grads);
  }
  return p;
}

Eigen::MatrixXd flow_cloud(const FlowPolicy& p, Eigen::Index n, int k, Rng& rng) {
  const Batch s(n, 0);
  const Batch a0 = sample_prior(p, n, rng);
  return euler_sample_batch(p, s, a0, k).cast<double>();
}

}  // namespace

FlowPolicy train_fixture_flow(FlowFixture f, std::uint64_t seed) {
  switch (f) {
    case FlowFixture::PointMass: return train_flow(f, seed, 9000, 256, 2e-3f, 1e-4f);
    case FlowFixture::Gaussian: return train_flow(f, seed, 9000, 256, 2e-3f, 1e-4f);
    default: return train_flow(f, seed, 12000, 256, 2e-3f, 1e-4f);
  }
}

std::vector<FlowFixtureReport> validate_flow_known_targets(std::uint64_t seed,
                                                           std::ostream* jsonl) {
  std::vector<FlowFixtureReport> reports;
  for (FlowFixture f : {FlowFixture::PointMass, FlowFixture::Gaussian, FlowFixture::Mixture2d}) {
    const int d = fixture_dim(f);
    const Eigen::Index n = d == 1 ? 2048 : kAssignmentCap;
    const FlowPolicy p = train_fixture_flow(f, derive_seed(seed, 21));

    Rng truth_rng(derive_seed(seed, 22));
    Rng k20_rng(derive_seed(seed, 23));
    Rng k1_rng(derive_seed(seed, 24));
    Rng k40_rng(derive_seed(seed, 25));

    const SampleSet truth{sample_fixture(f, n, truth_rng), "truth"};
    const SampleSet k20{flow_cloud(p, n, 20, k20_rng), "k20"};
    const SampleSet k1{flow_cloud(p, n, 1, k1_rng), "k1"};
    const SampleSet k40{flow_cloud(p, n, 40, k40_rng), "k40"};

    FlowFixtureReport r;
    r.fixture = to_string(f);
    const W2Result w20 = empirical_w2(k20, truth);
    r.w2_k20_truth = w20.distance;
    r.w2_k1_truth = empirical_w2(k1, truth).distance;
    r.w2_k1_k40 = empirical_w2(k1, k40).distance;
    r.target_var = fixture_variance(f);
    r.eps_est = epsilon_est(n, d, r.target_var);
    r.bound_ok = r.w2_k1_truth * r.w2_k1_truth <= r.target_var + r.eps_est;
    r.exact_mode = w20.exact;
    reports.push_back(r);

    if (jsonl) {
      json line;
      line["fixture"] = r.fixture;
      line["w2_k20_truth"] = r.w2_k20_truth;
      line["w2_k1_truth"] = r.w2_k1_truth;
      line["w2_k1_k40"] = r.w2_k1_k40;
      line["target_var"] = r.target_var;
      line["eps_est"] = r.eps_est;
      line["bound_ok"] = r.bound_ok;
      line["mode"] = r.exact_mode ? "exact" : "sliced";
      (*jsonl) << line.dump() << "\n";
    }
  }
  return reports;
}

// ---------------------------------------------------------------------------
// MeanFlow fixed point
// ---------------------------------------------------------------------------

double linear_field_mean_velocity(double a, double r, double t) {
  return a * (1.0 - std::exp(r - t)) / (t - r);
}

namespace {

struct ProbeGrid {
  std::vector<float> a;                       // 21 points in [-1, 1]
  std::vector<std::pair<float, float>> rt;    // 45 pairs, t - r in [0.1, 0.9]
};

ProbeGrid make_probe_grid() {
  ProbeGrid g;
  for (int i = 0; i < 21; ++i) g.a.push_back(-1.0f + 0.1f * static_cast<float>(i));
  for (int ri = 0; ri <= 8; ++ri)
    for (int ti = ri + 1; ti <= 9; ++ti)
      g.rt.emplace_back(0.1f * static_cast<float>(ri), 0.1f * static_cast<float>(ti));
  return g;
}

/// Evaluates u on the probe grid; rows ordered (rt major, a minor).
Eigen::MatrixXd probe_values(const MeanFlowPolicy& p, const ProbeGrid& g) {
  const Eigen::Index n = static_cast<Eigen::Index>(g.a.size() * g.rt.size());
  Batch s(n, 0), x(n, 1);
  Vector r(n), t(n);
  Eigen::Index row = 0;
  for (const auto& [rr, tt] : g.rt)
    for (float a : g.a) {
      x(row, 0) = a;
      r(row) = rr;
      t(row) = tt;
      ++row;
    }
  return avg_velocity_batch(p, s, x, r, t).cast<double>();
}

void zero_final_layer(MlpParams& p) {
  p.layers.back().weight.setZero();
  p.layers.back().bias.setZero();
}

/// Analytic-field fitting stream: x ~ U[-1.3, 1.3], ordered uniform (r, t),
/// v_cond = the true instantaneous velocity at the training point.
MeanFlowFitSource analytic_source(Eigen::Index batch, bool linear_field, double c) {
  return [batch, linear_field, c](Rng& rng) {
    MeanFlowFitBatch b;
    b.s = Batch(batch, 0);
    b.x.resize(batch, 1);
    b.v_cond.resize(batch, 1);
    b.r.resize(batch);
    b.t.resize(batch);
    RtSchedule sched;
    for (Eigen::Index i = 0; i < batch; ++i) {
      b.x(i, 0) = rng.uniform(-1.3f, 1.3f);
      const auto [r, t] = sample_rt(sched, rng);
      b.r(i) = r;
      b.t(i) = t;
      b.v_cond(i, 0) = linear_field ? b.x(i, 0) : static_cast<float>(c);
    }
    return b;
  };
}

/// Data-driven MeanFlow training on the Gaussian fixture (target branch
/// refreshed every step, uniform weights), used to compare conventions.
MeanFlowPolicy train_generative_meanflow(MeanFlowConvention conv, std::uint64_t seed) {
  MeanFlowPolicy p = make_meanflow_policy(0, 1, {64, 64}, derive_seed(seed, 31));
  Rng rng(derive_seed(seed, 32));
  OptState opt = make_opt_state(p.net, {1.5e-3f});
  const Eigen::Index batch = 256;
  const Vector q = Vector::Zero(batch);
  RtSchedule sched;
  const int steps = 6000;
  for (int step = 0; step < steps; ++step) {
    opt.cfg.lr = 1.5e-3f * (1.0f - 0.95f * static_cast<float>(step) / static_cast<float>(steps));
    MeanFlowBatch mb;
    mb.s = Batch(batch, 0);
    mb.a1 = sample_fixture(FlowFixture::Gaussian, batch, rng).cast<float>();
    mb.a0 = sample_prior(p, batch, rng);
    mb.r.resize(batch);
    mb.t.resize(batch);
    for (Eigen::Index i = 0; i < batch; ++i) {
      const auto [r, t] = sample_rt(sched, rng);
      mb.r(i) = r;
      mb.t(i) = t;
    }
    PolicyLoss loss = mpmd_loss(p, p.net, mb, q, 1.0, conv);
    adam_step(opt, p.net, loss.grads);
  }
  return p;
}

double one_step_w2_to_gaussian(const MeanFlowPolicy& p, std::uint64_t seed) {
  const Eigen::Index n = 2048;
  Rng sample_rng(derive_seed(seed, 41));
  Rng truth_rng(derive_seed(seed, 42));
  const Batch s(n, 0);
  const Eigen::MatrixXd ours = one_step_sample_batch(p, s, sample_rng).cast<double>();
  const Eigen::MatrixXd truth = sample_fixture(FlowFixture::Gaussian, n, truth_rng);
  return empirical_w2({ours, "one_step"}, {truth, "truth"}).distance;
}

}  // namespace

MeanFlowValidationReport validate_meanflow_fixed_point(std::uint64_t seed, std::ostream* jsonl) {
  MeanFlowValidationReport report;
  const ProbeGrid grid = make_probe_grid();
  const Eigen::Index batch = 512;
  constexpr double kConstField = 0.8;

  // --- constant field: one operator application lands on the fixed point --
  {
    MeanFlowPolicy u0 = make_meanflow_policy(0, 1, {64, 64}, derive_seed(seed, 51));
    zero_final_layer(u0.net);
    Rng rng(derive_seed(seed, 52));
    MeanFlowPolicy u1 = fixed_point_iterate(u0, analytic_source(batch, false, kConstField), 2500,
                                            {2e-3f}, rng);
    const Eigen::MatrixXd vals = probe_values(u1, grid);
    report.const_field_error_first_iter = (vals.array() - kConstField).abs().maxCoeff();
    if (jsonl)
      (*jsonl) << json{{"check", "const_field"},
                       {"sup_error_after_first_iter", report.const_field_error_first_iter}}
                      .dump()
               << "\n";
  }

  // --- linear field: iterates approach the analytic mean velocity ---------
  {
    MeanFlowPolicy u = make_meanflow_policy(0, 1, {64, 64}, derive_seed(seed, 53));
    zero_final_layer(u.net);
    Rng rng(derive_seed(seed, 54));

    Eigen::MatrixXd truth(static_cast<Eigen::Index>(grid.rt.size() * grid.a.size()), 1);
    Eigen::Index row = 0;
    for (const auto& [r, t] : grid.rt)
      for (float a : grid.a) truth(row++, 0) = linear_field_mean_velocity(a, r, t);

    std::vector<Eigen::MatrixXd> history;
    history.push_back(probe_values(u, grid));
    const int outer_iters = 10;
    for (int n = 1; n <= outer_iters; ++n) {
      const float lr = 2e-3f / (1.0f + 0.35f * static_cast<float>(n - 1));
      u = fixed_point_iterate(u, analytic_source(batch, true, 0.0), 700, {lr}, rng);
      history.push_back(probe_values(u, grid));
      const double sup = (history.back() - truth).array().abs().maxCoeff();
      report.sup_errors.push_back(sup);
      if (n >= 2) {
        const double num = (history[static_cast<std::size_t>(n)] -
                            history[static_cast<std::size_t>(n - 1)])
                               .norm();
        const double den = (history[static_cast<std::size_t>(n - 1)] -
                            history[static_cast<std::size_t>(n - 2)])
                               .norm();
        report.contraction_ratios.push_back(num / den);
      }
      if (jsonl)
        (*jsonl) << json{{"check", "linear_field"},
                         {"iter", n},
                         {"sup_error", report.sup_errors.back()},
                         {"contraction_ratio",
                          n >= 2 ? json(report.contraction_ratios.back()) : json(nullptr)}}
                        .dump()
                 << "\n";
    }
    report.final_sup_error = report.sup_errors.back();
  }

  // --- convention comparison on a generative fixture ----------------------
  {
    const MeanFlowPolicy lit = train_generative_meanflow(MeanFlowConvention::PaperLiteral,
                                                         derive_seed(seed, 55));
    const MeanFlowPolicy fwd = train_generative_meanflow(MeanFlowConvention::ForwardFromR,
                                                         derive_seed(seed, 56));
    report.convention_w2_paper_literal = one_step_w2_to_gaussian(lit, derive_seed(seed, 57));
    report.convention_w2_forward_from_r = one_step_w2_to_gaussian(fwd, derive_seed(seed, 57));
    if (jsonl)
      (*jsonl) << json{{"check", "convention_comparison"},
                       {"fixture", "gaussian"},
                       {"w2_paper_literal", report.convention_w2_paper_literal},
                       {"w2_forward_from_r", report.convention_w2_forward_from_r}}
                      .dump()
               << "\n";
  }
  return report;
}

// ---------------------------------------------------------------------------
// one-step discretization bound
// ---------------------------------------------------------------------------

std::vector<BoundStateReport> check_one_step_bound(const FlowPolicy& policy,
                                                   const std::vector<Vector>& states,
                                                   std::uint64_t seed, std::ostream* jsonl) {
  const Eigen::Index n = kAssignmentCap;
  std::vector<BoundStateReport> reports;
  for (std::size_t si = 0; si < states.size(); ++si) {
    const Vector& s = states[si];
    Batch srep(n, s.size());
    srep.rowwise() = s.transpose();

    Rng one_rng(derive_seed(seed, 61 + 2 * si));
    Rng fine_rng(derive_seed(seed, 62 + 2 * si));
    const Eigen::MatrixXd one =
        euler_sample_batch(policy, srep, sample_prior(policy, n, one_rng), 1).cast<double>();
    const Eigen::MatrixXd fine =
        euler_sample_batch(policy, srep, sample_prior(policy, n, fine_rng), 40).cast<double>();

    const Eigen::RowVectorXd mean = fine.colwise().mean();
    const double var_hat = (fine.rowwise() - mean).squaredNorm() / static_cast<double>(n - 1);

    BoundStateReport r;
    r.state_index = static_cast<int>(si);
    const double w2 = empirical_w2({one, "one_step"}, {fine, "fine"}).distance;
    r.w2_sq = w2 * w2;
    r.var_hat = var_hat;
    r.eps_est = epsilon_est(n, static_cast<int>(policy.action_dim), var_hat);
    r.margin = r.var_hat + r.eps_est - r.w2_sq;
    r.ok = r.margin >= 0.0;
    reports.push_back(r);

    if (jsonl)
      (*jsonl) << json{{"state_index", r.state_index}, {"w2_sq", r.w2_sq},
                       {"var", r.var_hat},           {"eps_est", r.eps_est},
                       {"margin", r.margin},         {"ok", r.ok}}
                      .dump()
               << "\n";
  }
  return reports;
}

// ---------------------------------------------------------------------------
// sampling trajectories
// ---------------------------------------------------------------------------

double straightness_defect(const std::vector<Vector>& points) {
  if (points.size() < 3) return 0.0;
  const Vector chord = points.back() - points.front();
  const float len = chord.norm();
  if (len < 1e-9f) return 0.0;
  const Vector dir = chord / len;
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < points.size(); ++i) {
    const Vector rel = points[i] - points.front();
    const Vector perp = rel - rel.dot(dir) * dir;
    worst = std::max(worst, static_cast<double>(perp.norm()));
  }
  return worst / static_cast<double>(len);
}

namespace {

std::vector<Vector> one_trajectory(const Agent& agent, const Vector& s, int k, Rng& rng) {
  if (agent.is_meanflow()) {
    // average-velocity parametrization: a single displacement, 2 points
    Vector a0(agent.meanflow.action_dim);
    for (int j = 0; j < agent.meanflow.action_dim; ++j)
      a0(j) = rng.normal(agent.meanflow.prior_mu(j), agent.meanflow.prior_sigma(j));
    const Vector a1 = a0 + avg_velocity(agent.meanflow, s, a0, 0.0f, 1.0f);
    return {a0, a1};
  }
  Vector a0(agent.flow.action_dim);
  for (int j = 0; j < agent.flow.action_dim; ++j)
    a0(j) = rng.normal(agent.flow.prior_mu(j), agent.flow.prior_sigma(j));
  std::vector<Vector> traj;
  euler_sample(agent.flow, s, a0, k, &traj);
  return traj;
}

}  // namespace

std::vector<double> trajectory_defects(const Agent& agent, const std::string& env_id,
                                       int n_states, int n_particles, int k, std::uint64_t seed) {
  std::vector<double> defects;
  for (int i = 0; i < n_states; ++i) {
    const EnvState st = env_reset(env_id, derive_seed(seed, 71 + static_cast<std::uint64_t>(i)));
    Rng rng(derive_seed(seed, 7100 + static_cast<std::uint64_t>(i)));
    for (int p = 0; p < n_particles; ++p)
      defects.push_back(straightness_defect(one_trajectory(agent, st.s, k, rng)));
  }
  return defects;
}

void dump_trajectories(const Agent& agent, const std::string& env_id, int n_states,
                       int n_particles, int k, const std::string& out_path, std::uint64_t seed) {
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("dump_trajectories: cannot write " + out_path);
  for (int i = 0; i < n_states; ++i) {
    const EnvState st = env_reset(env_id, derive_seed(seed, 71 + static_cast<std::uint64_t>(i)));
    Rng rng(derive_seed(seed, 7100 + static_cast<std::uint64_t>(i)));
    for (int p = 0; p < n_particles; ++p) {
      const std::vector<Vector> traj = one_trajectory(agent, st.s, k, rng);
      json line;
      line["variant"] = agent.cfg.variant;
      line["iteration"] = agent.iteration;
      line["env"] = env_id;
      line["state_index"] = i;
      line["particle"] = p;
      line["k"] = static_cast<int>(traj.size()) - 1;
      line["state"] = std::vector<float>(st.s.data(), st.s.data() + st.s.size());
      json pts = json::array();
      const float h = 1.0f / static_cast<float>(traj.size() - 1);
      for (std::size_t j = 0; j < traj.size(); ++j) {
        json pt = json::array();
        pt.push_back(h * static_cast<float>(j));
        for (Eigen::Index c = 0; c < traj[j].size(); ++c) pt.push_back(traj[j](c));
        pts.push_back(pt);
      }
      line["points"] = pts;
      line["straightness_defect"] = straightness_defect(traj);
      out << line.dump() << "\n";
    }
  }
}

}  // namespace fpmd
