#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fpmd/flow_policy.hpp"
#include "fpmd/meanflow_policy.hpp"
#include "fpmd/trainer.hpp"
#include "fpmd/types.hpp"
#include "fpmd/wasserstein.hpp"

namespace fpmd {

// ---------------------------------------------------------------------------
// estimation allowance
// ---------------------------------------------------------------------------

/// Same-distribution W2^2 noise floor for clouds of n points in d
/// dimensions: twice the max over three fixed-seed trials of
/// W2(two independent N(0, I_d) clouds)^2.
double epsilon_floor(Eigen::Index n, int d, std::uint64_t seed = 0xca11b8ull);

/// Estimation allowance used in every bound check: the calibrated floor
/// scaled by the reference variance (floors at unit scale so zero-variance
/// targets keep a small absolute allowance).
double epsilon_est(Eigen::Index n, int d, double var_hat, std::uint64_t seed = 0xca11b8ull);

// ---------------------------------------------------------------------------
// known-target flow fixtures
// ---------------------------------------------------------------------------

enum class FlowFixture { PointMass, Gaussian, Mixture2d };

const char* to_string(FlowFixture f);
int fixture_dim(FlowFixture f);
/// Trace of the target covariance (exact).
double fixture_variance(FlowFixture f);
Eigen::MatrixXd sample_fixture(FlowFixture f, Eigen::Index n, Rng& rng);

/// Trains an unconditional velocity field (empty state input) on the
/// fixture target with the plain flow-matching loss; fixed recipe per
/// fixture, deterministic given seed.
FlowPolicy train_fixture_flow(FlowFixture f, std::uint64_t seed);

struct FlowFixtureReport {
  std::string fixture;
  double w2_k20_truth = 0.0;  // K=20 samples vs ground-truth samples
  double w2_k1_truth = 0.0;   // one-step samples vs ground-truth samples
  double w2_k1_k40 = 0.0;     // one-step samples vs fine-Euler samples
  double target_var = 0.0;
  double eps_est = 0.0;
  bool bound_ok = false;  // w2_k1_truth^2 <= target_var + eps_est
  bool exact_mode = true;
};

std::vector<FlowFixtureReport> validate_flow_known_targets(std::uint64_t seed,
                                                           std::ostream* jsonl = nullptr);

// ---------------------------------------------------------------------------
// MeanFlow fixed point
// ---------------------------------------------------------------------------

struct MeanFlowValidationReport {
  double const_field_error_first_iter = 0.0;  // sup error after one operator application, v == c
  std::vector<double> sup_errors;             // per outer iteration, v(a, t) = a
  std::vector<double> contraction_ratios;     // ||u_{n+1}-u_n|| / ||u_n-u_{n-1}||, n >= 2
  double final_sup_error = 0.0;
  double convention_w2_paper_literal = 0.0;   // generative fixture, one-step sampling
  double convention_w2_forward_from_r = 0.0;
};

MeanFlowValidationReport validate_meanflow_fixed_point(std::uint64_t seed,
                                                       std::ostream* jsonl = nullptr);

/// Analytic mean velocity of v(a, t) = a through (a, t): a (1 - e^{r-t}) / (t - r).
double linear_field_mean_velocity(double a, double r, double t);

// ---------------------------------------------------------------------------
// one-step discretization bound
// ---------------------------------------------------------------------------

struct BoundStateReport {
  int state_index = 0;
  double w2_sq = 0.0;    // one-step cloud vs fine-Euler cloud, exact assignment
  double var_hat = 0.0;  // trace covariance of the fine-Euler cloud
  double eps_est = 0.0;
  double margin = 0.0;  // var_hat + eps_est - w2_sq
  bool ok = false;
};

/// Per state: 512 one-step samples against 512 K=40 Euler samples of the
/// same learned field (unclipped), exact-assignment W2.
std::vector<BoundStateReport> check_one_step_bound(const FlowPolicy& policy,
                                                   const std::vector<Vector>& states,
                                                   std::uint64_t seed,
                                                   std::ostream* jsonl = nullptr);

// ---------------------------------------------------------------------------
// sampling trajectories
// ---------------------------------------------------------------------------

/// Max deviation of the trajectory from its chord, relative to the chord
/// length; 0 for degenerate chords.
double straightness_defect(const std::vector<Vector>& points);

/// Per-trajectory straightness defects for n_states env states times
/// n_particles prior draws.
std::vector<double> trajectory_defects(const Agent& agent, const std::string& env_id,
                                       int n_states, int n_particles, int k, std::uint64_t seed);

/// Writes one JSON line per particle: metadata plus the (t, a_t) sequence
/// of length k+1 (2 points for the one-step parametrization).
void dump_trajectories(const Agent& agent, const std::string& env_id, int n_states,
                       int n_particles, int k, const std::string& out_path, std::uint64_t seed);

}  // namespace fpmd
