#pragma once

#include <cstdint>
#include <string>

#include "fpmd/config.hpp"
#include "fpmd/critic.hpp"
#include "fpmd/envs.hpp"
#include "fpmd/flow_policy.hpp"
#include "fpmd/meanflow_policy.hpp"
#include "fpmd/replay_buffer.hpp"

namespace fpmd {

/// Actor (one of the two parametrizations), critic pair, and the resolved
/// run configuration.
struct Agent {
  TrainConfig cfg;
  EnvSpec spec;
  FlowPolicy flow;          // used when cfg.variant == "fpmd-r"
  MeanFlowPolicy meanflow;  // used when cfg.variant == "fpmd-m"
  CriticPair critic;
  std::int64_t iteration = 0;

  bool is_meanflow() const { return cfg.variant == "fpmd-m"; }
};

Agent make_agent(const TrainConfig& cfg);

/// Training-time sampler: K_train Euler steps for fpmd-r, one step for
/// fpmd-m. Unclipped batch version feeds the losses; the single-state
/// version clips to the action bounds.
Batch actor_sample_train_batch(const Agent& agent, const Batch& s, Rng& rng, long* nfe = nullptr);
Vector actor_sample_eval(const Agent& agent, const Vector& s, int k_eval, Rng& rng,
                         long* nfe = nullptr);

/// Best-of-N: samples n candidates with the training-time sampler, scores
/// them with the pessimistic online Q, takes the argmax (ties to the lowest
/// index), adds N(0, sigma_now^2) exploration noise, clips to bounds.
Vector select_action(const Agent& agent, const Vector& s, std::int64_t n, float sigma_now,
                     Rng& rng, long* nfe = nullptr);

struct EvalResult {
  double mean_return = 0.0;
  double nfe_per_action = 0.0;  // measured with an instrumented counter
};

/// Greedy rollouts: direct policy samples, no candidate selection, no
/// exploration noise. Deterministic given (agent, seed).
EvalResult evaluate(const Agent& agent, const std::string& env_id, std::int64_t episodes,
                    int k_eval, std::uint64_t seed);

struct TrainResult {
  std::string metrics_path;
  std::string final_checkpoint_dir;
  double final_eval_return = 0.0;
  std::int64_t iterations = 0;
};

/// The full training loop: one environment step, one critic update and one
/// actor update per iteration after warmup, a polyak target update every
/// iteration, periodic evaluation/checkpointing. Writes metrics.jsonl
/// (one JSON object per line) and checkpoints under out_dir. Deterministic
/// given (cfg, cfg.seed).
TrainResult train(const TrainConfig& cfg, const std::string& out_dir);

void save_agent(const Agent& agent, const std::string& dir);
Agent load_agent(const std::string& dir);

}  // namespace fpmd
