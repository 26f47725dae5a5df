#pragma once

#include <cstdint>
#include <string>

namespace fpmd {

/// Linear decay from sigma_start to sigma_end over `horizon` iterations,
/// constant afterwards.
struct NoiseSchedule {
  float sigma_start = 0.2f;
  float sigma_end = 0.02f;
  std::int64_t horizon = 1;

  float at(std::int64_t iter) const;
};

/// Every knob the training loop reads. Values of -1 mean "resolve from the
/// environment at startup" (gamma, sigma_start, sigma_decay_iters).
struct TrainConfig {
  std::string variant = "fpmd-r";  // fpmd-r | fpmd-m
  std::string env = "pointmass2d";
  std::uint64_t seed = 1;

  std::int64_t total_iters = 20000;
  std::int64_t warmup_steps = 1000;
  std::int64_t batch_size = 256;
  std::int64_t buffer_capacity = 1000000;

  double lambda = 1.0;
  float gamma = -1.0f;
  float tau = 0.005f;

  std::int64_t n_candidates = 32;
  int k_train = 20;
  int k_eval = 1;

  float actor_lr = 3e-4f;
  float critic_lr = 3e-4f;
  std::int64_t hidden_width = 256;
  std::int64_t hidden_depth = 2;

  float prior_mu = 0.0f;
  float prior_sigma = 1.0f;

  float sigma_start = -1.0f;
  float sigma_end = 0.02f;
  std::int64_t sigma_decay_iters = -1;

  std::int64_t eval_every = 1000;
  std::int64_t eval_episodes = 10;
  std::int64_t ckpt_every = 0;  // 0: final checkpoint only

  std::string meanflow_convention = "paper-literal";
};

/// Flat key=value lines, one pair per line, '#' starts a comment.
/// Unknown keys are errors.
TrainConfig parse_config_text(const std::string& text);
TrainConfig parse_config_file(const std::string& path);

/// Round-trippable snapshot of a config (parse_config_text inverse).
std::string config_to_text(const TrainConfig& cfg);

/// Fills the -1 placeholders from the environment spec and checks ranges.
TrainConfig resolve_config(TrainConfig cfg);

}  // namespace fpmd
