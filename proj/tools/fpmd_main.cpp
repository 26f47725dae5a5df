// fpmd command line: train / eval / validate / dump-traj.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>

#include <nlohmann/json.hpp>

#include "fpmd/config.hpp"
#include "fpmd/envs.hpp"
#include "fpmd/trainer.hpp"
#include "fpmd/validate.hpp"

using json = nlohmann::ordered_json;

namespace {

std::unique_ptr<std::ofstream> open_report(const std::string& path) {
  if (path.empty()) return nullptr;
  auto out = std::make_unique<std::ofstream>(path);
  if (!*out) throw std::runtime_error("cannot write report file " + path);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow policy mirror descent: online actor-critic RL with one-step sampling"};
  app.require_subcommand(1);

  // --- train ---------------------------------------------------------------
  std::string train_config, train_out;
  auto* train_cmd = app.add_subcommand("train", "Run the training loop");
  train_cmd->add_option("--config", train_config, "Config file (key=value lines)")->required();
  train_cmd->add_option("--out", train_out, "Output directory")->required();

  // --- eval ------------------------------------------------------------------
  std::string eval_ckpt, eval_env;
  int eval_steps = 1;
  std::int64_t eval_episodes = 10;
  std::uint64_t eval_seed = 17;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", eval_ckpt, "Checkpoint directory")->required();
  eval_cmd->add_option("--env", eval_env, "Environment id (default: from checkpoint)");
  eval_cmd->add_option("--steps", eval_steps, "Sampling steps per action");
  eval_cmd->add_option("--episodes", eval_episodes, "Number of rollout episodes");
  eval_cmd->add_option("--seed", eval_seed, "Evaluation seed");

  // --- validate --------------------------------------------------------------
  auto* validate_cmd = app.add_subcommand("validate", "Run a validation report");
  std::string val_kind, val_out, val_ckpt;
  std::uint64_t val_seed = 7;
  int val_states = 10;
  validate_cmd->add_option("kind", val_kind, "flow | meanflow | bound")->required();
  validate_cmd->add_option("--ckpt", val_ckpt, "Checkpoint directory (bound only)");
  validate_cmd->add_option("--out", val_out, "Write the JSON-lines report here (default stdout)");
  validate_cmd->add_option("--seed", val_seed, "Validation seed");
  validate_cmd->add_option("--states", val_states, "Probed states (bound only)");

  // --- dump-traj ---------------------------------------------------------------
  std::string traj_ckpt, traj_env, traj_out;
  int traj_particles = 16, traj_steps = 20, traj_states = 4;
  std::uint64_t traj_seed = 11;
  auto* traj_cmd = app.add_subcommand("dump-traj", "Dump sampling trajectories as JSON lines");
  traj_cmd->add_option("--ckpt", traj_ckpt, "Checkpoint directory")->required();
  traj_cmd->add_option("--env", traj_env, "Environment id (default: from checkpoint)");
  traj_cmd->add_option("--particles", traj_particles, "Prior draws per state");
  traj_cmd->add_option("--steps", traj_steps, "Euler steps");
  traj_cmd->add_option("--states", traj_states, "Number of probed states");
  traj_cmd->add_option("--out", traj_out, "Output file")->required();
  traj_cmd->add_option("--seed", traj_seed, "Seed for states and prior draws");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const fpmd::TrainConfig cfg = fpmd::parse_config_file(train_config);
      const fpmd::TrainResult res = fpmd::train(cfg, train_out);
      json line;
      line["metrics"] = res.metrics_path;
      line["checkpoint"] = res.final_checkpoint_dir;
      line["final_eval_return"] = res.final_eval_return;
      line["iterations"] = res.iterations;
      std::cout << line.dump() << "\n";
    } else if (*eval_cmd) {
      fpmd::Agent agent = fpmd::load_agent(eval_ckpt);
      const std::string env = eval_env.empty() ? agent.cfg.env : eval_env;
      const fpmd::EvalResult res = fpmd::evaluate(agent, env, eval_episodes, eval_steps,
                                                  eval_seed);
      json line;
      line["env"] = env;
      line["episodes"] = eval_episodes;
      line["steps"] = eval_steps;
      line["mean_return"] = res.mean_return;
      line["nfe_per_action"] = res.nfe_per_action;
      std::cout << line.dump() << "\n";
    } else if (*validate_cmd) {
      auto file = open_report(val_out);
      std::ostream& out = file ? *file : std::cout;
      if (val_kind == "flow") {
        fpmd::validate_flow_known_targets(val_seed, &out);
      } else if (val_kind == "meanflow") {
        fpmd::validate_meanflow_fixed_point(val_seed, &out);
      } else if (val_kind == "bound") {
        if (val_ckpt.empty()) throw std::runtime_error("validate bound requires --ckpt");
        fpmd::Agent agent = fpmd::load_agent(val_ckpt);
        if (agent.is_meanflow())
          throw std::runtime_error("the bound check needs a velocity-field (fpmd-r) checkpoint");
        std::vector<fpmd::Vector> states;
        for (int i = 0; i < val_states; ++i)
          states.push_back(fpmd::env_reset(agent.cfg.env,
                                           fpmd::derive_seed(val_seed, 900 + i))
                               .s);
        fpmd::check_one_step_bound(agent.flow, states, val_seed, &out);
      } else {
        throw std::runtime_error("unknown validation kind: " + val_kind);
      }
    } else if (*traj_cmd) {
      fpmd::Agent agent = fpmd::load_agent(traj_ckpt);
      const std::string env = traj_env.empty() ? agent.cfg.env : traj_env;
      fpmd::dump_trajectories(agent, env, traj_states, traj_particles, traj_steps, traj_out,
                              traj_seed);
      std::cout << json{{"written", traj_out}}.dump() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
