#include "fpmd/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fpmd/envs.hpp"
#include "fpmd/meanflow_policy.hpp"

namespace fpmd {

float NoiseSchedule::at(std::int64_t iter) const {
  if (horizon <= 0 || iter >= horizon) return sigma_end;
  if (iter < 0) iter = 0;
  const float frac = static_cast<float>(iter) / static_cast<float>(horizon);
  return sigma_start + (sigma_end - sigma_start) * frac;
}

namespace {

using Setter = std::function<void(TrainConfig&, const std::string&)>;

template <typename T>
T parse_num(const std::string& v, const std::string& key) {
  std::istringstream in(v);
  T out;
  in >> out;
  if (in.fail() || !in.eof())
    throw std::invalid_argument("config: bad value '" + v + "' for key " + key);
  return out;
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> s = {
      {"variant", [](TrainConfig& c, const std::string& v) { c.variant = v; }},
      {"env", [](TrainConfig& c, const std::string& v) { c.env = v; }},
      {"seed", [](TrainConfig& c, const std::string& v) { c.seed = parse_num<std::uint64_t>(v, "seed"); }},
      {"total_iters", [](TrainConfig& c, const std::string& v) { c.total_iters = parse_num<std::int64_t>(v, "total_iters"); }},
      {"warmup_steps", [](TrainConfig& c, const std::string& v) { c.warmup_steps = parse_num<std::int64_t>(v, "warmup_steps"); }},
      {"batch_size", [](TrainConfig& c, const std::string& v) { c.batch_size = parse_num<std::int64_t>(v, "batch_size"); }},
      {"buffer_capacity", [](TrainConfig& c, const std::string& v) { c.buffer_capacity = parse_num<std::int64_t>(v, "buffer_capacity"); }},
      {"lambda", [](TrainConfig& c, const std::string& v) { c.lambda = parse_num<double>(v, "lambda"); }},
      {"gamma", [](TrainConfig& c, const std::string& v) { c.gamma = parse_num<float>(v, "gamma"); }},
      {"tau", [](TrainConfig& c, const std::string& v) { c.tau = parse_num<float>(v, "tau"); }},
      {"n_candidates", [](TrainConfig& c, const std::string& v) { c.n_candidates = parse_num<std::int64_t>(v, "n_candidates"); }},
      {"k_train", [](TrainConfig& c, const std::string& v) { c.k_train = parse_num<int>(v, "k_train"); }},
      {"k_eval", [](TrainConfig& c, const std::string& v) { c.k_eval = parse_num<int>(v, "k_eval"); }},
      {"actor_lr", [](TrainConfig& c, const std::string& v) { c.actor_lr = parse_num<float>(v, "actor_lr"); }},
      {"critic_lr", [](TrainConfig& c, const std::string& v) { c.critic_lr = parse_num<float>(v, "critic_lr"); }},
      {"hidden_width", [](TrainConfig& c, const std::string& v) { c.hidden_width = parse_num<std::int64_t>(v, "hidden_width"); }},
      {"hidden_depth", [](TrainConfig& c, const std::string& v) { c.hidden_depth = parse_num<std::int64_t>(v, "hidden_depth"); }},
      {"prior_mu", [](TrainConfig& c, const std::string& v) { c.prior_mu = parse_num<float>(v, "prior_mu"); }},
      {"prior_sigma", [](TrainConfig& c, const std::string& v) { c.prior_sigma = parse_num<float>(v, "prior_sigma"); }},
      {"sigma_start", [](TrainConfig& c, const std::string& v) { c.sigma_start = parse_num<float>(v, "sigma_start"); }},
      {"sigma_end", [](TrainConfig& c, const std::string& v) { c.sigma_end = parse_num<float>(v, "sigma_end"); }},
      {"sigma_decay_iters", [](TrainConfig& c, const std::string& v) { c.sigma_decay_iters = parse_num<std::int64_t>(v, "sigma_decay_iters"); }},
      {"eval_every", [](TrainConfig& c, const std::string& v) { c.eval_every = parse_num<std::int64_t>(v, "eval_every"); }},
      {"eval_episodes", [](TrainConfig& c, const std::string& v) { c.eval_episodes = parse_num<std::int64_t>(v, "eval_episodes"); }},
      {"ckpt_every", [](TrainConfig& c, const std::string& v) { c.ckpt_every = parse_num<std::int64_t>(v, "ckpt_every"); }},
      {"meanflow_convention", [](TrainConfig& c, const std::string& v) { c.meanflow_convention = v; }},
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key=value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end())
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key '" +
                                  key + "'");
    it->second(cfg, value);
  }
  return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_to_text(const TrainConfig& c) {
  std::ostringstream o;
  o << "variant = " << c.variant << "\n";
  o << "env = " << c.env << "\n";
  o << "seed = " << c.seed << "\n";
  o << "total_iters = " << c.total_iters << "\n";
  o << "warmup_steps = " << c.warmup_steps << "\n";
  o << "batch_size = " << c.batch_size << "\n";
  o << "buffer_capacity = " << c.buffer_capacity << "\n";
  o << "lambda = " << c.lambda << "\n";
  o << "gamma = " << c.gamma << "\n";
  o << "tau = " << c.tau << "\n";
  o << "n_candidates = " << c.n_candidates << "\n";
  o << "k_train = " << c.k_train << "\n";
  o << "k_eval = " << c.k_eval << "\n";
  o << "actor_lr = " << c.actor_lr << "\n";
  o << "critic_lr = " << c.critic_lr << "\n";
  o << "hidden_width = " << c.hidden_width << "\n";
  o << "hidden_depth = " << c.hidden_depth << "\n";
  o << "prior_mu = " << c.prior_mu << "\n";
  o << "prior_sigma = " << c.prior_sigma << "\n";
  o << "sigma_start = " << c.sigma_start << "\n";
  o << "sigma_end = " << c.sigma_end << "\n";
  o << "sigma_decay_iters = " << c.sigma_decay_iters << "\n";
  o << "eval_every = " << c.eval_every << "\n";
  o << "eval_episodes = " << c.eval_episodes << "\n";
  o << "ckpt_every = " << c.ckpt_every << "\n";
  o << "meanflow_convention = " << c.meanflow_convention << "\n";
  return o.str();
}

TrainConfig resolve_config(TrainConfig cfg) {
  if (cfg.variant != "fpmd-r" && cfg.variant != "fpmd-m")
    throw std::invalid_argument("config: variant must be fpmd-r or fpmd-m");
  meanflow_convention_from_string(cfg.meanflow_convention);  // validates
  const EnvSpec& spec = env_spec(cfg.env);

  if (cfg.gamma < 0.0f) cfg.gamma = spec.gamma;
  if (cfg.sigma_start < 0.0f) {
    // 0.2 x half the action range of the first dimension
    const auto& [lo, hi] = spec.action_bounds.front();
    cfg.sigma_start = 0.2f * (hi - lo) / 2.0f;
  }
  if (cfg.sigma_decay_iters < 0) cfg.sigma_decay_iters = cfg.total_iters / 2;

  if (!(cfg.gamma > 0.0f && cfg.gamma < 1.0f))
    throw std::invalid_argument("config: gamma outside (0, 1)");
  if (!(cfg.lambda > 0.0)) throw std::invalid_argument("config: lambda must be > 0");
  if (!(cfg.tau > 0.0f && cfg.tau <= 1.0f))
    throw std::invalid_argument("config: tau outside (0, 1]");
  if (cfg.total_iters < 0) throw std::invalid_argument("config: total_iters must be >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (cfg.buffer_capacity < 1) throw std::invalid_argument("config: buffer_capacity must be >= 1");
  if (cfg.n_candidates < 1) throw std::invalid_argument("config: n_candidates must be >= 1");
  if (cfg.k_train < 1 || cfg.k_eval < 1) throw std::invalid_argument("config: k must be >= 1");
  if (cfg.hidden_depth < 1 || cfg.hidden_width < 1)
    throw std::invalid_argument("config: network size must be >= 1");
  if (!(cfg.prior_sigma > 0.0f)) throw std::invalid_argument("config: prior_sigma must be > 0");
  if (cfg.sigma_start < cfg.sigma_end)
    throw std::invalid_argument("config: sigma_start must be >= sigma_end");
  if (cfg.eval_every < 1) throw std::invalid_argument("config: eval_every must be >= 1");
  if (cfg.eval_episodes < 1) throw std::invalid_argument("config: eval_episodes must be >= 1");
  return cfg;
}

}  // namespace fpmd
