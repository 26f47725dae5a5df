#include "fpmd/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fpmd/adam.hpp"
#include "fpmd/checkpoint.hpp"

namespace fpmd {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

Agent make_agent(const TrainConfig& raw) {
  Agent a;
  a.cfg = resolve_config(raw);
  a.spec = env_spec(a.cfg.env);
  const std::vector<Eigen::Index> hidden(static_cast<std::size_t>(a.cfg.hidden_depth),
                                         a.cfg.hidden_width);
  if (a.is_meanflow()) {
    a.meanflow = make_meanflow_policy(a.spec.state_dim, a.spec.action_dim, hidden,
                                      derive_seed(a.cfg.seed, 101), a.cfg.prior_mu,
                                      a.cfg.prior_sigma);
  } else {
    a.flow = make_flow_policy(a.spec.state_dim, a.spec.action_dim, hidden,
                              derive_seed(a.cfg.seed, 101), a.cfg.prior_mu, a.cfg.prior_sigma);
  }
  a.critic = make_critic(a.spec.state_dim, a.spec.action_dim, hidden,
                         derive_seed(a.cfg.seed, 102), a.cfg.tau);
  return a;
}

Batch actor_sample_train_batch(const Agent& agent, const Batch& s, Rng& rng, long* nfe) {
  if (agent.is_meanflow()) return one_step_sample_batch(agent.meanflow, s, rng, nfe);
  const Batch a0 = sample_prior(agent.flow, s.rows(), rng);
  return euler_sample_batch(agent.flow, s, a0, agent.cfg.k_train, nfe);
}

Vector actor_sample_eval(const Agent& agent, const Vector& s, int k_eval, Rng& rng, long* nfe) {
  if (agent.is_meanflow()) {
    if (k_eval != 1)
      throw std::invalid_argument("fpmd-m samples in one step; k_eval must be 1");
    return one_step_sample(agent.meanflow, s, rng, agent.spec.action_bounds, nfe);
  }
  return sample_action(agent.flow, s, k_eval, rng, agent.spec.action_bounds, nfe);
}

Vector select_action(const Agent& agent, const Vector& s, std::int64_t n, float sigma_now,
                     Rng& rng, long* nfe) {
  if (n < 1) throw std::invalid_argument("select_action: n must be >= 1");
  Batch states(n, s.size());
  states.rowwise() = s.transpose();
  const Batch candidates = actor_sample_train_batch(agent, states, rng, nfe);
  const Vector q = q_min_online(agent.critic, states, candidates);

  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q(i) > q(best)) best = i;  // strict: ties keep the lowest index

  Vector a = candidates.row(best).transpose();
  if (sigma_now > 0.0f)
    for (Eigen::Index j = 0; j < a.size(); ++j) a(j) += rng.normal(0.0f, sigma_now);
  return clip_to_bounds(std::move(a), agent.spec.action_bounds);
}

EvalResult evaluate(const Agent& agent, const std::string& env_id, std::int64_t episodes,
                    int k_eval, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  long nfe = 0;
  long actions = 0;
  double total = 0.0;
  for (std::int64_t ep = 0; ep < episodes; ++ep) {
    EnvState st = env_reset(env_id, derive_seed(seed, 1000 + static_cast<std::uint64_t>(ep)));
    Rng rng(derive_seed(seed, 5000 + static_cast<std::uint64_t>(ep)));
    double ret = 0.0;
    while (true) {
      const Vector a = actor_sample_eval(agent, st.s, k_eval, rng, &nfe);
      ++actions;
      StepResult r = env_step(env_id, st, a);
      ret += r.reward;
      st = r.next;
      if (r.done != DoneFlag::None) break;
    }
    total += ret;
  }
  EvalResult out;
  out.mean_return = total / static_cast<double>(episodes);
  out.nfe_per_action = static_cast<double>(nfe) / static_cast<double>(actions);
  return out;
}

namespace {

Vector uniform_action(const EnvSpec& spec, Rng& rng) {
  Vector a(spec.action_dim);
  for (int j = 0; j < spec.action_dim; ++j) {
    const auto& [lo, hi] = spec.action_bounds[static_cast<std::size_t>(j)];
    a(j) = rng.uniform(lo, hi);
  }
  return a;
}

}  // namespace

TrainResult train(const TrainConfig& raw, const std::string& out_dir) {
  Agent agent = make_agent(raw);
  const TrainConfig& cfg = agent.cfg;
  const EnvSpec& spec = agent.spec;

  fs::create_directories(out_dir);
  const std::string metrics_path = (fs::path(out_dir) / "metrics.jsonl").string();
  std::ofstream metrics(metrics_path);
  if (!metrics) throw std::runtime_error("train: cannot write " + metrics_path);

  OptState actor_opt = make_opt_state(agent.is_meanflow() ? agent.meanflow.net : agent.flow.net,
                                      {cfg.actor_lr});
  OptState q1_opt = make_opt_state(agent.critic.q1, {cfg.critic_lr});
  OptState q2_opt = make_opt_state(agent.critic.q2, {cfg.critic_lr});

  NoiseSchedule noise{cfg.sigma_start, cfg.sigma_end, cfg.sigma_decay_iters};
  RtSchedule rt_schedule;  // r != t with probability 1

  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  Rng act_rng(derive_seed(cfg.seed, 1));
  Rng buf_rng(derive_seed(cfg.seed, 2));
  Rng loss_rng(derive_seed(cfg.seed, 3));

  std::uint64_t episode = 0;
  EnvState st = env_reset(cfg.env, derive_seed(cfg.seed, 0x10000 + episode));

  // running sums between metrics lines
  double critic_loss_sum = 0.0, actor_loss_sum = 0.0, weight_sum = 0.0;
  std::int64_t update_count = 0;

  double last_eval_return = 0.0;

  auto write_metrics = [&](std::int64_t iter, float sigma_now, const EvalResult& ev) {
    const double denom = update_count > 0 ? static_cast<double>(update_count) : 1.0;
    json line;
    line["iter"] = iter;
    line["env_steps"] = iter;
    line["eval_return"] = ev.mean_return;
    line["critic_loss"] = critic_loss_sum / denom;
    line["actor_loss"] = actor_loss_sum / denom;
    line["mean_weight"] = weight_sum / denom;
    line["sigma_now"] = sigma_now;
    line["nfe_per_action"] = ev.nfe_per_action;
    metrics << line.dump() << "\n";
    metrics.flush();
    critic_loss_sum = actor_loss_sum = weight_sum = 0.0;
    update_count = 0;
  };

  for (std::int64_t e = 1; e <= cfg.total_iters; ++e) {
    const float sigma_now = noise.at(e - 1);

    // -- interact ---------------------------------------------------------
    const bool warm = buffer.size() < static_cast<std::size_t>(cfg.warmup_steps);
    const Vector a = warm ? uniform_action(spec, act_rng)
                          : select_action(agent, st.s, cfg.n_candidates, sigma_now, act_rng);
    StepResult step = env_step(cfg.env, st, a);
    buffer.push({st.s, a, step.reward, step.next.s, step.done});
    if (step.done != DoneFlag::None) {
      ++episode;
      st = env_reset(cfg.env, derive_seed(cfg.seed, 0x10000 + episode));
    } else {
      st = step.next;
    }

    // -- update -----------------------------------------------------------
    if (buffer.size() >= static_cast<std::size_t>(cfg.warmup_steps)) {
      const TransitionBatch batch = buffer.sample(static_cast<std::size_t>(cfg.batch_size),
                                                  buf_rng);

      // critic (targets from the current actor)
      const Batch a_next = actor_sample_train_batch(agent, batch.s_next, loss_rng);
      CriticLossResult closs = critic_loss(agent.critic, batch, a_next, cfg.gamma);
      if (!std::isfinite(closs.loss)) {
        metrics << json{{"iter", e}, {"error", "non_finite_critic_loss"}}.dump() << "\n";
        throw std::runtime_error("train: non-finite critic loss at iteration " +
                                 std::to_string(e));
      }
      adam_step(q1_opt, agent.critic.q1, closs.g1);
      adam_step(q2_opt, agent.critic.q2, closs.g2);

      // actor (a1 from the pre-update policy of this iteration)
      PolicyLoss aloss;
      if (agent.is_meanflow()) {
        MeanFlowBatch mb;
        mb.s = batch.s;
        mb.a1 = one_step_sample_batch(agent.meanflow, batch.s, loss_rng);
        mb.a0 = sample_prior(agent.meanflow, batch.s.rows(), loss_rng);
        mb.r.resize(batch.s.rows());
        mb.t.resize(batch.s.rows());
        for (Eigen::Index i = 0; i < mb.r.size(); ++i) {
          const auto [r, t] = sample_rt(rt_schedule, loss_rng);
          mb.r(i) = r;
          mb.t(i) = t;
        }
        const Vector q = q_min_online(agent.critic, batch.s, mb.a1);
        aloss = mpmd_loss(agent.meanflow, agent.meanflow.net, mb, q, cfg.lambda,
                          meanflow_convention_from_string(cfg.meanflow_convention));
        if (!std::isfinite(aloss.loss)) {
          metrics << json{{"iter", e}, {"error", "non_finite_actor_loss"}}.dump() << "\n";
          throw std::runtime_error("train: non-finite actor loss at iteration " +
                                   std::to_string(e));
        }
        adam_step(actor_opt, agent.meanflow.net, aloss.grads);
      } else {
        FlowBatch fb;
        fb.s = batch.s;
        const Batch a0_walk = sample_prior(agent.flow, batch.s.rows(), loss_rng);
        fb.a1 = euler_sample_batch(agent.flow, batch.s, a0_walk, cfg.k_train);
        fb.a0 = sample_prior(agent.flow, batch.s.rows(), loss_rng);
        fb.t.resize(batch.s.rows());
        for (Eigen::Index i = 0; i < fb.t.size(); ++i) fb.t(i) = loss_rng.uniform();
        const Vector q = q_min_online(agent.critic, batch.s, fb.a1);
        aloss = fpmd_loss(agent.flow, fb, q, cfg.lambda);
        if (!std::isfinite(aloss.loss)) {
          metrics << json{{"iter", e}, {"error", "non_finite_actor_loss"}}.dump() << "\n";
          throw std::runtime_error("train: non-finite actor loss at iteration " +
                                   std::to_string(e));
        }
        adam_step(actor_opt, agent.flow.net, aloss.grads);
      }

      polyak_update(agent.critic, cfg.tau);

      critic_loss_sum += closs.loss;
      actor_loss_sum += aloss.loss;
      weight_sum += aloss.mean_weight;
      ++update_count;
    }

    agent.iteration = e;

    if (e % cfg.eval_every == 0 || e == cfg.total_iters) {
      const EvalResult ev = evaluate(agent, cfg.env, cfg.eval_episodes, cfg.k_eval,
                                     derive_seed(cfg.seed, 0x20000 + static_cast<std::uint64_t>(e)));
      last_eval_return = ev.mean_return;
      write_metrics(e, sigma_now, ev);
    }
    if (cfg.ckpt_every > 0 && e % cfg.ckpt_every == 0 && e != cfg.total_iters)
      save_agent(agent, (fs::path(out_dir) / ("ckpt_" + std::to_string(e))).string());
  }

  const std::string final_dir = (fs::path(out_dir) / "ckpt_final").string();
  save_agent(agent, final_dir);

  TrainResult res;
  res.metrics_path = metrics_path;
  res.final_checkpoint_dir = final_dir;
  res.final_eval_return = last_eval_return;
  res.iterations = cfg.total_iters;
  return res;
}

void save_agent(const Agent& agent, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream cfg_out(fs::path(dir) / "config.txt");
  if (!cfg_out) throw std::runtime_error("save_agent: cannot write config to " + dir);
  cfg_out << config_to_text(agent.cfg);
  cfg_out.close();

  std::vector<NamedParams> nets;
  if (agent.is_meanflow())
    nets.push_back({"actor", agent.meanflow.net});
  else
    nets.push_back({"actor", agent.flow.net});
  nets.push_back({"q1", agent.critic.q1});
  nets.push_back({"q2", agent.critic.q2});
  nets.push_back({"q1_target", agent.critic.q1_target});
  nets.push_back({"q2_target", agent.critic.q2_target});

  save_checkpoint(dir, nets,
                  {{"variant", agent.cfg.variant},
                   {"env", agent.cfg.env},
                   {"iteration", std::to_string(agent.iteration)}});
}

Agent load_agent(const std::string& dir) {
  const TrainConfig cfg = parse_config_file((fs::path(dir) / "config.txt").string());
  Agent agent = make_agent(cfg);
  const Checkpoint ckpt = load_checkpoint(dir);
  if (agent.is_meanflow())
    agent.meanflow.net = ckpt.net("actor");
  else
    agent.flow.net = ckpt.net("actor");
  agent.critic.q1 = ckpt.net("q1");
  agent.critic.q2 = ckpt.net("q2");
  agent.critic.q1_target = ckpt.net("q1_target");
  agent.critic.q2_target = ckpt.net("q2_target");
  if (auto it = ckpt.meta.find("iteration"); it != ckpt.meta.end())
    agent.iteration = std::stoll(it->second);
  return agent;
}

}  // namespace fpmd
