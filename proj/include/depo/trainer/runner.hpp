#pragma once

// Training loops: single agent, shared-planner co-training, planner transfer and RL mode.

#include "depo/approx/adam.hpp"
#include "depo/approx/checkpoint.hpp"
#include "depo/trainer/grid_agent.hpp"
#include "depo/trainer/pointmass_agent.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace depo::trainer {

/// Observer of every shared planner step: per-agent combined gradients and the gradient applied.
using PlannerStepHook = std::function<void(const std::vector<Vector>& per_agent, const Vector& applied)>;

struct RunOptions {
  PlannerStepHook on_planner_step;
  bool freeze_planner = false;
  const approx::Checkpoint* planner_source = nullptr;  // loaded into the shared planner before training
};

struct RunResult {
  std::vector<MetricsLog> logs;              // one per agent
  std::vector<approx::Checkpoint> finals;    // one per agent
  ParamVector initial_planner;               // shared planner at the start of the online stage
  ParamVector final_planner;
};

/// Uniform mean of per-agent gradients: left-to-right sum, then one division.
inline Vector mean_gradient(const std::vector<Vector>& grads) {
  if (grads.empty()) throw PreconditionError("no gradients to average");
  Vector sum = grads.front();
  for (std::size_t i = 1; i < grads.size(); ++i) {
    if (grads[i].size() != sum.size()) throw DimensionError("agents disagree on planner size");
    sum += grads[i];
  }
  if (grads.size() == 1) return sum;
  return sum / static_cast<double>(grads.size());
}

/// Seed of agent i within a run.
inline std::uint64_t agent_seed(std::uint64_t run_seed, std::size_t i) { return derive_seed(run_seed, 1000 + i); }

inline void load_planner(ParamVector& psi, const approx::Checkpoint& ck) {
  const auto& src = ck.net("planner");
  if (!(src.layout() == psi.layout())) throw DimensionError("planner checkpoint does not match this state space");
  psi = src;
}

template <class Agent>
MetricsRow make_row(Agent& agent, int epoch) {
  MetricsRow r;
  r.epoch = epoch;
  r.env_steps = agent.env_steps();
  const auto ev = agent.evaluate();
  r.mean_return = ev.mean_return;
  r.success_rate = ev.success_rate;
  r.planner_mse = ev.planner_mse;
  auto& l = agent.losses();
  r.disc_loss = l.disc.take();
  r.q_loss = l.q.take();
  r.inverse_loss = l.inverse.take();
  r.supervised_loss = l.supervised.take();
  r.cdepg_loss = l.cdepg.take();
  r.policy_loss = l.policy.take();
  const auto& c = agent.counters();
  r.disc_updates = c.disc;
  r.planner_updates = c.planner;
  r.q_updates = c.q;
  r.inverse_updates = c.inverse;
  return r;
}

/// Shared-planner loop over agents of one environment family. With one agent this is the
/// plain pre-training plus online training loop.
template <class Agent>
RunResult train_agents(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& config_hash,
                       const RunOptions& opt = {}) {
  const auto& agent_specs = cfg.agents;
  std::vector<std::unique_ptr<Agent>> agents;
  for (std::size_t i = 0; i < agent_specs.size(); ++i)
    agents.push_back(std::make_unique<Agent>(cfg, agent_specs[i], agent_seed(seed, i)));

  RunResult out;
  for (auto& a : agents) {
    MetricsLog log;
    log.agent = a->id();
    log.seed = seed;
    log.config_hash = config_hash;
    out.logs.push_back(std::move(log));
  }
  const bool planner = cfg.uses_planner();
  ParamVector shared = agents.front()->policy().psi();
  if (opt.planner_source) load_planner(shared, *opt.planner_source);
  for (auto& a : agents) {
    a->policy().psi() = shared;
    a->refresh_planner();
  }
  out.initial_planner = shared;
  approx::Adam adam(shared.size(), {cfg.optim.lr_policy});

  const auto& tc = cfg.training;
  if (tc.epochs > 0) {
    for (auto& a : agents) {
      a->collect(tc.warmup_steps, true);
      a->train_inverse();
    }
    for (std::size_t i = 0; i < agents.size(); ++i) out.logs[i].rows.push_back(make_row(*agents[i], 0));

    std::vector<Vector> grads(agents.size());
    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
      for (auto& a : agents) a->collect(tc.env_steps_per_epoch, false);
      if (epoch % cfg.inverse.interval == 0)
        for (auto& a : agents) a->train_inverse();
      for (int g = 0; g < tc.grad_steps_per_epoch; ++g) {
        for (auto& a : agents) {
          a->begin_step();
          a->update_discriminator();
          a->update_q();
        }
        if (planner && !opt.freeze_planner) {
          for (std::size_t i = 0; i < agents.size(); ++i) grads[i] = agents[i]->planner_gradient().combined;
          const Vector applied = mean_gradient(grads);
          if (!applied.allFinite()) throw NumericalError("planner gradient became non-finite");
          if (opt.on_planner_step) opt.on_planner_step(grads, applied);
          adam.step(shared, applied);
          for (auto& a : agents) {
            a->policy().psi() = shared;
            a->refresh_planner();
            a->count_planner_update();
          }
        }
        for (auto& a : agents) a->policy_step();
      }
      if (epoch % tc.eval_every == 0 || epoch == tc.epochs)
        for (std::size_t i = 0; i < agents.size(); ++i) out.logs[i].rows.push_back(make_row(*agents[i], epoch));
    }
  }
  out.final_planner = shared;
  for (auto& a : agents) out.finals.push_back(a->checkpoint());
  return out;
}

template <class F>
decltype(auto) with_env_family(const ExperimentConfig& cfg, F&& f) {
  if (cfg.agents.front().type == EnvType::grid) return f.template operator()<GridAgent>();
  return f.template operator()<PointMassAgent>();
}

inline RunResult run_algorithm1(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& config_hash = {},
                                const RunOptions& opt = {}) {
  if (cfg.agents.size() != 1) throw InvariantError("a single-agent run takes exactly one environment");
  return with_env_family(cfg, [&]<class A>() { return train_agents<A>(cfg, seed, config_hash, opt); });
}

inline RunResult cotrain_run(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& config_hash = {},
                             const RunOptions& opt = {}) {
  if (cfg.agents.empty()) throw InvariantError("co-training needs at least one agent");
  for (const auto& a : cfg.agents)
    if (a.type != cfg.agents.front().type) throw DimensionError("co-trained agents must share one state space");
  return with_env_family(cfg, [&]<class A>() { return train_agents<A>(cfg, seed, config_hash, opt); });
}

/// Loads the planner from `planner`, keeps it frozen and trains fresh I, Q and D on the new dynamics.
inline RunResult transfer_run(const ExperimentConfig& cfg, const approx::Checkpoint& planner, std::uint64_t seed,
                              const std::string& config_hash = {}, RunOptions opt = {}) {
  opt.freeze_planner = true;
  opt.planner_source = &planner;
  return run_algorithm1(cfg, seed, config_hash, opt);
}

inline RunResult rl_mode_run(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& config_hash = {},
                             const RunOptions& opt = {}) {
  if (cfg.mode != Mode::rl) throw InvariantError("RL mode needs mode = rl");
  return run_algorithm1(cfg, seed, config_hash, opt);
}

/// Runner named by the config.
inline RunResult run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& config_hash = {},
                                const RunOptions& opt = {}) {
  switch (cfg.runner) {
    case Runner::transfer: {
      if (cfg.planner_checkpoint.empty()) throw InvariantError("transfer needs planner_checkpoint");
      const auto ck = approx::load_checkpoint(cfg.planner_checkpoint);
      return transfer_run(cfg, ck, seed, config_hash, opt);
    }
    case Runner::cotrain:
      return cotrain_run(cfg, seed, config_hash, opt);
    case Runner::algorithm1:
      break;
  }
  if (cfg.mode == Mode::rl) return rl_mode_run(cfg, seed, config_hash, opt);
  return run_algorithm1(cfg, seed, config_hash, opt);
}

}  // namespace depo::trainer
