#pragma once

// One learner on the grid world: buffers, modules and optimizers for every variant.

#include "depo/adversarial/discriminator.hpp"
#include "depo/approx/adam.hpp"
#include "depo/approx/checkpoint.hpp"
#include "depo/decoupled/qfunction.hpp"
#include "depo/decoupled/tabular.hpp"
#include "depo/envs/demonstrations.hpp"
#include "depo/envs/gridworld.hpp"
#include "depo/trainer/agent_common.hpp"
#include "depo/trainer/replay_buffer.hpp"

#include <cmath>
#include <vector>

namespace depo::trainer {

struct GridTransition {
  int s = 0;
  int a = 0;
  int next = 0;
  double reward = 0.0;
  bool done = false;
};

class GridAgent {
 public:
  using Transition = GridTransition;

  GridAgent(const ExperimentConfig& cfg, const EnvSpec& env, std::uint64_t seed)
      : cfg_(cfg),
        gw_(env.grid),
        buffer_(static_cast<std::size_t>(cfg.training.buffer_capacity)),
        rng_env_(derive_seed(seed, kEnvStream)),
        rng_batch_(derive_seed(seed, kBatchStream)),
        eval_seed_(derive_seed(seed, kEvalStream)) {
    if (env.type != EnvType::grid) throw PreconditionError("grid agent needs a grid environment");
    Rng init(derive_seed(seed, kInitStream));
    const auto& net = cfg.networks;
    policy_ = decoupled::TabularDecoupledPolicy(gw_.feature_matrix(), gw_.n_actions(), net.planner_hidden, net.inverse_hidden);
    policy_.init_planner(init);
    policy_.init_inverse(init);
    if (!cfg.uses_planner()) {
      mono_ = decoupled::TabularMonolithicPolicy(gw_.feature_matrix(), gw_.n_actions(), net.policy_hidden);
      mono_.init(init);
      adam_mono_ = approx::Adam(mono_.theta().size(), {cfg.optim.lr_policy});
    }
    q_ = decoupled::TabularQ(gw_.n_states(), gw_.n_actions());
    disc_ = adversarial::TabularDiscriminator(gw_.n_states(), cfg.objective.swap_discriminator_labels);
    adam_q_ = approx::Adam(q_.params().size(), {cfg.optim.lr_q});
    adam_d_ = approx::Adam(disc_.params().size(), {cfg.optim.lr_disc});
    adam_inv_ = approx::Adam(policy_.phi().size(), {cfg.optim.lr_inverse});
    adam_phi_pg_ = approx::Adam(policy_.phi().size(), {cfg.optim.lr_policy});

    if (cfg.mode == Mode::imitation || cfg.variant == Variant::bco) {
      const auto demo = envs::collect_grid_demonstrations(gw_, gw_.expert_policy(), static_cast<std::size_t>(cfg.training.n_demos),
                                                          derive_seed(seed, kDemoStream));
      for (const auto& traj : demo.trajectories)
        for (Eigen::Index t = 0; t + 1 < traj.cols(); ++t) {
          expert_.s.push_back(state_of(traj.col(t)));
          expert_.next.push_back(state_of(traj.col(t + 1)));
        }
    }
    refresh_planner();
    refresh_inverse();
  }

  const envs::GridWorld& env() const { return gw_; }
  std::string id() const { return "grid-k" + std::to_string(gw_.k()); }
  long env_steps() const { return env_steps_; }
  const UpdateCounters& counters() const { return counters_; }
  AgentLosses& losses() { return losses_; }
  decoupled::TabularDecoupledPolicy& policy() { return policy_; }
  const decoupled::TabularDecoupledPolicy& policy() const { return policy_; }
  const decoupled::TabularMonolithicPolicy& monolithic() const { return mono_; }
  const decoupled::TabularQ& q() const { return q_; }
  const adversarial::TabularDiscriminator& discriminator() const { return disc_; }
  const ReplayBuffer<GridTransition>& buffer() const { return buffer_; }
  const decoupled::TabularPairBatch& expert() const { return expert_; }
  const Matrix& planner_table() const { return planner_table_; }
  const decoupled::InverseTable& inverse_table() const { return inv_table_; }

  /// Reinitializes I (and its optimizer) from `seed`; used when the action space changes.
  void reset_inverse(std::uint64_t seed) {
    Rng r(seed);
    policy_.init_inverse(r);
    adam_inv_ = approx::Adam(policy_.phi().size(), {cfg_.optim.lr_inverse});
    refresh_inverse();
  }

  // ---- interaction -------------------------------------------------------------------------

  void collect(int steps, bool random) {
    if (!random) refresh_planner();
    for (int i = 0; i < steps; ++i) {
      if (episode_done_) {
        state_ = gw_.sample_start(rng_env_);
        episode_t_ = 0;
        episode_done_ = false;
      }
      int a = 0;
      if (random) {
        a = static_cast<int>(uniform_index(rng_env_, static_cast<std::size_t>(gw_.n_actions())));
      } else if (cfg_.uses_planner()) {
        a = decoupled::act(planner_table_, inv_table_, state_, rng_env_).action;
      } else {
        const Eigen::RowVectorXd p = mono_table_.row(state_);
        a = static_cast<int>(sample_categorical(rng_env_, p));
      }
      const int next = gw_.next_state(state_, a);
      const bool done = next == gw_.goal();
      buffer_.push({state_, a, next, done ? 1.0 : 0.0, done});
      ++env_steps_;
      ++episode_t_;
      episode_done_ = done || episode_t_ >= gw_.horizon();
      state_ = next;
    }
  }

  // ---- inverse dynamics --------------------------------------------------------------------

  /// Minibatch NLL epochs until the epoch loss stops improving by `tol` for `patience` epochs.
  void train_inverse() {
    if (!cfg_.trains_inverse_by_likelihood() || buffer_.empty()) return;
    const auto& ic = cfg_.inverse;
    double best = std::numeric_limits<double>::infinity();
    int stall = 0;
    for (int ep = 0; ep < ic.max_epochs; ++ep) {
      double total = 0.0;
      for (int b = 0; b < ic.batches_per_epoch; ++b) {
        const auto batch = sample_transitions();
        const auto lg = decoupled::inverse_dynamics_loss(policy_, batch);
        require_finite(lg.loss, "inverse dynamics loss");
        adam_inv_.step(policy_.phi(), lg.grad);
        ++counters_.inverse;
        total += lg.loss;
      }
      const double loss = total / ic.batches_per_epoch;
      losses_.inverse.add(loss);
      stall = best - loss < ic.tol ? stall + 1 : 0;
      best = std::min(best, loss);
      if (stall >= ic.patience) break;
    }
    refresh_inverse();
    if (cfg_.variant == Variant::bco) labels_ = decoupled::label_actions(inv_table_, expert_);
  }

  // ---- gradient step pieces ----------------------------------------------------------------

  /// Draws the shared minibatch for this gradient step and refreshes the planner table.
  void begin_step() {
    refresh_planner();
    batch_ = sample_transitions();
  }

  void update_discriminator() {
    if (!cfg_.uses_discriminator()) return;
    const auto idx = sample_distinct(std::min(expert_.size(), batch_.size()), expert_.size(), rng_batch_);
    std::vector<int> es, en;
    for (auto i : idx) {
      es.push_back(expert_.s[i]);
      en.push_back(expert_.next[i]);
    }
    const auto l = disc_.loss(batch_.s, batch_.next, es, en);
    require_finite(l.total, "discriminator loss");
    adam_d_.step(disc_.params(), l.grad);
    ++counters_.disc;
    losses_.disc.add(l.total);
  }

  /// One soft TD step: y = r + gamma (1 - done) sum_a' pi(a'|s') (Q_targ(s',a') - alpha log pi(a'|s')).
  void update_q() {
    if (!cfg_.uses_q()) return;
    const Matrix pi = current_policy_table();
    const Matrix qt = q_.target_table();
    const double alpha = cfg_.objective.entropy_weight;
    Vector y(static_cast<Eigen::Index>(batch_.size()));
    for (std::size_t b = 0; b < batch_.size(); ++b) {
      const int n = batch_.next[b];
      double v = 0.0;
      for (int a = 0; a < gw_.n_actions(); ++a) {
        const double p = pi(n, a);
        if (p > 0.0) v += p * (qt(n, a) - alpha * std::log(p));
      }
      y(static_cast<Eigen::Index>(b)) = reward(b) + cfg_.objective.gamma * (done_[b] ? 0.0 : v);
    }
    const auto lg = q_.td_loss(batch_.s, batch_.a, y);
    require_finite(lg.loss, "TD loss");
    adam_q_.step(q_.params(), lg.grad);
    approx::soft_update(q_.target(), q_.params(), cfg_.optim.tau);
    ++counters_.q;
    losses_.q.add(lg.loss);
  }

  /// Planner gradient at the current psi for the configured variant.
  decoupled::GradientReport planner_gradient() {
    const auto n = policy_.psi().size();
    const Vector zero = Vector::Zero(n);
    const double lambda = cfg_.objective.lambda_h;
    const decoupled::TabularPairBatch pairs{batch_.s, batch_.next};
    switch (cfg_.variant) {
      case Variant::depo_supervised: {
        const auto sup = decoupled::supervised_planner_loss(policy_, expert_minibatch());
        losses_.supervised.add(sup.loss);
        return decoupled::assemble(zero, sup.grad, zero, 1.0);
      }
      case Variant::agnostic_depg:
        return decoupled::assemble(depg(), zero, zero, 0.0);
      case Variant::gaifo_dp: {
        auto [gpsi, gphi] = decoupled::end_to_end_policy_gradient(policy_, batch_.s, q_columns());
        phi_grad_ = std::move(gphi);
        return decoupled::assemble(std::move(gpsi), zero, zero, 0.0);
      }
      default: {
        Vector sup = zero;
        if (cfg_.mode == Mode::imitation) {
          const auto s = decoupled::supervised_planner_loss(policy_, expert_minibatch());
          losses_.supervised.add(s.loss);
          sup = s.grad;
        }
        const Matrix qtab = q_.table();
        Vector qb(static_cast<Eigen::Index>(batch_.size()));
        for (std::size_t b = 0; b < batch_.size(); ++b) qb(static_cast<Eigen::Index>(b)) = qtab(batch_.s[b], batch_.a[b]);
        const auto cd = decoupled::cdepg_gradient(policy_, pairs, qb);
        losses_.cdepg.add(cd.loss);
        return decoupled::assemble(depg(), std::move(sup), cd.grad, lambda);
      }
    }
  }

  /// Updates owned by the agent alone (monolithic policies, end-to-end inverse dynamics).
  void policy_step() {
    switch (cfg_.variant) {
      case Variant::gaifo: {
        const auto l = decoupled::soft_policy_loss(mono_, batch_.s, q_.table(), cfg_.objective.entropy_weight);
        require_finite(l.loss, "policy loss");
        adam_mono_.step(mono_.theta(), l.grad);
        losses_.policy.add(l.loss);
        break;
      }
      case Variant::gaifo_dp:
        adam_phi_pg_.step(policy_.phi(), phi_grad_);
        refresh_inverse();
        break;
      case Variant::bco: {
        if (labels_.empty()) labels_ = decoupled::label_actions(inv_table_, expert_);
        const auto idx = sample_distinct(std::min<std::size_t>(expert_.size(), static_cast<std::size_t>(cfg_.training.batch_size)),
                                         expert_.size(), rng_batch_);
        std::vector<int> s, a;
        for (auto i : idx) {
          s.push_back(expert_.s[i]);
          a.push_back(labels_[i]);
        }
        const auto l = decoupled::behavior_cloning_loss(mono_, s, a);
        require_finite(l.loss, "behaviour cloning loss");
        adam_mono_.step(mono_.theta(), l.grad);
        losses_.policy.add(l.loss);
        break;
      }
      default:
        break;
    }
  }

  void count_planner_update() { ++counters_.planner; }

  // ---- evaluation --------------------------------------------------------------------------

  /// Deterministic episodes from uniformly drawn starts; the start sequence is the same at every call.
  EvalResult evaluate() {
    refresh_planner();
    Rng rng(eval_seed_);
    EvalResult r;
    double mse = 0.0;
    long transitions = 0;
    int successes = 0;
    double returns = 0.0;
    for (int ep = 0; ep < cfg_.training.eval_episodes; ++ep) {
      int s = gw_.sample_start(rng);
      for (int t = 0; t < gw_.horizon(); ++t) {
        int a = 0;
        if (cfg_.uses_planner()) {
          const auto choice = decoupled::act_deterministic(planner_table_, inv_table_, s);
          a = choice.action;
          mse += (gw_.coords(choice.planned) - gw_.coords(gw_.next_state(s, a))).squaredNorm();
          ++transitions;
        } else {
          Eigen::Index k = 0;
          mono_table_.row(s).maxCoeff(&k);
          a = static_cast<int>(k);
        }
        s = gw_.next_state(s, a);
        if (s == gw_.goal()) {
          ++successes;
          returns += 1.0;
          break;
        }
      }
    }
    r.mean_return = returns / cfg_.training.eval_episodes;
    r.success_rate = static_cast<double>(successes) / cfg_.training.eval_episodes;
    if (transitions) r.planner_mse = mse / static_cast<double>(transitions);
    return r;
  }

  approx::Checkpoint checkpoint() const {
    approx::Checkpoint ck;
    ck.meta["env"] = id();
    ck.meta["variant"] = to_string(cfg_.variant);
    if (cfg_.uses_planner()) {
      ck.nets["planner"] = policy_.psi();
      ck.nets["inverse_dynamics"] = policy_.phi();
    } else {
      ck.nets["policy"] = mono_.theta();
      if (cfg_.variant == Variant::bco) ck.nets["inverse_dynamics"] = policy_.phi();
    }
    if (cfg_.uses_q()) ck.nets["q"] = q_.params();
    if (cfg_.uses_discriminator()) ck.nets["discriminator"] = disc_.params();
    return ck;
  }

  void refresh_planner() {
    if (cfg_.uses_planner()) planner_table_ = policy_.planner_table();
    else mono_table_ = mono_.policy_table();
  }
  void refresh_inverse() { inv_table_ = policy_.inverse_table(); }

 private:
  int state_of(const Eigen::VectorXd& xy) const {
    return gw_.index(envs::Cell{static_cast<int>(std::lround(xy(0))), static_cast<int>(std::lround(xy(1)))});
  }

  decoupled::TabularTransitionBatch sample_transitions() {
    const auto n = std::min<std::size_t>(buffer_.size(), static_cast<std::size_t>(cfg_.training.batch_size));
    decoupled::TabularTransitionBatch b;
    rewards_.clear();
    done_.clear();
    for (auto i : buffer_.sample_indices(n, rng_batch_)) {
      const auto& t = buffer_.at(i);
      b.s.push_back(t.s);
      b.a.push_back(t.a);
      b.next.push_back(t.next);
      rewards_.push_back(t.reward);
      done_.push_back(t.done);
    }
    return b;
  }

  double reward(std::size_t b) const {
    if (cfg_.mode == Mode::rl) return rewards_[b];
    return disc_.reward(batch_.s[b], batch_.next[b], cfg_.objective.reward_scale);
  }

  Matrix current_policy_table() const {
    return cfg_.uses_planner() ? decoupled::TabularDecoupledPolicy::compose(planner_table_, inv_table_) : mono_table_;
  }

  decoupled::TabularPairBatch expert_minibatch() {
    const auto idx = sample_distinct(std::min<std::size_t>(expert_.size(), static_cast<std::size_t>(cfg_.training.batch_size)),
                                     expert_.size(), rng_batch_);
    decoupled::TabularPairBatch out;
    for (auto i : idx) {
      out.s.push_back(expert_.s[i]);
      out.next.push_back(expert_.next[i]);
    }
    return out;
  }

  /// Q(s_b, .) as columns.
  Matrix q_columns() const {
    const Matrix qt = q_.table();
    Matrix C(gw_.n_actions(), static_cast<Eigen::Index>(batch_.size()));
    for (std::size_t b = 0; b < batch_.size(); ++b) C.col(static_cast<Eigen::Index>(b)) = qt.row(batch_.s[b]).transpose();
    return C;
  }

  Vector depg() {
    if (cfg_.objective.depg_estimator == DepgEstimator::expected)
      return decoupled::depg_gradient_expected(policy_, inv_table_, batch_.s, q_.table());
    const Matrix qt = q_.table();
    Vector qb(static_cast<Eigen::Index>(batch_.size()));
    for (std::size_t b = 0; b < batch_.size(); ++b) qb(static_cast<Eigen::Index>(b)) = qt(batch_.s[b], batch_.a[b]);
    return decoupled::depg_gradient(policy_, inv_table_, batch_, qb, {cfg_.objective.iw_clip, cfg_.objective.iw_floor});
  }

  ExperimentConfig cfg_;
  envs::GridWorld gw_;
  decoupled::TabularDecoupledPolicy policy_;
  decoupled::TabularMonolithicPolicy mono_;
  decoupled::TabularQ q_;
  adversarial::TabularDiscriminator disc_;
  approx::Adam adam_q_, adam_d_, adam_inv_, adam_phi_pg_, adam_mono_;
  ReplayBuffer<GridTransition> buffer_;
  decoupled::TabularPairBatch expert_;
  std::vector<int> labels_;

  Matrix planner_table_;
  Matrix mono_table_;
  decoupled::InverseTable inv_table_;

  decoupled::TabularTransitionBatch batch_;
  std::vector<double> rewards_;
  std::vector<bool> done_;
  Vector phi_grad_;

  Rng rng_env_;
  Rng rng_batch_;
  std::uint64_t eval_seed_;
  int state_ = 0;
  int episode_t_ = 0;
  bool episode_done_ = true;
  long env_steps_ = 0;
  UpdateCounters counters_;
  AgentLosses losses_;
};

}  // namespace depo::trainer
