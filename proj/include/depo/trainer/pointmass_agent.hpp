#pragma once

// One learner on the point mass.

#include "depo/adversarial/discriminator.hpp"
#include "depo/approx/adam.hpp"
#include "depo/approx/checkpoint.hpp"
#include "depo/decoupled/continuous.hpp"
#include "depo/decoupled/qfunction.hpp"
#include "depo/envs/demonstrations.hpp"
#include "depo/envs/pointmass.hpp"
#include "depo/trainer/agent_common.hpp"
#include "depo/trainer/replay_buffer.hpp"

#include <vector>

namespace depo::trainer {

struct PointMassTransition {
  Vector s;
  Vector a;  // raw action clipped to [-1, 1]
  Vector next;
  double reward = 0.0;
  bool done = false;
};

class PointMassAgent {
 public:
  using Transition = PointMassTransition;

  PointMassAgent(const ExperimentConfig& cfg, const EnvSpec& env, std::uint64_t seed)
      : cfg_(cfg),
        env_(env.pointmass),
        buffer_(static_cast<std::size_t>(cfg.training.buffer_capacity)),
        rng_env_(derive_seed(seed, kEnvStream)),
        rng_batch_(derive_seed(seed, kBatchStream)),
        rng_noise_(derive_seed(seed, kNoiseStream)),
        eval_seed_(derive_seed(seed, kEvalStream)) {
    if (env.type != EnvType::pointmass) throw PreconditionError("point-mass agent needs a point-mass environment");
    Rng init(derive_seed(seed, kInitStream));
    const auto& net = cfg.networks;
    const auto sd = env_.state_dim();
    const auto ad = env_.action_dim();
    decoupled::ContinuousPolicyShape shape{sd, ad, net.planner_hidden, net.inverse_hidden, net.planner_residual_scale,
                                           net.inverse_delta_scale};
    policy_ = decoupled::ContinuousDecoupledPolicy(shape);
    policy_.init_planner(init);
    policy_.init_inverse(init);
    if (!cfg.uses_planner()) {
      mono_ = decoupled::ContinuousMonolithicPolicy(sd, ad, net.policy_hidden);
      mono_.init(init);
      adam_mono_ = approx::Adam(mono_.theta().size(), {cfg.optim.lr_policy});
    }
    q_ = decoupled::TwinQ(sd, ad, net.q_hidden);
    q_.init(init);
    disc_ = adversarial::MlpDiscriminator(sd, net.disc_hidden, cfg.objective.swap_discriminator_labels);
    disc_.init(init);
    adam_q_ = approx::Adam(q_.params().size(), {cfg.optim.lr_q});
    adam_d_ = approx::Adam(disc_.params().size(), {cfg.optim.lr_disc});
    adam_inv_ = approx::Adam(policy_.phi().size(), {cfg.optim.lr_inverse});
    adam_phi_pg_ = approx::Adam(policy_.phi().size(), {cfg.optim.lr_policy});

    if (cfg.mode == Mode::imitation || cfg.variant == Variant::bco) {
      // State-only demonstrations do not depend on the action transform.
      envs::PointMassConfig expert_cfg = env.pointmass;
      expert_cfg.transform = envs::ActionTransform::normal;
      const envs::PointMass expert_env(expert_cfg);
      const envs::Controller pd = [](const Vector& s) { return envs::pointmass_expert_action({}, s); };
      const auto demo = envs::collect_pointmass_demonstrations(expert_env, pd, static_cast<std::size_t>(cfg.training.n_demos),
                                                               derive_seed(seed, kDemoStream));
      const auto [s, n] = demo.pairs();
      expert_s_ = s;
      expert_next_ = n;
    }
  }

  const envs::PointMass& env() const { return env_; }
  std::string id() const { return "pointmass-" + envs::to_string(env_.config().transform); }
  long env_steps() const { return env_steps_; }
  const UpdateCounters& counters() const { return counters_; }
  AgentLosses& losses() { return losses_; }
  decoupled::ContinuousDecoupledPolicy& policy() { return policy_; }
  const decoupled::ContinuousDecoupledPolicy& policy() const { return policy_; }
  const decoupled::ContinuousMonolithicPolicy& monolithic() const { return mono_; }
  const decoupled::TwinQ& q() const { return q_; }
  const adversarial::MlpDiscriminator& discriminator() const { return disc_; }
  const ReplayBuffer<PointMassTransition>& buffer() const { return buffer_; }
  const Matrix& expert_states() const { return expert_s_; }
  const Matrix& expert_next() const { return expert_next_; }

  void reset_inverse(std::uint64_t seed) {
    Rng r(seed);
    policy_.init_inverse(r);
    adam_inv_ = approx::Adam(policy_.phi().size(), {cfg_.optim.lr_inverse});
  }

  // ---- interaction -------------------------------------------------------------------------

  void collect(int steps, bool random) {
    for (int i = 0; i < steps; ++i) {
      if (episode_done_) {
        state_ = env_.sample_start(rng_env_);
        episode_t_ = 0;
        episode_done_ = false;
      }
      Vector a(env_.action_dim());
      if (random) {
        for (Eigen::Index j = 0; j < a.size(); ++j) a(j) = uniform(rng_env_, -1.0, 1.0);
      } else if (cfg_.uses_planner()) {
        a = decoupled::act(policy_, state_, rng_env_).action;
      } else {
        a = mono_.act(state_, rng_env_);
      }
      a = a.cwiseMax(-1.0).cwiseMin(1.0);
      const Vector next = env_.step(state_, a);
      buffer_.push({state_, a, next, env_.reward(next), false});
      ++env_steps_;
      ++episode_t_;
      episode_done_ = episode_t_ >= env_.horizon();
      state_ = next;
    }
  }

  // ---- inverse dynamics --------------------------------------------------------------------

  void train_inverse() {
    if (!cfg_.trains_inverse_by_likelihood() || buffer_.empty()) return;
    const auto& ic = cfg_.inverse;
    double best = std::numeric_limits<double>::infinity();
    int stall = 0;
    for (int ep = 0; ep < ic.max_epochs; ++ep) {
      double total = 0.0;
      for (int b = 0; b < ic.batches_per_epoch; ++b) {
        sample_batch();
        const auto lg = decoupled::inverse_dynamics_loss(policy_, bs_, ba_, bn_);
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
    if (cfg_.variant == Variant::bco) relabel();
  }

  // ---- gradient step pieces ----------------------------------------------------------------

  void begin_step() { sample_batch(); }

  void update_discriminator() {
    if (!cfg_.uses_discriminator()) return;
    Matrix es, en;
    expert_minibatch(es, en);
    const auto l = disc_.loss(bs_, bn_, es, en, cfg_.objective.gp_weight, rng_noise_);
    require_finite(l.total, "discriminator loss");
    adam_d_.step(disc_.params(), l.grad);
    ++counters_.disc;
    losses_.disc.add(l.total);
  }

  /// Twin-Q TD step toward r + gamma (1 - done) (min Q_targ(s', a') - alpha log p), a' from the
  /// current policy; for the decoupled policy log p is the planner log-density of its sample.
  void update_q() {
    if (!cfg_.uses_q()) return;
    const auto B = bs_.cols();
    Matrix an(env_.action_dim(), B);
    Vector logp = Vector::Zero(B);
    const double alpha = cfg_.objective.entropy_weight;
    if (cfg_.uses_planner()) {
      const Matrix e1 = standard_normal(rng_noise_, env_.state_dim(), B);
      const Matrix e2 = standard_normal(rng_noise_, env_.action_dim(), B);
      auto [hm, hl] = policy_.planner().forward(policy_.psi(), bn_);
      const Matrix plan = hm + (hl.array().exp() * e1.array()).matrix();
      an = policy_.inverse().sample(policy_.phi(), policy_.inverse_input(bn_, plan), e2);
      if (alpha != 0.0) logp = (-0.5 * e1.array().square() - hl.array()).colwise().sum().transpose() - 0.5 * e1.rows() * std::log(2.0 * M_PI);
    } else {
      const Matrix e = standard_normal(rng_noise_, env_.action_dim(), B);
      auto [m, l] = mono_.head().forward(mono_.theta(), bn_);
      an = m + (l.array().exp() * e.array()).matrix();
      if (alpha != 0.0) logp = (-0.5 * e.array().square() - l.array()).colwise().sum().transpose() - 0.5 * e.rows() * std::log(2.0 * M_PI);
    }
    an = an.cwiseMax(-1.0).cwiseMin(1.0);
    const Matrix qn = q_.min_q(bn_, an, true);
    Vector y(B);
    for (Eigen::Index b = 0; b < B; ++b)
      y(b) = reward(b) + cfg_.objective.gamma * (bd_[static_cast<std::size_t>(b)] ? 0.0 : qn(0, b) - alpha * logp(b));
    const auto lg = q_.td_loss(bs_, ba_, y);
    require_finite(lg.loss, "TD loss");
    adam_q_.step(q_.params(), lg.grad);
    approx::soft_update(q_.target(), q_.params(), cfg_.optim.tau);
    ++counters_.q;
    losses_.q.add(lg.loss);
  }

  decoupled::GradientReport planner_gradient() {
    const Vector zero = Vector::Zero(policy_.psi().size());
    switch (cfg_.variant) {
      case Variant::depo_supervised: {
        Matrix es, en;
        expert_minibatch(es, en);
        const auto sup = decoupled::supervised_planner_loss(policy_, es, en);
        losses_.supervised.add(sup.loss);
        return decoupled::assemble(zero, sup.grad, zero, 1.0);
      }
      case Variant::agnostic_depg:
        return decoupled::assemble(depg(), zero, zero, 0.0);
      case Variant::gaifo_dp: {
        auto g = pathwise();
        phi_grad_ = std::move(g.phi);
        return decoupled::assemble(std::move(g.psi), zero, zero, 0.0);
      }
      default: {
        Vector sup = zero;
        if (cfg_.mode == Mode::imitation) {
          Matrix es, en;
          expert_minibatch(es, en);
          const auto s = decoupled::supervised_planner_loss(policy_, es, en);
          losses_.supervised.add(s.loss);
          sup = s.grad;
        }
        const Vector qb = q_.min_q(bs_, ba_).row(0).transpose();
        const auto cd = decoupled::cdepg_gradient(policy_, bs_, bn_, qb);
        losses_.cdepg.add(cd.loss);
        return decoupled::assemble(depg(), std::move(sup), cd.grad, cfg_.objective.lambda_h);
      }
    }
  }

  void policy_step() {
    switch (cfg_.variant) {
      case Variant::gaifo: {
        const Matrix eps = standard_normal(rng_noise_, env_.action_dim(), bs_.cols());
        const auto l = decoupled::soft_policy_loss(mono_, q_, bs_, eps, cfg_.objective.entropy_weight);
        require_finite(l.loss, "policy loss");
        adam_mono_.step(mono_.theta(), l.grad);
        losses_.policy.add(l.loss);
        break;
      }
      case Variant::gaifo_dp:
        adam_phi_pg_.step(policy_.phi(), phi_grad_);
        break;
      case Variant::bco: {
        if (labels_.cols() != expert_s_.cols()) relabel();
        const auto n = static_cast<std::size_t>(expert_s_.cols());
        const auto idx = sample_distinct(std::min<std::size_t>(n, static_cast<std::size_t>(cfg_.training.batch_size)), n, rng_batch_);
        Matrix s(expert_s_.rows(), static_cast<Eigen::Index>(idx.size())), a(labels_.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) {
          s.col(static_cast<Eigen::Index>(i)) = expert_s_.col(static_cast<Eigen::Index>(idx[i]));
          a.col(static_cast<Eigen::Index>(i)) = labels_.col(static_cast<Eigen::Index>(idx[i]));
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

  EvalResult evaluate() {
    Rng rng(eval_seed_);
    EvalResult r;
    double mse = 0.0, returns = 0.0;
    long transitions = 0;
    int successes = 0;
    for (int ep = 0; ep < cfg_.training.eval_episodes; ++ep) {
      Vector s = env_.sample_start(rng);
      for (int t = 0; t < env_.horizon(); ++t) {
        Vector a;
        Vector planned;
        if (cfg_.uses_planner()) {
          const auto c = decoupled::act_deterministic(policy_, s);
          a = c.action;
          planned = c.planned;
        } else {
          a = mono_.act_deterministic(s);
        }
        const Vector next = env_.step(s, a);
        if (planned.size()) {
          mse += (planned - next).squaredNorm();
          ++transitions;
        }
        returns += env_.reward(next);
        s = next;
        if (env_.in_goal(s)) {
          ++successes;
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

  void refresh_planner() {}

 private:
  void sample_batch() {
    const auto n = std::min<std::size_t>(buffer_.size(), static_cast<std::size_t>(cfg_.training.batch_size));
    const auto idx = buffer_.sample_indices(n, rng_batch_);
    const auto B = static_cast<Eigen::Index>(n);
    bs_.resize(env_.state_dim(), B);
    bn_.resize(env_.state_dim(), B);
    ba_.resize(env_.action_dim(), B);
    br_.resize(B);
    bd_.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& t = buffer_.at(idx[i]);
      const auto j = static_cast<Eigen::Index>(i);
      bs_.col(j) = t.s;
      ba_.col(j) = t.a;
      bn_.col(j) = t.next;
      br_(j) = t.reward;
      bd_[i] = t.done;
    }
  }

  void expert_minibatch(Matrix& s, Matrix& n) {
    const auto N = static_cast<std::size_t>(expert_s_.cols());
    const auto idx = sample_distinct(std::min<std::size_t>(N, static_cast<std::size_t>(cfg_.training.batch_size)), N, rng_batch_);
    s.resize(expert_s_.rows(), static_cast<Eigen::Index>(idx.size()));
    n.resize(expert_s_.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s.col(static_cast<Eigen::Index>(i)) = expert_s_.col(static_cast<Eigen::Index>(idx[i]));
      n.col(static_cast<Eigen::Index>(i)) = expert_next_.col(static_cast<Eigen::Index>(idx[i]));
    }
  }

  double reward(Eigen::Index b) const {
    if (cfg_.mode == Mode::rl) return br_(b);
    return adversarial::reward_from_logit(disc_.logits(bs_.col(b), bn_.col(b))(0, 0), cfg_.objective.reward_scale);
  }

  decoupled::PathwiseGradient pathwise() {
    const Matrix e1 = standard_normal(rng_noise_, env_.state_dim(), bs_.cols());
    const Matrix e2 = standard_normal(rng_noise_, env_.action_dim(), bs_.cols());
    return decoupled::pathwise_policy_gradient(policy_, q_, bs_, e1, e2, cfg_.objective.entropy_weight);
  }

  Vector depg() {
    if (cfg_.objective.depg_estimator == DepgEstimator::pathwise) return pathwise().psi;
    const auto M = static_cast<Eigen::Index>(cfg_.objective.mc_samples);
    const Matrix eps = standard_normal(rng_noise_, env_.state_dim(), bs_.cols() * M);
    const Vector qb = q_.min_q(bs_, ba_).row(0).transpose();
    return decoupled::depg_gradient(policy_, bs_, ba_, qb, eps, M, {cfg_.objective.iw_clip, cfg_.objective.iw_floor});
  }

  void relabel() {
    labels_ = policy_.inverse_mean(expert_s_, expert_next_).cwiseMax(-1.0).cwiseMin(1.0);
  }

  ExperimentConfig cfg_;
  envs::PointMass env_;
  decoupled::ContinuousDecoupledPolicy policy_;
  decoupled::ContinuousMonolithicPolicy mono_;
  decoupled::TwinQ q_;
  adversarial::MlpDiscriminator disc_;
  approx::Adam adam_q_, adam_d_, adam_inv_, adam_phi_pg_, adam_mono_;
  ReplayBuffer<PointMassTransition> buffer_;
  Matrix expert_s_, expert_next_, labels_;

  Matrix bs_, ba_, bn_;
  Vector br_;
  std::vector<bool> bd_;
  Vector phi_grad_;

  Rng rng_env_;
  Rng rng_batch_;
  Rng rng_noise_;
  std::uint64_t eval_seed_;
  Vector state_;
  int episode_t_ = 0;
  bool episode_done_ = true;
  long env_steps_ = 0;
  UpdateCounters counters_;
  AgentLosses losses_;
};

}  // namespace depo::trainer
