#pragma once

// Decoupled policy over continuous states and actions: a Gaussian planner h(s'|s) with a
// residual mean and a Gaussian inverse dynamics I(a|s,s').

#include "depo/approx/adam.hpp"
#include "depo/approx/mlp.hpp"
#include "depo/approx/tape.hpp"
#include "depo/decoupled/common.hpp"
#include "depo/decoupled/qfunction.hpp"
#include "depo/random.hpp"

#include <cmath>
#include <vector>

namespace depo::decoupled {

using approx::GaussianHead;

struct ContinuousPolicyShape {
  Eigen::Index state_dim = 0;
  Eigen::Index action_dim = 0;
  std::vector<Eigen::Index> planner_hidden{64, 64};
  std::vector<Eigen::Index> inverse_hidden{64, 64};
  double planner_residual_scale = 1.0;  // mean = s + scale * net(s)
  double inverse_delta_scale = 1.0;     // I sees (s, scale * (s' - s))
};

class ContinuousDecoupledPolicy {
 public:
  ContinuousDecoupledPolicy() = default;
  explicit ContinuousDecoupledPolicy(ContinuousPolicyShape shape)
      : shape_(shape),
        planner_("planner", shape.state_dim, shape.planner_hidden, shape.state_dim, true, shape.planner_residual_scale),
        inverse_("inverse_dynamics", 2 * shape.state_dim, shape.inverse_hidden, shape.action_dim) {
    approx::ParamLayout lp, li;
    planner_.net().add_to(lp);
    inverse_.net().add_to(li);
    psi_ = ParamVector(lp);
    phi_ = ParamVector(li);
  }

  void init_planner(Rng& rng) { planner_.net().init(psi_, rng, 0.1); }
  void init_inverse(Rng& rng) { inverse_.net().init(phi_, rng, 0.1); }

  const ContinuousPolicyShape& shape() const { return shape_; }
  const GaussianHead& planner() const { return planner_; }
  const GaussianHead& inverse() const { return inverse_; }
  ParamVector& psi() { return psi_; }
  const ParamVector& psi() const { return psi_; }
  ParamVector& phi() { return phi_; }
  const ParamVector& phi() const { return phi_; }

  Matrix inverse_input(const Matrix& s, const Matrix& next) const {
    Matrix x(2 * s.rows(), s.cols());
    x << s, shape_.inverse_delta_scale * (next - s);
    return x;
  }
  approx::Var inverse_input(approx::Tape& t, approx::Var s, approx::Var next) const {
    return approx::concat_rows(t, s, approx::scale(t, approx::sub(t, next, s), shape_.inverse_delta_scale));
  }

  /// Planner mean for each column of s.
  Matrix plan_mean(const Matrix& s) const { return planner_.forward(psi_, s).first; }
  Matrix inverse_mean(const Matrix& s, const Matrix& next) const {
    return inverse_.forward(phi_, inverse_input(s, next)).first;
  }

 private:
  ContinuousPolicyShape shape_;
  GaussianHead planner_;
  GaussianHead inverse_;
  ParamVector psi_;
  ParamVector phi_;
};

struct ContinuousAction {
  Vector planned;
  Vector action;
};

/// Two-stage sample for one state.
inline ContinuousAction act(const ContinuousDecoupledPolicy& policy, const Vector& s, Rng& rng) {
  const Matrix sm = s;
  const Matrix next = policy.planner().sample(policy.psi(), sm, standard_normal(rng, s.size(), 1));
  const Matrix a = policy.inverse().sample(policy.phi(), policy.inverse_input(sm, next),
                                           standard_normal(rng, policy.shape().action_dim, 1));
  return {next.col(0), a.col(0)};
}

inline ContinuousAction act_deterministic(const ContinuousDecoupledPolicy& policy, const Vector& s) {
  const Matrix sm = s;
  const Matrix next = policy.plan_mean(sm);
  return {next.col(0), policy.inverse_mean(sm, next).col(0)};
}

/// Mean Gaussian negative log-likelihood of a under I(.|s,s').
inline LossGrad inverse_dynamics_loss(const ContinuousDecoupledPolicy& policy, const Matrix& s, const Matrix& a,
                                      const Matrix& next) {
  if (s.cols() == 0) throw PreconditionError("inverse dynamics loss needs a nonempty batch");
  approx::Tape t;
  auto out = policy.inverse().forward(t, policy.phi(), t.constant(policy.inverse_input(s, next)));
  auto loss = approx::scale(t, approx::mean(t, approx::gaussian_log_density(t, t.constant(a), out.mean, out.log_std)), -1.0);
  t.backward(loss);
  return {t.scalar(loss), t.gradient(policy.phi())};
}

inline LossGrad weighted_planner_nll(const ContinuousDecoupledPolicy& policy, const Matrix& s, const Matrix& next,
                                     const Vector& weights) {
  if (s.cols() == 0) throw PreconditionError("planner likelihood needs a nonempty batch");
  if (weights.size() != s.cols()) throw DimensionError("one weight per pair");
  approx::Tape t;
  auto out = policy.planner().forward(t, policy.psi(), t.constant(s));
  auto lp = approx::gaussian_log_density(t, t.constant(next), out.mean, out.log_std);
  auto loss = approx::scale(t, approx::sum(t, approx::mul_columns(t, lp, t.constant(weights.transpose()))),
                            -1.0 / static_cast<double>(s.cols()));
  t.backward(loss);
  return {t.scalar(loss), t.gradient(policy.psi())};
}

inline LossGrad supervised_planner_loss(const ContinuousDecoupledPolicy& policy, const Matrix& s, const Matrix& next) {
  if (s.cols() == 0) throw PreconditionError("supervised planner loss needs demonstrations");
  return weighted_planner_nll(policy, s, next, Vector::Ones(s.cols()));
}

inline LossGrad cdepg_gradient(const ContinuousDecoupledPolicy& policy, const Matrix& s, const Matrix& next, const Vector& q) {
  if (s.cols() == 0) throw PreconditionError("CDePG needs a nonempty batch");
  return weighted_planner_nll(policy, s, next, normalize_q(q));
}

/// Monte-Carlo estimate of pi(a|s) = E_{s'~h}[I(a|s,s')] with caller-supplied planner noise
/// eps (state_dim x (B*M), column b*M + m).
inline Vector marginal_policy_density(const ContinuousDecoupledPolicy& policy, const Matrix& s, const Matrix& a,
                                      const Matrix& eps, Eigen::Index M) {
  const auto B = s.cols();
  Matrix srep(s.rows(), B * M), arep(a.rows(), B * M);
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index m = 0; m < M; ++m) {
      srep.col(b * M + m) = s.col(b);
      arep.col(b * M + m) = a.col(b);
    }
  const Matrix next = policy.planner().sample(policy.psi(), srep, eps);
  auto [mu, ls] = policy.inverse().forward(policy.phi(), policy.inverse_input(srep, next));
  const Eigen::ArrayXXd z = (arep - mu).array() / ls.array().exp();
  const Eigen::RowVectorXd logp =
      (-0.5 * z.square() - ls.array()).colwise().sum() - 0.5 * static_cast<double>(a.rows()) * std::log(2.0 * M_PI);
  Vector pi(B);
  for (Eigen::Index b = 0; b < B; ++b) pi(b) = logp.segment(b * M, M).array().exp().mean();
  return pi;
}

/// Likelihood-ratio estimator: clip(Q/pi) * grad_psi of the M-sample planner average of
/// I(a|s, h(eps; s)), with I frozen. Loss convention (to be descended).
inline Vector depg_gradient(const ContinuousDecoupledPolicy& policy, const Matrix& s, const Matrix& a, const Vector& q,
                            const Matrix& eps, Eigen::Index M, const ImportanceWeighting& iw = {}) {
  const auto B = s.cols();
  if (B == 0) throw PreconditionError("DePG needs a nonempty batch");
  if (q.size() != B || a.cols() != B) throw DimensionError("DePG batch sizes differ");
  if (M < 1 || eps.cols() != B * M) throw DimensionError("planner noise must have batch * M columns");
  const Vector pi = marginal_policy_density(policy, s, a, eps, M);
  Matrix c(1, B * M);
  for (Eigen::Index b = 0; b < B; ++b) c.block(0, b * M, 1, M).setConstant(importance_weight(q(b), pi(b), iw));

  Matrix srep(s.rows(), B * M), arep(a.rows(), B * M);
  for (Eigen::Index b = 0; b < B; ++b)
    for (Eigen::Index m = 0; m < M; ++m) {
      srep.col(b * M + m) = s.col(b);
      arep.col(b * M + m) = a.col(b);
    }
  approx::Tape t;
  auto sv = t.constant(srep);
  auto h = policy.planner().forward(t, policy.psi(), sv);
  auto next = approx::reparam_sample(t, h.mean, h.log_std, eps);
  auto inv = policy.inverse().forward(t, policy.phi(), policy.inverse_input(t, sv, next));
  auto dens = approx::exp(t, approx::gaussian_log_density(t, t.constant(arep), inv.mean, inv.log_std));
  auto loss = approx::scale(t, approx::sum(t, approx::mul(t, dens, t.constant(c))), -1.0 / static_cast<double>(B * M));
  t.backward(loss);
  return t.gradient(policy.psi());
}

struct PathwiseGradient {
  double objective = 0.0;  // mean of min Q - alpha log h
  Vector psi;
  Vector phi;
};

/// Reparameterized gradient through the planner sample, the inverse-dynamics sample and the
/// twin critic: loss = mean(alpha * log h(s'|s) - min Q(s, clip(a))) with
/// s' = h(eps1; s), a = I(eps2; s, s').
inline PathwiseGradient pathwise_policy_gradient(const ContinuousDecoupledPolicy& policy, const TwinQ& q, const Matrix& s,
                                                 const Matrix& eps_plan, const Matrix& eps_act, double alpha) {
  if (s.cols() == 0) throw PreconditionError("policy gradient needs a nonempty batch");
  approx::Tape t;
  auto sv = t.constant(s);
  auto h = policy.planner().forward(t, policy.psi(), sv);
  auto next = approx::reparam_sample(t, h.mean, h.log_std, eps_plan);
  auto inv = policy.inverse().forward(t, policy.phi(), policy.inverse_input(t, sv, next));
  auto a = approx::clamp(t, approx::reparam_sample(t, inv.mean, inv.log_std, eps_act), -1.0, 1.0);
  auto qv = q.min_q(t, approx::concat_rows(t, sv, a));
  approx::Var obj = qv;
  if (alpha != 0.0) {
    auto lh = approx::gaussian_log_density(t, next, h.mean, h.log_std);
    obj = approx::sub(t, qv, approx::scale(t, lh, alpha));
  }
  auto loss = approx::scale(t, approx::mean(t, obj), -1.0);
  t.backward(loss);
  return {-t.scalar(loss), t.gradient(policy.psi()), t.gradient(policy.phi())};
}

inline GradientReport combined_update(ContinuousDecoupledPolicy& policy, approx::Adam& optimizer, Vector depg,
                                      Vector supervised, Vector cdepg, double lambda_h) {
  GradientReport r = assemble(std::move(depg), std::move(supervised), std::move(cdepg), lambda_h);
  optimizer.step(policy.psi(), r.combined);
  return r;
}

/// Monolithic Gaussian state-to-action policy (GAIfO and BCO baselines).
class ContinuousMonolithicPolicy {
 public:
  ContinuousMonolithicPolicy() = default;
  ContinuousMonolithicPolicy(Eigen::Index state_dim, Eigen::Index action_dim, std::vector<Eigen::Index> hidden)
      : head_("policy", state_dim, std::move(hidden), action_dim) {
    approx::ParamLayout l;
    head_.net().add_to(l);
    theta_ = ParamVector(l);
  }
  void init(Rng& rng) { head_.net().init(theta_, rng, 0.1); }
  const GaussianHead& head() const { return head_; }
  ParamVector& theta() { return theta_; }
  const ParamVector& theta() const { return theta_; }

  Vector act(const Vector& s, Rng& rng) const {
    return head_.sample(theta_, Matrix(s), standard_normal(rng, head_.dim(), 1)).col(0);
  }
  Vector act_deterministic(const Vector& s) const { return head_.forward(theta_, Matrix(s)).first.col(0); }

 private:
  GaussianHead head_;
  ParamVector theta_;
};

/// Soft actor loss mean(alpha log pi(a|s) - min Q(s, clip(a))) with a = mu + sigma eps.
inline LossGrad soft_policy_loss(const ContinuousMonolithicPolicy& policy, const TwinQ& q, const Matrix& s, const Matrix& eps,
                                 double alpha) {
  if (s.cols() == 0) throw PreconditionError("policy loss needs a nonempty batch");
  approx::Tape t;
  auto sv = t.constant(s);
  auto out = policy.head().forward(t, policy.theta(), sv);
  auto a = approx::reparam_sample(t, out.mean, out.log_std, eps);
  auto qv = q.min_q(t, approx::concat_rows(t, sv, approx::clamp(t, a, -1.0, 1.0)));
  auto lp = approx::gaussian_log_density(t, a, out.mean, out.log_std);
  auto loss = approx::mean(t, approx::sub(t, approx::scale(t, lp, alpha), qv));
  t.backward(loss);
  return {t.scalar(loss), t.gradient(policy.theta())};
}

inline LossGrad behavior_cloning_loss(const ContinuousMonolithicPolicy& policy, const Matrix& s, const Matrix& a) {
  if (s.cols() == 0) throw PreconditionError("behaviour cloning needs labelled pairs");
  approx::Tape t;
  auto out = policy.head().forward(t, policy.theta(), t.constant(s));
  auto loss = approx::scale(t, approx::mean(t, approx::gaussian_log_density(t, t.constant(a), out.mean, out.log_std)), -1.0);
  t.backward(loss);
  return {t.scalar(loss), t.gradient(policy.theta())};
}

}  // namespace depo::decoupled
