#pragma once

// Decoupled policy over a finite state space: a categorical planner h(s'|s) over all
// states and a categorical inverse dynamics I(a|s,s'), both MLPs over state features.

#include "depo/approx/adam.hpp"
#include "depo/approx/mlp.hpp"
#include "depo/approx/tape.hpp"
#include "depo/decoupled/common.hpp"
#include "depo/random.hpp"

#include <vector>

namespace depo::decoupled {

using approx::CategoricalHead;
using approx::Tape;
using approx::Var;

/// I[s] is an n_states x n_actions matrix holding I(a|s,s') in row s'.
using InverseTable = std::vector<Matrix>;

struct TabularPairBatch {
  std::vector<int> s;
  std::vector<int> next;
  std::size_t size() const { return s.size(); }
};

struct TabularTransitionBatch {
  std::vector<int> s;
  std::vector<int> a;
  std::vector<int> next;
  std::size_t size() const { return s.size(); }
};

class TabularDecoupledPolicy {
 public:
  TabularDecoupledPolicy() = default;

  /// `features` is feature_dim x n_states.
  TabularDecoupledPolicy(Matrix features, int n_actions, std::vector<Eigen::Index> planner_hidden,
                         std::vector<Eigen::Index> inverse_hidden)
      : features_(std::move(features)),
        n_states_(static_cast<int>(features_.cols())),
        n_actions_(n_actions),
        planner_("planner", features_.rows(), std::move(planner_hidden), features_.cols()),
        inverse_("inverse_dynamics", 2 * features_.rows(), std::move(inverse_hidden), n_actions) {
    approx::ParamLayout lp, li;
    planner_.net().add_to(lp);
    inverse_.net().add_to(li);
    psi_ = ParamVector(lp);
    phi_ = ParamVector(li);
  }

  void init_planner(Rng& rng) { planner_.net().init(psi_, rng); }
  void init_inverse(Rng& rng) { inverse_.net().init(phi_, rng); }

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  const Matrix& features() const { return features_; }
  const CategoricalHead& planner() const { return planner_; }
  const CategoricalHead& inverse() const { return inverse_; }
  ParamVector& psi() { return psi_; }
  const ParamVector& psi() const { return psi_; }
  ParamVector& phi() { return phi_; }
  const ParamVector& phi() const { return phi_; }

  Matrix state_features(const std::vector<int>& states) const {
    Matrix x(features_.rows(), static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = features_.col(check(states[i]));
    return x;
  }

  /// Inverse-dynamics input: (features(s), features(s') - features(s)).
  Matrix pair_features(const std::vector<int>& s, const std::vector<int>& next) const {
    if (s.size() != next.size()) throw DimensionError("pair batch columns differ in length");
    const auto d = features_.rows();
    Matrix x(2 * d, static_cast<Eigen::Index>(s.size()));
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto j = static_cast<Eigen::Index>(i);
      x.col(j).head(d) = features_.col(check(s[i]));
      x.col(j).tail(d) = features_.col(check(next[i])) - features_.col(s[i]);
    }
    return x;
  }

  /// h[s][s'] with one row per state.
  Matrix planner_table() const {
    return planner_.probs(psi_, features_).transpose();
  }

  InverseTable inverse_table() const {
    std::vector<int> s, next;
    for (int a = 0; a < n_states_; ++a)
      for (int b = 0; b < n_states_; ++b) {
        s.push_back(a);
        next.push_back(b);
      }
    const Matrix probs = inverse_.probs(phi_, pair_features(s, next));  // A x S*S, column s*S + s'
    InverseTable table(static_cast<std::size_t>(n_states_));
    for (int a = 0; a < n_states_; ++a)
      table[static_cast<std::size_t>(a)] = probs.middleCols(static_cast<Eigen::Index>(a) * n_states_, n_states_).transpose();
    return table;
  }

  /// pi[s][a] = sum_s' h(s'|s) I(a|s,s').
  static Matrix compose(const Matrix& planner, const InverseTable& inverse) {
    const auto S = planner.rows();
    Matrix pi(S, inverse.at(0).cols());
    for (Eigen::Index s = 0; s < S; ++s) pi.row(s) = planner.row(s) * inverse[static_cast<std::size_t>(s)];
    return pi;
  }

  Matrix policy_table() const { return compose(planner_table(), inverse_table()); }

  Eigen::Index check(int s) const {
    if (s < 0 || s >= n_states_) throw DimensionError("state index out of range: " + std::to_string(s));
    return s;
  }

 private:
  Matrix features_;
  int n_states_ = 0;
  int n_actions_ = 0;
  CategoricalHead planner_;
  CategoricalHead inverse_;
  ParamVector psi_;
  ParamVector phi_;
};

struct TabularAction {
  int planned = 0;  // s-hat'
  int action = 0;
};

/// Two-stage sample: s-hat' ~ h(.|s), then a ~ I(.|s, s-hat').
inline TabularAction act(const Matrix& planner, const InverseTable& inverse, int s, Rng& rng) {
  TabularAction out;
  const Eigen::RowVectorXd h = planner.row(s);
  out.planned = static_cast<int>(sample_categorical(rng, h));
  const Eigen::RowVectorXd i = inverse[static_cast<std::size_t>(s)].row(out.planned);
  out.action = static_cast<int>(sample_categorical(rng, i));
  return out;
}

/// Planner mode, then inverse-dynamics mode.
inline TabularAction act_deterministic(const Matrix& planner, const InverseTable& inverse, int s) {
  TabularAction out;
  Eigen::Index k = 0;
  planner.row(s).maxCoeff(&k);
  out.planned = static_cast<int>(k);
  inverse[static_cast<std::size_t>(s)].row(out.planned).maxCoeff(&k);
  out.action = static_cast<int>(k);
  return out;
}

/// Mean negative log-likelihood -log I(a|s,s') and its gradient in phi.
inline LossGrad inverse_dynamics_loss(const TabularDecoupledPolicy& policy, const TabularTransitionBatch& batch) {
  if (batch.size() == 0) throw PreconditionError("inverse dynamics loss needs a nonempty batch");
  Tape t;
  Var lp = policy.inverse().log_probs(t, policy.phi(), t.constant(policy.pair_features(batch.s, batch.next)));
  std::vector<Eigen::Index> idx(batch.a.begin(), batch.a.end());
  Var loss = scale(t, approx::mean(t, pick(t, lp, idx)), -1.0);
  t.backward(loss);
  return {t.scalar(loss), t.gradient(policy.phi())};
}

/// Weighted negative log-likelihood -(1/B) sum_b w_b log h(s'_b|s_b) and its gradient in psi.
inline LossGrad weighted_planner_nll(const TabularDecoupledPolicy& policy, const TabularPairBatch& batch,
                                     const Vector& weights) {
  if (batch.size() == 0) throw PreconditionError("planner likelihood needs a nonempty batch");
  if (weights.size() != static_cast<Eigen::Index>(batch.size())) throw DimensionError("one weight per pair");
  Tape t;
  Var lp = policy.planner().log_probs(t, policy.psi(), t.constant(policy.state_features(batch.s)));
  std::vector<Eigen::Index> idx(batch.next.begin(), batch.next.end());
  Var w = t.constant(weights.transpose());
  Var loss = scale(t, sum(t, mul_columns(t, pick(t, lp, idx), w)), -1.0 / static_cast<double>(batch.size()));
  t.backward(loss);
  return {t.scalar(loss), t.gradient(policy.psi())};
}

/// Maximum-likelihood surrogate of the planner divergence on expert pairs.
inline LossGrad supervised_planner_loss(const TabularDecoupledPolicy& policy, const TabularPairBatch& expert) {
  if (expert.size() == 0) throw PreconditionError("supervised planner loss needs demonstrations");
  return weighted_planner_nll(policy, expert, Vector::Ones(static_cast<Eigen::Index>(expert.size())));
}

/// Q-weighted likelihood of environment-observed transitions with min-max normalized weights.
inline LossGrad cdepg_gradient(const TabularDecoupledPolicy& policy, const TabularPairBatch& batch, const Vector& q) {
  if (batch.size() == 0) throw PreconditionError("CDePG needs a nonempty batch");
  return weighted_planner_nll(policy, batch, normalize_q(q));
}

/// Gradient in psi of L = -(1/B) sum_b sum_a C(a,b) pi(a|s_b) with I frozen at `inverse`.
inline Vector planner_policy_gradient(const TabularDecoupledPolicy& policy, const InverseTable& inverse,
                                      const std::vector<int>& states, const Matrix& C) {
  const auto B = static_cast<Eigen::Index>(states.size());
  if (B == 0) throw PreconditionError("policy gradient needs a nonempty batch");
  if (C.cols() != B || C.rows() != policy.n_actions()) throw DimensionError("weight matrix must be n_actions x batch");
  Matrix G(policy.n_states(), B);  // G(s', b) = sum_a C(a,b) I(a|s_b,s')
  for (Eigen::Index b = 0; b < B; ++b) {
    G.col(b) = inverse[static_cast<std::size_t>(states[static_cast<std::size_t>(b)])] * C.col(b);
    // Constant baseline per sample; sum_s' h = 1 so the gradient is unchanged, and it is
    // exactly zero when I does not depend on s'.
    G.col(b).array() -= G.col(b).minCoeff();
  }
  Tape t;
  Var lp = policy.planner().log_probs(t, policy.psi(), t.constant(policy.state_features(states)));
  Var loss = scale(t, sum(t, mul(t, approx::exp(t, lp), t.constant(G))), -1.0 / static_cast<double>(B));
  t.backward(loss);
  return t.gradient(policy.psi());
}

/// Decoupled policy gradient on sampled (s, a): weight clip(Q/pi) on grad pi(a|s), exact over the planner.
/// Per-sample multipliers `w` default to one.
inline Vector depg_gradient(const TabularDecoupledPolicy& policy, const InverseTable& inverse, const TabularTransitionBatch& batch,
                            const Vector& q, const ImportanceWeighting& iw = {}, const Vector& w = Vector()) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  if (q.size() != B) throw DimensionError("one Q value per sample");
  const Matrix h = policy.planner().probs(policy.psi(), policy.state_features(batch.s));
  Matrix C = Matrix::Zero(policy.n_actions(), B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const int s = batch.s[static_cast<std::size_t>(b)];
    const int a = batch.a[static_cast<std::size_t>(b)];
    const double pi = h.col(b).dot(inverse[static_cast<std::size_t>(s)].col(a));
    const double mult = w.size() ? w(b) : 1.0;
    if (mult == 0.0) continue;
    C(a, b) = mult * importance_weight(q(b), pi, iw);
  }
  return planner_policy_gradient(policy, inverse, batch.s, C);
}

/// Exact expectation over a ~ pi of the sampled estimator: gradient of -(1/B) sum_b sum_a pi(a|s_b) Q(s_b,a).
inline Vector depg_gradient_expected(const TabularDecoupledPolicy& policy, const InverseTable& inverse,
                                     const std::vector<int>& states, const Matrix& q_table) {
  Matrix C(policy.n_actions(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t b = 0; b < states.size(); ++b) C.col(static_cast<Eigen::Index>(b)) = q_table.row(states[b]).transpose();
  return planner_policy_gradient(policy, inverse, states, C);
}

/// Joint gradient in (psi, phi) of the same objective, without freezing I (decoupled architecture
/// trained end-to-end by the policy gradient alone).
inline std::pair<Vector, Vector> end_to_end_policy_gradient(const TabularDecoupledPolicy& policy, const std::vector<int>& states,
                                                            const Matrix& C) {
  const auto B = static_cast<Eigen::Index>(states.size());
  const int S = policy.n_states();
  if (B == 0) throw PreconditionError("policy gradient needs a nonempty batch");
  std::vector<int> ps, pn;
  Matrix Crep(policy.n_actions(), B * S);
  for (Eigen::Index b = 0; b < B; ++b)
    for (int j = 0; j < S; ++j) {
      ps.push_back(states[static_cast<std::size_t>(b)]);
      pn.push_back(j);
      Crep.col(b * S + j) = C.col(b);
    }
  Tape t;
  Var lp = policy.planner().log_probs(t, policy.psi(), t.constant(policy.state_features(states)));
  Var li = policy.inverse().log_probs(t, policy.phi(), t.constant(policy.pair_features(ps, pn)));
  Var G = reshape(t, sum_rows(t, mul(t, approx::exp(t, li), t.constant(Crep))), S, B);
  Var loss = scale(t, sum(t, mul(t, approx::exp(t, lp), G)), -1.0 / static_cast<double>(B));
  t.backward(loss);
  return {t.gradient(policy.psi()), t.gradient(policy.phi())};
}

/// Assembles depg + lambda_h (supervised + cdepg) and applies one optimizer step on psi.
/// Components that are disabled for a variant are passed as zero vectors by the caller.
inline GradientReport combined_update(TabularDecoupledPolicy& policy, approx::Adam& optimizer, Vector depg,
                                      Vector supervised, Vector cdepg, double lambda_h) {
  GradientReport r = assemble(std::move(depg), std::move(supervised), std::move(cdepg), lambda_h);
  optimizer.step(policy.psi(), r.combined);
  return r;
}

/// Monolithic state-to-action categorical policy (GAIfO and BCO baselines).
class TabularMonolithicPolicy {
 public:
  TabularMonolithicPolicy() = default;
  TabularMonolithicPolicy(Matrix features, int n_actions, std::vector<Eigen::Index> hidden)
      : features_(std::move(features)), head_("policy", features_.rows(), std::move(hidden), n_actions) {
    approx::ParamLayout l;
    head_.net().add_to(l);
    theta_ = ParamVector(l);
  }
  void init(Rng& rng) { head_.net().init(theta_, rng); }

  ParamVector& theta() { return theta_; }
  const ParamVector& theta() const { return theta_; }
  const CategoricalHead& head() const { return head_; }

  Matrix state_features(const std::vector<int>& states) const {
    Matrix x(features_.rows(), static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = features_.col(states[i]);
    return x;
  }
  /// pi[s][a].
  Matrix policy_table() const { return head_.probs(theta_, features_).transpose(); }

 private:
  Matrix features_;
  CategoricalHead head_;
  ParamVector theta_;
};

/// Soft policy improvement for a categorical policy: gradient of
/// (1/B) sum_b sum_a pi(a|s_b) (alpha log pi(a|s_b) - Q(s_b,a)).
inline LossGrad soft_policy_loss(const TabularMonolithicPolicy& policy, const std::vector<int>& states, const Matrix& q_table,
                                 double alpha) {
  const auto B = static_cast<Eigen::Index>(states.size());
  if (B == 0) throw PreconditionError("policy loss needs a nonempty batch");
  Matrix Q(q_table.cols(), B);
  for (Eigen::Index b = 0; b < B; ++b) Q.col(b) = q_table.row(states[static_cast<std::size_t>(b)]).transpose();
  Tape t;
  Var lp = policy.head().log_probs(t, policy.theta(), t.constant(policy.state_features(states)));
  Var inner = sub(t, scale(t, lp, alpha), t.constant(Q));
  Var loss = scale(t, sum(t, mul(t, approx::exp(t, lp), inner)), 1.0 / static_cast<double>(B));
  t.backward(loss);
  return {t.scalar(loss), t.gradient(policy.theta())};
}

/// Behaviour cloning: mean -log pi(a|s) over labelled pairs.
inline LossGrad behavior_cloning_loss(const TabularMonolithicPolicy& policy, const std::vector<int>& states,
                                      const std::vector<int>& actions) {
  if (states.empty()) throw PreconditionError("behaviour cloning needs labelled pairs");
  Tape t;
  Var lp = policy.head().log_probs(t, policy.theta(), t.constant(policy.state_features(states)));
  std::vector<Eigen::Index> idx(actions.begin(), actions.end());
  Var loss = scale(t, approx::mean(t, pick(t, lp, idx)), -1.0);
  t.backward(loss);
  return {t.scalar(loss), t.gradient(policy.theta())};
}

/// Argmax inverse-dynamics labels for state pairs.
inline std::vector<int> label_actions(const InverseTable& inverse, const TabularPairBatch& pairs) {
  std::vector<int> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Eigen::Index k = 0;
    inverse.at(static_cast<std::size_t>(pairs.s[i])).row(pairs.next[i]).maxCoeff(&k);
    out.push_back(static_cast<int>(k));
  }
  return out;
}

}  // namespace depo::decoupled
