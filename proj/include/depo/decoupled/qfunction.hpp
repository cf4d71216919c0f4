#pragma once

#include "depo/approx/adam.hpp"
#include "depo/approx/mlp.hpp"
#include "depo/approx/tape.hpp"
#include "depo/decoupled/common.hpp"

#include <vector>

namespace depo::decoupled {

/// Q(s,a) as an n_states x n_actions table with a target copy.
class TabularQ {
 public:
  TabularQ() = default;
  TabularQ(int n_states, int n_actions) {
    approx::ParamLayout l;
    l.add("q/table", n_states, n_actions);
    params_ = ParamVector(l);
    target_ = params_;
  }

  Matrix table() const { return params_.view("q/table"); }
  Matrix target_table() const { return target_.view("q/table"); }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }
  ParamVector& target() { return target_; }
  const ParamVector& target() const { return target_; }

  /// 0.5 * mean (Q(s_b,a_b) - y_b)^2 and its gradient.
  LossGrad td_loss(const std::vector<int>& s, const std::vector<int>& a, const Vector& y) const {
    if (s.empty()) throw PreconditionError("TD step needs a nonempty batch");
    if (s.size() != a.size() || y.size() != static_cast<Eigen::Index>(s.size())) throw DimensionError("TD batch sizes differ");
    const auto view = params_.view("q/table");
    Vector g = Vector::Zero(params_.size());
    const auto rows = view.rows();
    double loss = 0.0;
    const double n = static_cast<double>(s.size());
    for (std::size_t b = 0; b < s.size(); ++b) {
      const double diff = view(s[b], a[b]) - y(static_cast<Eigen::Index>(b));
      loss += 0.5 * diff * diff / n;
      g(static_cast<Eigen::Index>(a[b]) * rows + s[b]) += diff / n;
    }
    return {loss, g};
  }

 private:
  ParamVector params_;
  ParamVector target_;
};

/// Twin Q(s,a) MLPs over concat(s, a) with target copies.
class TwinQ {
 public:
  TwinQ() = default;
  TwinQ(Eigen::Index state_dim, Eigen::Index action_dim, std::vector<Eigen::Index> hidden)
      : q1_("q1", {state_dim + action_dim, hidden, 1}), q2_("q2", {state_dim + action_dim, hidden, 1}) {
    approx::ParamLayout l;
    q1_.add_to(l);
    q2_.add_to(l);
    params_ = ParamVector(l);
    target_ = params_;
  }

  void init(Rng& rng) {
    q1_.init(params_, rng);
    q2_.init(params_, rng);
    target_ = params_;
  }

  static Matrix input(const Matrix& s, const Matrix& a) {
    Matrix x(s.rows() + a.rows(), s.cols());
    x << s, a;
    return x;
  }

  /// min(Q1, Q2) as a 1 x B row, from online or target parameters.
  Matrix min_q(const Matrix& s, const Matrix& a, bool use_target = false) const {
    const auto& p = use_target ? target_ : params_;
    const Matrix x = input(s, a);
    return q1_.forward(p, x).cwiseMin(q2_.forward(p, x));
  }

  /// Taped min(Q1, Q2) at x = concat(s, a); parameters enter as leaves of `params_`.
  approx::Var min_q(approx::Tape& t, approx::Var x) const {
    return approx::minimum(t, q1_.forward(t, params_, x), q2_.forward(t, params_, x));
  }

  /// 0.5 * mean over both heads of (Q_i(s,a) - y)^2.
  LossGrad td_loss(const Matrix& s, const Matrix& a, const Vector& y) const {
    if (s.cols() == 0) throw PreconditionError("TD step needs a nonempty batch");
    if (a.cols() != s.cols() || y.size() != s.cols()) throw DimensionError("TD batch sizes differ");
    approx::Tape t;
    approx::Var x = t.constant(input(s, a));
    approx::Var target = t.constant(y.transpose());
    approx::Var e1 = approx::square(t, approx::sub(t, q1_.forward(t, params_, x), target));
    approx::Var e2 = approx::square(t, approx::sub(t, q2_.forward(t, params_, x), target));
    approx::Var loss = approx::scale(t, approx::mean(t, approx::add(t, e1, e2)), 0.5);
    t.backward(loss);
    return {t.scalar(loss), t.gradient(params_)};
  }

  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }
  ParamVector& target() { return target_; }
  const ParamVector& target() const { return target_; }

 private:
  approx::Mlp q1_;
  approx::Mlp q2_;
  ParamVector params_;
  ParamVector target_;
};

}  // namespace depo::decoupled
