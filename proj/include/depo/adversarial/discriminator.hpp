#pragma once

// State-pair discriminators D(s,s') = sigmoid(logit). With standard labels the expert is
// pushed toward 1 and the agent toward 0; with `standard_labels = false` the labels follow
// the loss -E_agent[log D] - E_expert[log(1 - D)].

#include "depo/approx/mlp.hpp"
#include "depo/approx/tape.hpp"
#include "depo/decoupled/common.hpp"
#include "depo/random.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace depo::adversarial {

using approx::Matrix;
using approx::ParamVector;
using approx::Tape;
using approx::Var;
using approx::Vector;
using decoupled::LossGrad;

struct DiscriminatorLoss {
  double base = 0.0;     // cross-entropy part
  double penalty = 0.0;  // gradient-penalty part (already weighted)
  double total = 0.0;
  Vector grad;
};

/// reward_scale * log D, computed from the logit without overflow.
inline double reward_from_logit(double logit, double reward_scale) {
  const double log_d = logit >= 0 ? -std::log1p(std::exp(-logit)) : logit - std::log1p(std::exp(logit));
  return reward_scale * log_d;
}

/// Cross-entropy on logits; `positive` are labelled 1 and `negative` 0.
inline Var cross_entropy(Tape& t, Var positive_logits, Var negative_logits) {
  // -mean log sigmoid(l+) - mean log(1 - sigmoid(l-)) = -mean log_sigmoid(l+) - mean log_sigmoid(-l-)
  Var a = approx::mean(t, approx::log_sigmoid(t, positive_logits));
  Var b = approx::mean(t, approx::log_sigmoid(t, approx::scale(t, negative_logits, -1.0)));
  return approx::scale(t, approx::add(t, a, b), -1.0);
}

/// One logit per (s, s') pair of a finite state space.
class TabularDiscriminator {
 public:
  TabularDiscriminator() = default;
  explicit TabularDiscriminator(int n_states, bool standard_labels = true) : standard_labels_(standard_labels) {
    approx::ParamLayout l;
    l.add("disc/logits", n_states, n_states);
    omega_ = ParamVector(l);
  }

  double logit(int s, int next) const { return omega_.view("disc/logits")(s, next); }
  double probability(int s, int next) const { return approx::stable_sigmoid(Matrix::Constant(1, 1, logit(s, next)))(0, 0); }
  double reward(int s, int next, double reward_scale) const { return reward_from_logit(logit(s, next), reward_scale); }

  DiscriminatorLoss loss(const std::vector<int>& agent_s, const std::vector<int>& agent_next, const std::vector<int>& expert_s,
                         const std::vector<int>& expert_next) const {
    if (agent_s.empty() || expert_s.empty()) throw PreconditionError("discriminator loss needs nonempty agent and expert batches");
    Tape t;
    Var table = t.param(omega_, "disc/logits");
    Var la = gather(t, table, agent_s, agent_next);
    Var le = gather(t, table, expert_s, expert_next);
    Var ce = standard_labels_ ? cross_entropy(t, le, la) : cross_entropy(t, la, le);
    t.backward(ce);
    DiscriminatorLoss out;
    out.base = out.total = t.scalar(ce);
    out.grad = t.gradient(omega_);
    return out;
  }

  ParamVector& params() { return omega_; }
  const ParamVector& params() const { return omega_; }
  bool standard_labels() const { return standard_labels_; }

 private:
  static Var gather(Tape& t, Var table, const std::vector<int>& s, const std::vector<int>& next) {
    const auto n = t.value(table).rows();
    std::vector<Eigen::Index> flat;
    for (std::size_t i = 0; i < s.size(); ++i) flat.push_back(static_cast<Eigen::Index>(next[i]) * n + s[i]);
    return approx::gather(t, table, std::move(flat));
  }

  ParamVector omega_;
  bool standard_labels_ = true;
};

/// MLP discriminator over concat(s, s').
class MlpDiscriminator {
 public:
  MlpDiscriminator() = default;
  MlpDiscriminator(Eigen::Index state_dim, std::vector<Eigen::Index> hidden, bool standard_labels = true)
      : net_("disc", {2 * state_dim, std::move(hidden), 1}), standard_labels_(standard_labels) {
    approx::ParamLayout l;
    net_.add_to(l);
    omega_ = ParamVector(l);
  }

  void init(Rng& rng) { net_.init(omega_, rng); }

  static Matrix input(const Matrix& s, const Matrix& next) {
    Matrix x(s.rows() + next.rows(), s.cols());
    x << s, next;
    return x;
  }

  Matrix logits(const Matrix& s, const Matrix& next) const { return net_.forward(omega_, input(s, next)); }
  Matrix probabilities(const Matrix& s, const Matrix& next) const { return approx::stable_sigmoid(logits(s, next)); }
  Vector rewards(const Matrix& s, const Matrix& next, double reward_scale) const {
    const Matrix l = logits(s, next);
    Vector r(l.cols());
    for (Eigen::Index j = 0; j < l.cols(); ++j) r(j) = reward_from_logit(l(0, j), reward_scale);
    return r;
  }

  /// Cross-entropy plus gp_weight * mean((||grad_x D(x_hat)|| - 1)^2) on x_hat = u x_agent + (1-u) x_expert,
  /// u ~ U(0,1) per pair drawn from `rng`. Batches are paired column by column (the shorter length is used).
  DiscriminatorLoss loss(const Matrix& agent_s, const Matrix& agent_next, const Matrix& expert_s, const Matrix& expert_next,
                         double gp_weight, Rng& rng) const {
    if (agent_s.cols() == 0 || expert_s.cols() == 0)
      throw PreconditionError("discriminator loss needs nonempty agent and expert batches");
    const Matrix xa = input(agent_s, agent_next);
    const Matrix xe = input(expert_s, expert_next);
    Tape t;
    Var la = net_.forward(t, omega_, t.constant(xa));
    Var le = net_.forward(t, omega_, t.constant(xe));
    Var ce = standard_labels_ ? cross_entropy(t, le, la) : cross_entropy(t, la, le);
    Var total = ce;
    Var pen;
    if (gp_weight > 0.0) {
      const auto n = std::min(xa.cols(), xe.cols());
      Matrix xi(xa.rows(), n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const double u = uniform01(rng);
        xi.col(j) = u * xa.col(j) + (1.0 - u) * xe.col(j);
      }
      pen = approx::scale(t, gradient_penalty(t, xi), gp_weight);
      total = approx::add(t, ce, pen);
    }
    t.backward(total);
    DiscriminatorLoss out;
    out.base = t.scalar(ce);
    out.penalty = gp_weight > 0.0 ? t.scalar(pen) : 0.0;
    out.total = t.scalar(total);
    out.grad = t.gradient(omega_);
    return out;
  }

  /// mean((||grad_x D(x)|| - 1)^2), differentiable in the parameters.
  Var gradient_penalty(Tape& t, const Matrix& x) const {
    const auto& shape = net_.shape();
    const std::size_t L = shape.n_layers();
    std::vector<Var> weights, acts;
    Var h = t.constant(x);
    for (std::size_t l = 0; l < L; ++l) {
      Var W = t.param(omega_, net_.weight_name(l));
      weights.push_back(W);
      Var z = approx::add_bias(t, approx::matmul(t, W, h), t.param(omega_, net_.bias_name(l)));
      if (l + 1 < L) {
        h = approx::tanh(t, z);
        acts.push_back(h);
      } else {
        h = z;
      }
    }
    const Eigen::Index B = x.cols();
    Var d = approx::sigmoid(t, h);
    Var g = approx::matmul_tn(t, weights[L - 1], t.constant(Matrix::Ones(1, B)));
    for (std::size_t l = L - 1; l-- > 0;) {
      Var deriv = approx::add_scalar(t, approx::scale(t, approx::square(t, acts[l]), -1.0), 1.0);
      g = approx::matmul_tn(t, weights[l], approx::mul(t, g, deriv));
    }
    // dD/dx = D (1 - D) dlogit/dx
    Var dd = approx::mul(t, d, approx::add_scalar(t, approx::scale(t, d, -1.0), 1.0));
    g = approx::mul_columns(t, g, dd);
    Var norm = approx::sqrt_eps(t, approx::sum_rows(t, approx::square(t, g)), 1e-12);
    return approx::mean(t, approx::square(t, approx::add_scalar(t, norm, -1.0)));
  }

  /// grad_x D(x) per column, by the same explicit backward pass (for tests).
  Matrix input_gradient(const Matrix& x) const {
    const auto& shape = net_.shape();
    const std::size_t L = shape.n_layers();
    std::vector<Matrix> acts;
    Matrix h = x;
    for (std::size_t l = 0; l < L; ++l) {
      Matrix z = omega_.view(net_.weight_name(l)) * h;
      z.colwise() += omega_.view(net_.bias_name(l)).col(0);
      if (l + 1 < L) {
        h = z.array().tanh();
        acts.push_back(h);
      } else {
        h = z;
      }
    }
    const Matrix d = approx::stable_sigmoid(h);
    Matrix g = omega_.view(net_.weight_name(L - 1)).transpose() * Matrix::Ones(1, x.cols());
    for (std::size_t l = L - 1; l-- > 0;)
      g = omega_.view(net_.weight_name(l)).transpose() * g.cwiseProduct((1.0 - acts[l].array().square()).matrix());
    return g * (d.array() * (1.0 - d.array())).matrix().row(0).asDiagonal();
  }

  const approx::Mlp& net() const { return net_; }
  ParamVector& params() { return omega_; }
  const ParamVector& params() const { return omega_; }
  bool standard_labels() const { return standard_labels_; }

 private:
  approx::Mlp net_;
  ParamVector omega_;
  bool standard_labels_ = true;
};

}  // namespace depo::adversarial
