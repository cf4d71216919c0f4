#pragma once

// Reverse-mode differentiation over batched matrices. Every value is a rows x batch
// matrix; a scalar objective is a 1x1 node. Nodes are appended in evaluation order,
// so a single reverse sweep visits parents after children.

#include "depo/approx/params.hpp"
#include "depo/errors.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace depo::approx {

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad)>;

  Tape() { nodes_.reserve(64); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), false, nullptr); }

  /// Leaf whose gradient can be read back after backward().
  Var variable(Matrix value) { return push(std::move(value), true, nullptr); }

  /// Leaf bound to a slice of `params`; gradients accumulate into gradient(params).
  Var param(const ParamVector& params, std::string_view slice_name) {
    const auto& s = params.layout().slice(slice_name);
    Matrix value = Eigen::Map<const Matrix>(params.values().data() + s.offset, s.rows, s.cols);
    Var v = push(std::move(value), true, nullptr);
    bindings_.push_back({v.id, &params, s.offset});
    return v;
  }

  Var push(Matrix value, bool needs_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), std::move(backward), needs_grad, false});
    return Var{nodes_.size() - 1};
  }

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  double scalar(Var v) const {
    const auto& m = value(v);
    if (m.size() != 1) throw DimensionError("node is not a scalar");
    return m(0, 0);
  }

  /// Gradient of the last backward() root with respect to `v` (zeros if unreached).
  Matrix grad(Var v) const {
    const auto& n = nodes_.at(v.id);
    if (!n.has_grad) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void accumulate(Var v, const Matrix& g) {
    auto& n = nodes_[v.id];
    if (!n.needs_grad) return;
    if (g.rows() != n.value.rows() || g.cols() != n.value.cols())
      throw DimensionError("gradient shape mismatch in reverse sweep");
    if (!n.has_grad) {
      n.grad = g;
      n.has_grad = true;
    } else {
      n.grad += g;
    }
  }

  void backward(Var root) {
    if (value(root).size() != 1) throw DimensionError("backward() needs a scalar root");
    for (auto& n : nodes_) {
      n.has_grad = false;
      n.grad.resize(0, 0);
    }
    accumulate(root, Matrix::Ones(1, 1));
    for (std::size_t i = root.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.has_grad || !n.backward) continue;
      // Callbacks only write to parents (smaller ids), so n.grad stays valid.
      n.backward(*this, n.grad);
    }
  }

  /// Flat gradient with the layout of `params`; zeros for slices not used on this tape.
  Vector gradient(const ParamVector& params) const {
    Vector g = Vector::Zero(params.size());
    for (const auto& b : bindings_) {
      if (b.params != &params) continue;
      const auto& n = nodes_[b.node];
      if (!n.has_grad) continue;
      g.segment(b.offset, n.grad.size()) += Eigen::Map<const Vector>(n.grad.data(), n.grad.size());
    }
    return g;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad;
    bool has_grad;
  };
  struct Binding {
    std::size_t node;
    const ParamVector* params;
    Eigen::Index offset;
  };

  std::vector<Node> nodes_;
  std::vector<Binding> bindings_;
};

namespace detail {
inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": operand shapes " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + " differ");
}
}  // namespace detail

// ---- linear algebra --------------------------------------------------------

inline Var matmul(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.cols() != B.rows()) throw DimensionError("matmul: inner dimensions differ");
  return t.push(A * B, t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b).transpose());
    if (t.needs_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
  });
}

/// A^T B.
inline Var matmul_tn(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.rows() != B.rows()) throw DimensionError("matmul_tn: row counts differ");
  return t.push(A.transpose() * B, t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, t.value(b) * g.transpose());
    if (t.needs_grad(b)) t.accumulate(b, t.value(a) * g);
  });
}

/// X + b for every column, with b a column vector.
inline Var add_bias(Tape& t, Var x, Var b) {
  const Matrix& X = t.value(x);
  const Matrix& B = t.value(b);
  if (B.cols() != 1 || B.rows() != X.rows()) throw DimensionError("add_bias: bias must be rows x 1");
  Matrix out = X.colwise() + B.col(0);
  return t.push(std::move(out), t.needs_grad(x) || t.needs_grad(b), [x, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(x)) t.accumulate(x, g);
    if (t.needs_grad(b)) t.accumulate(b, g.rowwise().sum());
  });
}

inline Var add(Tape& t, Var a, Var b) {
  detail::require_same_shape(t.value(a), t.value(b), "add");
  return t.push(t.value(a) + t.value(b), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var sub(Tape& t, Var a, Var b) {
  detail::require_same_shape(t.value(a), t.value(b), "sub");
  return t.push(t.value(a) - t.value(b), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(b)) t.accumulate(b, -g);
  });
}

/// Elementwise product.
inline Var mul(Tape& t, Var a, Var b) {
  detail::require_same_shape(t.value(a), t.value(b), "mul");
  Matrix out = t.value(a).cwiseProduct(t.value(b));
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
    if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
  });
}

/// Scales column j of X (n x B) by r(0, j) for a 1 x B row r.
inline Var mul_columns(Tape& t, Var x, Var r) {
  const Matrix& X = t.value(x);
  const Matrix& R = t.value(r);
  if (R.rows() != 1 || R.cols() != X.cols()) throw DimensionError("mul_columns: scale must be 1 x batch");
  Matrix out = X * R.row(0).asDiagonal();
  return t.push(std::move(out), t.needs_grad(x) || t.needs_grad(r), [x, r](Tape& t, const Matrix& g) {
    if (t.needs_grad(x)) t.accumulate(x, g * t.value(r).row(0).asDiagonal());
    if (t.needs_grad(r)) t.accumulate(r, g.cwiseProduct(t.value(x)).colwise().sum());
  });
}

inline Var scale(Tape& t, Var x, double c) {
  return t.push(c * t.value(x), t.needs_grad(x), [x, c](Tape& t, const Matrix& g) { t.accumulate(x, c * g); });
}

inline Var add_scalar(Tape& t, Var x, double c) {
  Matrix out = t.value(x).array() + c;
  return t.push(std::move(out), t.needs_grad(x), [x](Tape& t, const Matrix& g) { t.accumulate(x, g); });
}

// ---- elementwise nonlinearities -------------------------------------------

inline Var tanh(Tape& t, Var x) {
  Matrix y = t.value(x).array().tanh();
  const std::size_t self = t.size();
  return t.push(std::move(y), t.needs_grad(x), [x, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(Var{self});
    t.accumulate(x, g.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

inline Var exp(Tape& t, Var x) {
  Matrix y = t.value(x).array().exp();
  const std::size_t self = t.size();
  return t.push(std::move(y), t.needs_grad(x),
                [x, self](Tape& t, const Matrix& g) { t.accumulate(x, g.cwiseProduct(t.value(Var{self}))); });
}

inline Var log(Tape& t, Var x) {
  const Matrix& X = t.value(x);
  if ((X.array() <= 0.0).any()) throw NumericalError("log of a non-positive value");
  return t.push(X.array().log().matrix(), t.needs_grad(x),
                [x](Tape& t, const Matrix& g) { t.accumulate(x, g.cwiseQuotient(t.value(x))); });
}

inline Var square(Tape& t, Var x) {
  return t.push(t.value(x).array().square().matrix(), t.needs_grad(x),
                [x](Tape& t, const Matrix& g) { t.accumulate(x, 2.0 * g.cwiseProduct(t.value(x))); });
}

/// sqrt(x + eps), smooth at zero.
inline Var sqrt_eps(Tape& t, Var x, double eps) {
  Matrix y = (t.value(x).array() + eps).sqrt();
  const std::size_t self = t.size();
  return t.push(std::move(y), t.needs_grad(x), [x, self](Tape& t, const Matrix& g) {
    t.accumulate(x, (0.5 * g.array() / t.value(Var{self}).array()).matrix());
  });
}

inline Matrix stable_softplus(const Matrix& x) {
  return x.unaryExpr([](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); });
}
inline Matrix stable_sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

inline Var sigmoid(Tape& t, Var x) {
  Matrix y = stable_sigmoid(t.value(x));
  const std::size_t self = t.size();
  return t.push(std::move(y), t.needs_grad(x), [x, self](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(Var{self});
    t.accumulate(x, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

/// log(1 + exp(x)).
inline Var softplus(Tape& t, Var x) {
  return t.push(stable_softplus(t.value(x)), t.needs_grad(x),
                [x](Tape& t, const Matrix& g) { t.accumulate(x, g.cwiseProduct(stable_sigmoid(t.value(x)))); });
}

/// log sigmoid(x) = -softplus(-x).
inline Var log_sigmoid(Tape& t, Var x) {
  Matrix y = -stable_softplus(-t.value(x));
  return t.push(std::move(y), t.needs_grad(x), [x](Tape& t, const Matrix& g) {
    t.accumulate(x, g.cwiseProduct(stable_sigmoid(-t.value(x))));
  });
}

/// Identity inside [lo, hi], constant (zero gradient) outside.
inline Var clamp(Tape& t, Var x, double lo, double hi) {
  Matrix y = t.value(x).cwiseMax(lo).cwiseMin(hi);
  return t.push(std::move(y), t.needs_grad(x), [x, lo, hi](Tape& t, const Matrix& g) {
    const Matrix& X = t.value(x);
    Matrix out = g;
    for (Eigen::Index i = 0; i < out.size(); ++i)
      if (X(i) < lo || X(i) > hi) out(i) = 0.0;
    t.accumulate(x, out);
  });
}

// ---- column-wise reductions and categorical primitives ---------------------

inline Matrix log_softmax_columns(const Matrix& X) {
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double m = X.col(j).maxCoeff();
    const double lse = m + std::log((X.col(j).array() - m).exp().sum());
    out.col(j) = X.col(j).array() - lse;
  }
  return out;
}

inline Matrix softmax_columns(const Matrix& X) { return log_softmax_columns(X).array().exp(); }

inline Var log_softmax(Tape& t, Var x) {
  Matrix y = log_softmax_columns(t.value(x));
  const std::size_t self = t.size();
  return t.push(std::move(y), t.needs_grad(x), [x, self](Tape& t, const Matrix& g) {
    const Matrix p = t.value(Var{self}).array().exp();
    Matrix out = g - p * g.colwise().sum().asDiagonal();
    t.accumulate(x, out);
  });
}

/// Row index[j] of column j, as a 1 x B row.
inline Var pick(Tape& t, Var x, std::vector<Eigen::Index> index) {
  const Matrix& X = t.value(x);
  if (static_cast<Eigen::Index>(index.size()) != X.cols()) throw DimensionError("pick: one index per column");
  Matrix out(1, X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const auto i = index[static_cast<std::size_t>(j)];
    if (i < 0 || i >= X.rows()) throw DimensionError("pick: index out of range");
    out(0, j) = X(i, j);
  }
  return t.push(std::move(out), t.needs_grad(x), [x, index = std::move(index)](Tape& t, const Matrix& g) {
    const Matrix& X = t.value(x);
    Matrix out = Matrix::Zero(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) out(index[static_cast<std::size_t>(j)], j) = g(0, j);
    t.accumulate(x, out);
  });
}

/// Entries of X at column-major flat indices, as a 1 x n row.
inline Var gather(Tape& t, Var x, std::vector<Eigen::Index> flat) {
  const Matrix& X = t.value(x);
  Matrix out(1, static_cast<Eigen::Index>(flat.size()));
  for (std::size_t j = 0; j < flat.size(); ++j) {
    if (flat[j] < 0 || flat[j] >= X.size()) throw DimensionError("gather: index out of range");
    out(0, static_cast<Eigen::Index>(j)) = X(flat[j]);
  }
  return t.push(std::move(out), t.needs_grad(x), [x, flat = std::move(flat)](Tape& t, const Matrix& g) {
    const Matrix& X = t.value(x);
    Matrix out = Matrix::Zero(X.rows(), X.cols());
    for (std::size_t j = 0; j < flat.size(); ++j) out(flat[j]) += g(0, static_cast<Eigen::Index>(j));
    t.accumulate(x, out);
  });
}

inline Var sum(Tape& t, Var x) {
  Matrix out(1, 1);
  out(0, 0) = t.value(x).sum();
  return t.push(std::move(out), t.needs_grad(x), [x](Tape& t, const Matrix& g) {
    const Matrix& X = t.value(x);
    t.accumulate(x, Matrix::Constant(X.rows(), X.cols(), g(0, 0)));
  });
}

inline Var mean(Tape& t, Var x) {
  const double n = static_cast<double>(t.value(x).size());
  if (n == 0) throw DimensionError("mean of an empty node");
  return scale(t, sum(t, x), 1.0 / n);
}

/// Column sums, 1 x B.
inline Var sum_rows(Tape& t, Var x) {
  return t.push(t.value(x).colwise().sum(), t.needs_grad(x), [x](Tape& t, const Matrix& g) {
    const Matrix& X = t.value(x);
    t.accumulate(x, g.replicate(X.rows(), 1));
  });
}

inline Var concat_rows(Tape& t, Var a, Var b) {
  const Matrix& A = t.value(a);
  const Matrix& B = t.value(b);
  if (A.cols() != B.cols()) throw DimensionError("concat_rows: batch sizes differ");
  Matrix out(A.rows() + B.rows(), A.cols());
  out << A, B;
  const Eigen::Index ra = A.rows();
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b, ra](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g.topRows(ra));
    if (t.needs_grad(b)) t.accumulate(b, g.bottomRows(g.rows() - ra));
  });
}

inline Var rows(Tape& t, Var x, Eigen::Index start, Eigen::Index count) {
  const Matrix& X = t.value(x);
  if (start < 0 || count <= 0 || start + count > X.rows()) throw DimensionError("rows: range out of bounds");
  return t.push(X.middleRows(start, count), t.needs_grad(x), [x, start, count](Tape& t, const Matrix& g) {
    const Matrix& X = t.value(x);
    Matrix out = Matrix::Zero(X.rows(), X.cols());
    out.middleRows(start, count) = g;
    t.accumulate(x, out);
  });
}

/// Column-major reshape (same element order).
inline Var reshape(Tape& t, Var x, Eigen::Index rows_, Eigen::Index cols_) {
  const Matrix& X = t.value(x);
  if (rows_ * cols_ != X.size()) throw DimensionError("reshape: element count differs");
  Matrix out = Eigen::Map<const Matrix>(X.data(), rows_, cols_);
  const Eigen::Index r0 = X.rows(), c0 = X.cols();
  return t.push(std::move(out), t.needs_grad(x), [x, r0, c0](Tape& t, const Matrix& g) {
    t.accumulate(x, Eigen::Map<const Matrix>(g.data(), r0, c0));
  });
}

/// Elementwise minimum; ties route the gradient to the first operand.
inline Var minimum(Tape& t, Var a, Var b) {
  detail::require_same_shape(t.value(a), t.value(b), "minimum");
  Matrix out = t.value(a).cwiseMin(t.value(b));
  return t.push(std::move(out), t.needs_grad(a) || t.needs_grad(b), [a, b](Tape& t, const Matrix& g) {
    const Matrix& A = t.value(a);
    const Matrix& B = t.value(b);
    Matrix ga = Matrix::Zero(g.rows(), g.cols());
    Matrix gb = Matrix::Zero(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i) (A(i) <= B(i) ? ga(i) : gb(i)) = g(i);
    t.accumulate(a, ga);
    t.accumulate(b, gb);
  });
}

// ---- densities --------------------------------------------------------------

/// Diagonal Gaussian log-density, one value per column (1 x B).
inline Var gaussian_log_density(Tape& t, Var x, Var mean_, Var log_std) {
  const double d = static_cast<double>(t.value(x).rows());
  Var z = mul(t, sub(t, x, mean_), exp(t, scale(t, log_std, -1.0)));
  Var per = sub(t, scale(t, square(t, z), -0.5), log_std);
  return add_scalar(t, sum_rows(t, per), -0.5 * d * std::log(2.0 * M_PI));
}

/// mean + exp(log_std) * eps with eps supplied by the caller.
inline Var reparam_sample(Tape& t, Var mean_, Var log_std, const Matrix& eps) {
  Var noise = t.constant(eps);
  return add(t, mean_, mul(t, exp(t, log_std), noise));
}

}  // namespace depo::approx
