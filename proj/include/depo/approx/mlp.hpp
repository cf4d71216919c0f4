#pragma once

#include "depo/approx/params.hpp"
#include "depo/approx/tape.hpp"
#include "depo/random.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace depo::approx {

/// Fully connected net: input -> hidden... (tanh) -> output (linear).
/// Slices are "<prefix>/W<i>" (out x in) and "<prefix>/b<i>" (out x 1).
struct MlpShape {
  Eigen::Index input = 0;
  std::vector<Eigen::Index> hidden;
  Eigen::Index output = 0;

  std::size_t n_layers() const { return hidden.size() + 1; }
  Eigen::Index fan_in(std::size_t layer) const { return layer == 0 ? input : hidden[layer - 1]; }
  Eigen::Index fan_out(std::size_t layer) const { return layer == hidden.size() ? output : hidden[layer]; }
  bool operator==(const MlpShape&) const = default;
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(std::string prefix, MlpShape shape) : prefix_(std::move(prefix)), shape_(std::move(shape)) {
    if (shape_.input <= 0 || shape_.output <= 0) throw DimensionError("MLP needs positive input and output sizes");
    for (std::size_t l = 0; l < shape_.n_layers(); ++l) {
      weight_names_.push_back(prefix_ + "/W" + std::to_string(l));
      bias_names_.push_back(prefix_ + "/b" + std::to_string(l));
    }
  }

  void add_to(ParamLayout& layout) const {
    for (std::size_t l = 0; l < shape_.n_layers(); ++l) {
      layout.add(weight_names_[l], shape_.fan_out(l), shape_.fan_in(l));
      layout.add(bias_names_[l], shape_.fan_out(l), 1);
    }
  }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init(ParamVector& params, Rng& rng, double last_layer_scale = 1.0) const {
    for (std::size_t l = 0; l < shape_.n_layers(); ++l) {
      double bound = 1.0 / std::sqrt(static_cast<double>(shape_.fan_in(l)));
      if (l + 1 == shape_.n_layers()) bound *= last_layer_scale;
      auto W = params.view(weight_names_[l]);
      for (Eigen::Index j = 0; j < W.cols(); ++j)
        for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = uniform(rng, -bound, bound);
      auto b = params.view(bias_names_[l]);
      for (Eigen::Index i = 0; i < b.rows(); ++i) b(i, 0) = uniform(rng, -bound, bound);
    }
  }

  /// Forward pass without recording; columns of x are samples.
  Matrix forward(const ParamVector& params, const Matrix& x) const {
    check_input(x);
    Matrix h = x;
    for (std::size_t l = 0; l < shape_.n_layers(); ++l) {
      Matrix z = params.view(weight_names_[l]) * h;
      z.colwise() += params.view(bias_names_[l]).col(0);
      if (l + 1 < shape_.n_layers()) z = z.array().tanh();
      h = std::move(z);
    }
    return h;
  }

  Var forward(Tape& tape, const ParamVector& params, Var x) const {
    check_input(tape.value(x));
    Var h = x;
    for (std::size_t l = 0; l < shape_.n_layers(); ++l) {
      Var z = add_bias(tape, matmul(tape, tape.param(params, weight_names_[l]), h), tape.param(params, bias_names_[l]));
      h = (l + 1 < shape_.n_layers()) ? approx::tanh(tape, z) : z;
    }
    return h;
  }

  const MlpShape& shape() const { return shape_; }
  const std::string& prefix() const { return prefix_; }
  const std::string& weight_name(std::size_t layer) const { return weight_names_.at(layer); }
  const std::string& bias_name(std::size_t layer) const { return bias_names_.at(layer); }

 private:
  void check_input(const Matrix& x) const {
    if (x.rows() != shape_.input)
      throw DimensionError(prefix_ + ": input has " + std::to_string(x.rows()) + " rows, expected " +
                           std::to_string(shape_.input));
    if (!x.allFinite()) throw NumericalError(prefix_ + ": non-finite input");
  }

  std::string prefix_;
  MlpShape shape_;
  std::vector<std::string> weight_names_;
  std::vector<std::string> bias_names_;
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// Diagonal Gaussian whose mean and log-std are the two halves of an MLP output.
/// With `residual` set, the mean is the first `dim` input rows plus residual_scale times the
/// network's mean output (the network predicts a scaled change).
class GaussianHead {
 public:
  GaussianHead() = default;
  GaussianHead(std::string prefix, Eigen::Index input, std::vector<Eigen::Index> hidden, Eigen::Index dim,
               bool residual = false, double residual_scale = 1.0)
      : net_(std::move(prefix), MlpShape{input, std::move(hidden), 2 * dim}),
        dim_(dim),
        residual_(residual),
        residual_scale_(residual_scale) {
    if (residual_ && input < dim) throw DimensionError("residual Gaussian head needs input >= dim");
  }

  struct Out {
    Var mean;
    Var log_std;
  };

  Out forward(Tape& tape, const ParamVector& params, Var x) const {
    Var raw = net_.forward(tape, params, x);
    Var mean = rows(tape, raw, 0, dim_);
    if (residual_) mean = add(tape, scale(tape, mean, residual_scale_), rows(tape, x, 0, dim_));
    Var log_std = clamp(tape, rows(tape, raw, dim_, dim_), kLogStdMin, kLogStdMax);
    return {mean, log_std};
  }

  /// (mean, clamped log_std) without recording.
  std::pair<Matrix, Matrix> forward(const ParamVector& params, const Matrix& x) const {
    Matrix raw = net_.forward(params, x);
    Matrix mean = raw.topRows(dim_);
    if (residual_) mean = residual_scale_ * mean + x.topRows(dim_);
    Matrix log_std = raw.bottomRows(dim_).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    return {std::move(mean), std::move(log_std)};
  }

  Matrix sample(const ParamVector& params, const Matrix& x, const Matrix& eps) const {
    auto [mean, log_std] = forward(params, x);
    return mean + (log_std.array().exp() * eps.array()).matrix();
  }

  const Mlp& net() const { return net_; }
  Eigen::Index dim() const { return dim_; }
  bool residual() const { return residual_; }
  double residual_scale() const { return residual_scale_; }

 private:
  Mlp net_;
  Eigen::Index dim_ = 0;
  bool residual_ = false;
  double residual_scale_ = 1.0;
};

/// Categorical distribution over `outcomes` classes with logits from an MLP.
class CategoricalHead {
 public:
  CategoricalHead() = default;
  CategoricalHead(std::string prefix, Eigen::Index input, std::vector<Eigen::Index> hidden, Eigen::Index outcomes)
      : net_(std::move(prefix), MlpShape{input, std::move(hidden), outcomes}) {}

  Var log_probs(Tape& tape, const ParamVector& params, Var x) const {
    return log_softmax(tape, net_.forward(tape, params, x));
  }
  Matrix probs(const ParamVector& params, const Matrix& x) const { return softmax_columns(net_.forward(params, x)); }
  Matrix log_probs(const ParamVector& params, const Matrix& x) const {
    return log_softmax_columns(net_.forward(params, x));
  }

  const Mlp& net() const { return net_; }
  Eigen::Index outcomes() const { return net_.shape().output; }

 private:
  Mlp net_;
};

}  // namespace depo::approx
