#pragma once

#include "depo/errors.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace depo::approx {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A named, column-major rows x cols block of a flat parameter array.
struct Slice {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
  bool operator==(const Slice&) const = default;
};

/// Ordered slices that tile [0, size()) without gaps or overlap.
class ParamLayout {
 public:
  const Slice& add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    if (rows <= 0 || cols <= 0) throw DimensionError("slice '" + name + "' must have positive shape");
    if (find(name) != nullptr) throw InvariantError("duplicate slice name '" + name + "'");
    slices_.push_back(Slice{std::move(name), size_, rows, cols});
    size_ += rows * cols;
    return slices_.back();
  }

  const Slice* find(std::string_view name) const {
    for (const auto& s : slices_)
      if (s.name == name) return &s;
    return nullptr;
  }

  const Slice& slice(std::string_view name) const {
    if (const auto* s = find(name)) return *s;
    throw InvariantError("no parameter slice named '" + std::string(name) + "'");
  }

  const std::vector<Slice>& slices() const { return slices_; }
  Eigen::Index size() const { return size_; }
  bool operator==(const ParamLayout&) const = default;

 private:
  std::vector<Slice> slices_;
  Eigen::Index size_ = 0;
};

class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(ParamLayout layout) : layout_(std::move(layout)), values_(Vector::Zero(layout_.size())) {}
  ParamVector(ParamLayout layout, Vector values) : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != layout_.size()) throw DimensionError("parameter array length differs from its layout");
  }

  Eigen::Map<Matrix> view(std::string_view name) {
    const auto& s = layout_.slice(name);
    return {values_.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<const Matrix> view(std::string_view name) const {
    const auto& s = layout_.slice(name);
    return {values_.data() + s.offset, s.rows, s.cols};
  }

  const ParamLayout& layout() const { return layout_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }
  Eigen::Index size() const { return values_.size(); }

  bool all_finite() const { return values_.allFinite(); }
  bool operator==(const ParamVector& o) const { return layout_ == o.layout_ && values_ == o.values_; }

 private:
  ParamLayout layout_;
  Vector values_;
};

}  // namespace depo::approx
