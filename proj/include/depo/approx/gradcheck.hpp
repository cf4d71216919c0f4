#pragma once

#include "depo/approx/params.hpp"

#include <algorithm>
#include <cmath>

namespace depo::approx {

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  Eigen::Index worst_index = -1;
  Vector numeric;
};

/// Componentwise |analytic - numeric| / max(|analytic|, |numeric|, floor), where numeric is
/// the central difference of f with the given step. Components below the floor are judged
/// on absolute error.
template <class F>
GradCheckResult check_gradient(F&& f, const Vector& x0, const Vector& analytic, double step = 1e-5,
                               double floor = 1e-6) {
  if (analytic.size() != x0.size()) throw DimensionError("check_gradient: size mismatch");
  GradCheckResult r;
  r.numeric.resize(x0.size());
  Vector x = x0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x(i);
    x(i) = orig + step;
    const double fp = f(x);
    x(i) = orig - step;
    const double fm = f(x);
    x(i) = orig;
    r.numeric(i) = (fp - fm) / (2.0 * step);
    const double diff = std::abs(analytic(i) - r.numeric(i));
    const double denom = std::max({std::abs(analytic(i)), std::abs(r.numeric(i)), floor});
    r.max_absolute_error = std::max(r.max_absolute_error, diff);
    if (diff / denom > r.max_relative_error) {
      r.max_relative_error = diff / denom;
      r.worst_index = i;
    }
  }
  return r;
}

}  // namespace depo::approx
