#pragma once

#include "depo/approx/params.hpp"
#include "depo/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

namespace depo::decoupled {

using approx::Matrix;
using approx::ParamVector;
using approx::Vector;

/// Loss value and its gradient with respect to one parameter vector.
struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

/// The three planner gradient components and their weighted sum:
/// combined = depg + lambda_h * (supervised + cdepg).
struct GradientReport {
  Vector depg;
  Vector cdepg;
  Vector supervised;
  Vector combined;
  double lambda_h = 0.0;
  double supervised_loss = 0.0;
  double cdepg_loss = 0.0;
};

inline GradientReport assemble(Vector depg, Vector supervised, Vector cdepg, double lambda_h) {
  if (depg.size() != supervised.size() || depg.size() != cdepg.size())
    throw DimensionError("gradient components have different sizes");
  GradientReport r;
  r.combined = depg + lambda_h * (supervised + cdepg);
  r.depg = std::move(depg);
  r.supervised = std::move(supervised);
  r.cdepg = std::move(cdepg);
  r.lambda_h = lambda_h;
  return r;
}

/// Per-batch min-max normalization into [0, 1]; a constant batch maps to all ones.
inline Vector normalize_q(const Vector& q) {
  if (q.size() == 0) throw PreconditionError("cannot normalize an empty Q batch");
  if (!q.allFinite()) throw NumericalError("non-finite Q value in batch");
  const double lo = q.minCoeff();
  const double hi = q.maxCoeff();
  if (hi == lo) return Vector::Ones(q.size());
  return (q.array() - lo) / (hi - lo);
}

/// Importance weight floor and clip for the likelihood-ratio DePG estimator.
struct ImportanceWeighting {
  double clip = 50.0;
  double floor = 1e-8;
};

inline double importance_weight(double q, double pi, const ImportanceWeighting& iw) {
  if (!(pi >= iw.floor))
    throw NumericalError("pi(a|s) = " + std::to_string(pi) + " below floor; policy support has collapsed");
  return std::clamp(q / pi, -iw.clip, iw.clip);
}

}  // namespace depo::decoupled
