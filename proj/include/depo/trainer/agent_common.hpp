#pragma once

#include "depo/approx/params.hpp"
#include "depo/random.hpp"
#include "depo/trainer/config.hpp"
#include "depo/trainer/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace depo::trainer {

using approx::Matrix;
using approx::ParamVector;
using approx::Vector;

struct EvalResult {
  double mean_return = 0.0;
  double success_rate = 0.0;
  double planner_mse = kNotApplicable;
};

/// Running mean of a loss between metric rows.
struct LossMean {
  double sum = 0.0;
  long count = 0;
  void add(double v) {
    sum += v;
    ++count;
  }
  double take() {
    const double m = count ? sum / static_cast<double>(count) : kNotApplicable;
    sum = 0.0;
    count = 0;
    return m;
  }
};

struct AgentLosses {
  LossMean disc, q, inverse, supervised, cdepg, policy;
};

struct UpdateCounters {
  long disc = 0;
  long planner = 0;
  long q = 0;
  long inverse = 0;
};

inline void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericalError(what + " became non-finite");
}

/// RNG stream layout shared by the agents.
enum Stream : std::uint64_t { kInitStream = 1, kEnvStream = 2, kBatchStream = 3, kEvalStream = 4, kDemoStream = 5, kNoiseStream = 6 };

}  // namespace depo::trainer
