#pragma once

#include <stdexcept>
#include <string>

namespace depo {

/// Shapes of two operands disagree.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// A value violates a documented invariant (probabilities, ranges, etc).
class InvariantError : public std::invalid_argument {
 public:
  explicit InvariantError(const std::string& what) : std::invalid_argument(what) {}
};

/// A precondition of an operation does not hold for the given arguments.
class PreconditionError : public std::invalid_argument {
 public:
  explicit PreconditionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure during training or solving (NaN loss, singular system, support collapse).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace depo
