#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rssgh {

/// Argument outside the mathematical domain of an operation (t <= 0, sigma <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Vector/matrix dimensions disagree with the model layout.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A life-table stratum or named selector could not be found.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Region graph is malformed (self loop, disconnected, out of range).
class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Singular Gram matrix in the spline g-prior.
class RankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration or input-file validation failure (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sampler could not make progress (CLI exit code 4).
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite intermediate while evaluating the model. `record` is the
/// offending observation index, or `npos` when the failure is not tied to one.
class NumericalError : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit NumericalError(const std::string& what, std::size_t record = npos)
      : std::runtime_error(what), record_(record) {}

  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

}  // namespace rssgh
