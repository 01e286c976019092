#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cbf {

/// Malformed hypothesis text. `position()` is a 0-based offset into the input.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// A well-formed hypothesis that cannot be evaluated (redundant, infeasible, unsupported form).
class HypothesisError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent input data / sufficient statistics.
class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown (non-SPD covariance, failed factorization, ...).
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cbf
