#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace snvrg {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Identifiers of the samples making up a minibatch. For finite-sum problems
/// these are component indices in [0, n); for streaming problems they are
/// opaque keys that determine a fresh draw of the random variable.
using Batch = std::vector<std::uint64_t>;

/// Requested batch does not fit the population (m > n, or m == 0).
class SizingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base batch size too small for a nested schedule (K would be 0).
class ScheduleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Missing or inconsistent constants when deriving a driver configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Cumulative number of stochastic-gradient evaluations.
///
/// One unit per single component gradient (or stochastic gradient) call.
/// Verification oracles never touch it.
class GradCounter {
 public:
  void charge(std::uint64_t units) noexcept { count_ += units; }
  [[nodiscard]] std::uint64_t count() const noexcept { return count_; }

 private:
  std::uint64_t count_ = 0;
};

}  // namespace snvrg
