#pragma once

#include "snvrg/driver.hpp"
#include "snvrg/problems.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace snvrg::harness {

/// Malformed experiment configuration. `line` is 1-based, 0 when unknown.
class ConfigParseError : public ConfigError {
 public:
  ConfigParseError(const std::string& source, int line, std::string field, const std::string& message)
      : ConfigError(source + ":" + std::to_string(line) + ": " + (field.empty() ? "" : field + ": ") + message),
        line_(line),
        field_(std::move(field)) {}

  [[nodiscard]] int line() const { return line_; }
  [[nodiscard]] const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

enum class Family { saddle, regularized, quadratic };

struct ProblemSpec {
  Family family = Family::saddle;
  std::int64_t dim = 10;
  std::int64_t n = 256;
  std::uint64_t seed = 0;
  std::optional<double> negative_eigenvalue;  ///< saddle (default -1) and quadratic
  std::optional<double> quartic_weight;       ///< saddle
  std::optional<double> radius;               ///< saddle
  std::optional<double> noise;                ///< gradient noise (saddle, quadratic) or label noise (regularized)
  std::optional<double> curvature_noise;      ///< saddle curvature noise or quadratic Hessian noise
  std::optional<double> regularizer_weight;   ///< regularized

  bool operator==(const ProblemSpec&) const = default;
};

struct AlgorithmSpec {
  Mode mode = Mode::finite;
  int smoothness_order = 2;
  double eps = 1e-3;
  double eps_H = 0.1;
  ConfigOverrides overrides;
  bool sqrt3_step = false;             ///< third-order online step sqrt(3 eps_H / L3)
  std::optional<double> boost_target;  ///< run boost() with this failure probability

  bool operator==(const AlgorithmSpec& o) const {
    return mode == o.mode && smoothness_order == o.smoothness_order && eps == o.eps && eps_H == o.eps_H &&
           overrides.B0 == o.overrides.B0 && overrides.U == o.overrides.U && overrides.M == o.overrides.M &&
           overrides.eta == o.overrides.eta && overrides.B0_check == o.overrides.B0_check &&
           sqrt3_step == o.sqrt3_step && boost_target == o.boost_target;
  }
};

struct ExperimentConfig {
  ProblemSpec problem;
  AlgorithmSpec algorithm;
  std::uint64_t trials = 1;
  std::uint64_t seed = 0;
  std::optional<std::string> output_dir;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Parse and validate a JSON document; `source` names it in diagnostics.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON text; parse_config(to_json(c)) == c.
std::string to_json(const ExperimentConfig& config);

std::string to_string(Family f);

/// Instantiate the objective. Online mode wraps a finite-sum instance as a stream.
std::shared_ptr<const Problem<double>> build_problem(const ProblemSpec& spec, Mode mode);

/// Theorem configuration for the algorithm spec, overrides applied.
DriverConfig<double> build_driver_config(const AlgorithmSpec& spec, const Problem<double>& problem);

}  // namespace snvrg::harness
