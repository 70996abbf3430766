#pragma once

#include "snvrg/harness/config.hpp"
#include "snvrg/harness/trace.hpp"

#include <string>
#include <vector>

namespace snvrg::harness {

/// Trial k runs on Rng(seed).split(k), so results do not depend on `jobs`.
std::vector<TrialRecord> run_trials(const Problem<double>& problem, const DriverConfig<double>& config,
                                     std::uint64_t trials, std::uint64_t seed, unsigned jobs = 1,
                                     std::optional<double> boost_target = std::nullopt);

/// Requested (formula) and effective parameter values as JSON.
std::string describe_config(const ExperimentConfig& experiment, const DriverConfig<double>& config,
                            const Problem<double>& problem);

}  // namespace snvrg::harness
