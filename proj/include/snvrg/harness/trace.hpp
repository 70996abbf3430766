#pragma once

#include "snvrg/driver.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace snvrg::harness {

/// One finished trial with its exact end-point classification.
struct TrialRecord {
  std::uint64_t trial = 0;
  DriverOutcome<double> outcome;
  PointClass<double> final_point;
};

inline constexpr const char* kTraceHeader = "trial,u,event,grads_cum,f_value,grad_norm,rayleigh,wall_ms";

/// Shortest decimal that reads back to the same double.
std::string format_double(double v);

/// Events of every trial in trial order. wall_ms stays empty unless `wall_time`.
void write_events_csv(std::ostream& out, const std::vector<TrialRecord>& trials, bool wall_time = false);

/// {status, grads_total, final_grad_norm, final_lambda_min}
std::string summary_json(const TrialRecord& record);

/// events.csv plus trial_<k>.json under `dir` (created if needed).
void write_trace(const std::vector<TrialRecord>& trials, const std::filesystem::path& dir, bool wall_time = false);

}  // namespace snvrg::harness
