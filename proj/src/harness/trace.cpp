#include "snvrg/harness/trace.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace snvrg::harness {

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, end);
}

void write_events_csv(std::ostream& out, const std::vector<TrialRecord>& trials, bool wall_time) {
  out << kTraceHeader << '\n';
  for (const auto& rec : trials) {
    for (const auto& e : rec.outcome.trace.events) {
      out << rec.trial << ',' << e.u << ',' << to_string(e.kind) << ',' << e.grads_cum << ','
          << format_double(e.f_value) << ',';
      if (e.grad_norm) out << format_double(*e.grad_norm);
      out << ',';
      if (e.rayleigh) out << format_double(*e.rayleigh);
      out << ',';
      if (wall_time) out << format_double(e.wall_ms);
      out << '\n';
    }
  }
}

std::string summary_json(const TrialRecord& record) {
  nlohmann::ordered_json j;
  j["status"] = std::string(to_string(record.outcome.status));
  j["grads_total"] = record.outcome.grads_total;
  j["final_grad_norm"] = record.final_point.gradient_norm;
  j["final_lambda_min"] = record.final_point.lambda_min;
  return j.dump(2) + "\n";
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void close_checked(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw std::runtime_error("error while writing " + path.string());
}

}  // namespace

void write_trace(const std::vector<TrialRecord>& trials, const std::filesystem::path& dir, bool wall_time) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  const auto events = dir / "events.csv";
  auto csv = open_for_write(events);
  write_events_csv(csv, trials, wall_time);
  close_checked(csv, events);

  for (const auto& rec : trials) {
    const auto path = dir / ("trial_" + std::to_string(rec.trial) + ".json");
    auto out = open_for_write(path);
    out << summary_json(rec);
    close_checked(out, path);
  }
}

}  // namespace snvrg::harness
