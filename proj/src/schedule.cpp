#include "snvrg/schedule.hpp"

#include "snvrg/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace snvrg {

namespace {

using u128 = unsigned __int128;

constexpr u128 kU64Max = std::numeric_limits<std::uint64_t>::max();

u128 pow_u128(u128 base, int exp) {
  u128 r = 1;
  while (exp-- > 0) r *= base;
  return r;
}

std::uint64_t checked(u128 v, const char* what) {
  if (v > kU64Max) throw ScheduleError(std::string("schedule overflow computing ") + what);
  return static_cast<std::uint64_t>(v);
}

int floor_log2(std::uint64_t v) {
  int r = -1;
  while (v) {
    v >>= 1;
    ++r;
  }
  return r;
}

}  // namespace

std::uint64_t NestedSchedule::period(int level) const {
  std::uint64_t prod = 1;
  for (int j = level + 1; j <= K; ++j) prod *= T[j - 1];
  return prod;
}

bool NestedSchedule::satisfies_variance_hypothesis() const {
  for (int l = 1; l <= K; ++l) {
    const u128 tail = period(l - 1);  // prod_{s=l}^K T_s
    if (static_cast<u128>(B[l - 1]) < pow_u128(6, K - l + 1) * tail * tail) return false;
  }
  return true;
}

NestedSchedule derive_schedule(std::uint64_t B0, double M) {
  if (B0 < 4) {
    throw ScheduleError("base batch size " + std::to_string(B0) + " < 4 gives K = 0 nested loops");
  }
  if (!(M > 0) || !std::isfinite(M)) throw ScheduleError("step parameter M must be positive");

  NestedSchedule s;
  s.B0 = B0;
  s.M = M;
  // K = floor(log2 log2 B0) = floor(log2 floor(log2 B0)), exact in integers.
  s.K = floor_log2(static_cast<std::uint64_t>(floor_log2(B0)));
  s.T.resize(s.K);
  s.B.resize(s.K);
  for (int l = 1; l <= s.K; ++l) {
    s.T[l - 1] = l == 1 ? 2 : std::uint64_t{1} << (std::uint64_t{1} << (l - 2));
    const u128 num = pow_u128(6, s.K - l + 1) * B0;
    const u128 den = l == 1 ? 1 : u128{1} << (u128{1} << (l - 1));
    s.B[l - 1] = std::max<std::uint64_t>(1, checked((num + den - 1) / den, "batch size"));
  }
  return s;
}

NestedSchedule clamp_schedule(const NestedSchedule& schedule, std::uint64_t n) {
  if (n == 0) throw SizingError("population must be at least 1");
  NestedSchedule out = schedule;
  if (n == kUnbounded) return out;
  auto clamp = [&](std::uint64_t& b) {
    if (b > n) {
      b = n;
      out.clamped = true;
    }
  };
  clamp(out.B0);
  for (auto& b : out.B) clamp(b);
  return out;
}

double expected_epoch_cost(const NestedSchedule& schedule) {
  double cost = static_cast<double>(schedule.B0);
  double prefix = 1;
  for (int l = 1; l <= schedule.K; ++l) {
    prefix *= static_cast<double>(schedule.T[l - 1]);
    cost += 2.0 * static_cast<double>(schedule.B[l - 1]) * prefix;
  }
  return cost;
}

double expected_ceil_ratio(double p, std::uint64_t P) {
  const double q = 1.0 - p;
  // 1 - q^P computed without cancellation.
  const double denom = -std::expm1(static_cast<double>(P) * std::log1p(-p));
  return q / denom;
}

double exact_expected_epoch_cost(const NestedSchedule& schedule) {
  const double p = schedule.p();
  double previous = expected_ceil_ratio(p, schedule.period(0));
  double cost = static_cast<double>(schedule.B0) * previous;
  for (int l = 1; l <= schedule.K; ++l) {
    const double current = expected_ceil_ratio(p, schedule.period(l));
    cost += 2.0 * static_cast<double>(schedule.B[l - 1]) * (current - previous);
    previous = current;
  }
  return cost;
}

CSeries c_series(const NestedSchedule& schedule, double L, int s) {
  if (s < 1 || s > schedule.K) throw std::invalid_argument("c_series: level out of range");
  const int K = schedule.K;
  const double M = schedule.M;
  const auto Ts = schedule.T[s - 1];
  const double tail = static_cast<double>(schedule.period(s - 1));  // prod_{l=s}^K T_l
  const double inner = static_cast<double>(schedule.period(s));     // prod_{l=s+1}^K T_l

  CSeries out;
  out.s = s;
  out.hypothesis_met = M >= 6.0 * L;
  out.values.assign(Ts + 1, 0.0);
  out.values[Ts] = M / (std::pow(6.0, K - s + 1) * tail);
  const double additive = 3.0 * L * L / M * inner / static_cast<double>(schedule.B[s - 1]);
  const double growth = 1.0 + 1.0 / static_cast<double>(Ts);
  for (auto j = static_cast<std::int64_t>(Ts) - 1; j >= 0; --j) {
    out.values[j] = growth * out.values[j + 1] + additive;
  }
  return out;
}

LemmaD2Report check_lemma_d2(const NestedSchedule& schedule, double L) {
  LemmaD2Report r;
  r.applicable = schedule.M >= 6.0 * L && !schedule.clamped && schedule.satisfies_variance_hypothesis();
  const int K = schedule.K;
  for (int s = 2; s <= K; ++s) {
    const CSeries prev = c_series(schedule, L, s - 1);
    const double rhs = c_series(schedule, L, s).values.back();
    const double factor = 1.0 + static_cast<double>(schedule.T[s - 2]);
    for (double c : prev.values) {
      const double ratio = c * factor / rhs;
      r.worst_cross_level_ratio = std::max(r.worst_cross_level_ratio, ratio);
      if (!(ratio < 1.0)) r.cross_level_pass = false;
    }
  }
  const CSeries last = c_series(schedule, L, K);
  const double factor = 1.0 + static_cast<double>(schedule.T[K - 1]);
  for (double c : last.values) {
    const double ratio = c * factor / schedule.M;
    r.worst_last_level_ratio = std::max(r.worst_last_level_ratio, ratio);
    if (!(ratio < 1.0)) r.last_level_pass = false;
  }
  return r;
}

}  // namespace snvrg
