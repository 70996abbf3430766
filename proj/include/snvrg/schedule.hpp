#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace snvrg {

/**
 * Loop lengths and batch sizes of the nested variance-reduced epoch.
 *
 * Levels are numbered 0..K. Level 0 is the anchor (plain minibatch gradient of
 * size B0); level l >= 1 holds a correction refreshed with batch B_l. Vectors
 * T and B are stored 1-based in spirit: T[l - 1] is T_l and B[l - 1] is B_l.
 */
struct NestedSchedule {
  std::uint64_t B0 = 0;
  int K = 0;
  double M = 0;  ///< step-size parameter; the iterate moves by v / (10 M)
  std::vector<std::uint64_t> T;
  std::vector<std::uint64_t> B;
  bool clamped = false;  ///< some batch was cut down to the population size

  /// Batch used when level `level` is refreshed (B0 for level 0).
  [[nodiscard]] std::uint64_t batch(int level) const { return level == 0 ? B0 : B[level - 1]; }

  /// prod_{j=level+1}^{K} T_j (1 for level K).
  [[nodiscard]] std::uint64_t period(int level) const;

  /// prod_{l=1}^{K} T_l.
  [[nodiscard]] std::uint64_t loop_product() const { return period(0); }

  /// Geometric parameter of the epoch length, 1 / (1 + prod T_l).
  [[nodiscard]] double p() const { return 1.0 / (1.0 + static_cast<double>(loop_product())); }

  /// B_l >= 6^{K-l+1} (prod_{s=l}^{K} T_s)^2 for every l.
  [[nodiscard]] bool satisfies_variance_hypothesis() const;
};

/// Canonical schedule: K = floor(log2 log2 B0), T_1 = 2, T_l = 2^{2^{l-2}},
/// B_1 = 6^K B0, B_l = ceil(6^{K-l+1} B0 / 2^{2^{l-1}}). Throws ScheduleError for B0 < 4.
NestedSchedule derive_schedule(std::uint64_t B0, double M);

/// Cut every batch (and B0) down to n. Streaming callers pass kUnbounded.
NestedSchedule clamp_schedule(const NestedSchedule& schedule, std::uint64_t n);

inline constexpr std::uint64_t kUnbounded = std::numeric_limits<std::uint64_t>::max();

/// Closed-form expected gradient count per epoch, B0 + 2 sum_l B_l prod_{j<=l} T_j,
/// obtained by charging level l once per multiple of its period with E[T] = prod T_l.
double expected_epoch_cost(const NestedSchedule& schedule);

/**
 * Exact expected gradient count of one epoch as executed: step t refreshes only
 * the coarsest level r whose period divides t, so level l (l >= 1) is refreshed
 * ceil(T / P_l) - ceil(T / P_{l-1}) times, and E ceil(T / P) = (1-p) / (1 - (1-p)^P)
 * for T ~ Geom(p).
 */
double exact_expected_epoch_cost(const NestedSchedule& schedule);

/// E ceil(T / P) for T ~ Geom(p).
double expected_ceil_ratio(double p, std::uint64_t P);

/// Constant series of the variance analysis at one level s in [1, K].
struct CSeries {
  int s = 0;
  std::vector<double> values;  ///< values[j] = c_j^{(s)}, j = 0..T_s
  bool hypothesis_met = false;  ///< M >= 6 L
};

/// c_{T_s} = M / (6^{K-s+1} prod_{l=s}^K T_l);
/// c_j = (1 + 1/T_s) c_{j+1} + (3 L^2 / M) prod_{l=s+1}^K T_l / B_s.
CSeries c_series(const NestedSchedule& schedule, double L, int s);

struct LemmaD2Report {
  bool applicable = false;  ///< M >= 6L on an unclamped schedule meeting the batch hypothesis
  bool cross_level_pass = true;  ///< c_j^{(s-1)} (1 + T_{s-1}) < c_{T_s}^{(s)}, 2 <= s <= K
  bool last_level_pass = true;   ///< c_j^{(K)} (1 + T_K) < M
  double worst_cross_level_ratio = 0;  ///< max lhs / rhs (must stay < 1)
  double worst_last_level_ratio = 0;
  [[nodiscard]] bool pass() const { return cross_level_pass && last_level_pass; }
};

LemmaD2Report check_lemma_d2(const NestedSchedule& schedule, double L);

}  // namespace snvrg
