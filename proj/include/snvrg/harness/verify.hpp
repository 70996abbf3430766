#pragma once

#include "snvrg/problems.hpp"
#include "snvrg/schedule.hpp"

#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace snvrg::harness {

/// E f(G) for G ~ Geom(p) by direct summation, stopping once the remaining
/// tail is provably below `tail_tol`; f must satisfy |f(k)| <= growth (k + 1).
double geometric_expectation(double p, const std::function<double(std::uint64_t)>& f, double growth = 1.0,
                             double tail_tol = 1e-13);

struct LemmaC2Report {
  int instances = 0;
  int violations = 0;
  double worst_gap = -std::numeric_limits<double>::infinity();  ///< max of lhs - rhs
  bool tight_case_equal = false;  ///< a = 1, b(k) = k gives equality
  [[nodiscard]] bool pass() const { return violations == 0 && tight_case_equal; }
};

/// (1-p)/p E a(G) <= E b(G) whenever sum_{j<k} a(j) <= b(k), on random instances.
LemmaC2Report verify_lemma_c2(Rng& rng, int instances = 100);

struct LemmaD4Report {
  int families = 0;
  int failures = 0;
  double worst_ratio = 0;  ///< max estimate / bound over m < N
  double worst_full = 0;   ///< max estimate at m = N
  [[nodiscard]] bool pass() const { return failures == 0; }
};

/// Subset-mean variance bound on random zero-sum families, at m = 1, m = N and a random m.
LemmaD4Report verify_lemma_d4(Rng& rng, int families = 50, std::uint64_t subsets = 100000);

struct Lemma51Report {
  int trials = 0;
  double mean_grad_sq = 0;     ///< avg |grad F(x_T)|^2
  double mean_rhs = 0;         ///< avg of 100 [(M / sqrt B0)(F(x0) - F(x_T)) + (2 sigma2 / B0) 1{B0 < n}]
  double standard_error = 0;   ///< of the paired difference
  double mean_cost = 0;        ///< avg gradient evaluations per epoch
  double cost_bound = 0;       ///< 7 B0 log2^3 B0
  double exact_cost = 0;       ///< exact_expected_epoch_cost
  int left_domain = 0;
  [[nodiscard]] bool inequality_pass() const { return mean_grad_sq - mean_rhs <= 3 * standard_error; }
  [[nodiscard]] bool cost_pass() const { return mean_cost <= cost_bound; }
  [[nodiscard]] bool pass() const { return inequality_pass() && cost_pass() && left_domain == 0; }
};

/// Monte-Carlo check of the one-epoch guarantee from the problem's start point.
Lemma51Report verify_lemma_51(const FiniteSumProblem<double>& problem, const NestedSchedule& schedule, int trials,
                              Rng& rng);

struct LemmaC1Report {
  int trials = 0;
  std::uint64_t T = 0;
  double mean_lhs = 0;  ///< avg sum_{j<T} |grad F(x_j)|^2
  double mean_rhs = 0;  ///< avg 100 [M (F(x0) - F(x_T)) + 2 sigma2 T / B0 1{B0 < n}]
  double standard_error = 0;
  bool hypothesis_met = false;
  [[nodiscard]] bool pass() const { return hypothesis_met && mean_lhs - mean_rhs <= 3 * standard_error; }
};

/// Fixed-length epochs on an unclamped schedule.
LemmaC1Report verify_lemma_c1(const Problem<double>& problem, const NestedSchedule& schedule, std::uint64_t T,
                              int trials, Rng& rng);

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0;
};

std::vector<std::string> suite_names();

/// Throws std::invalid_argument for an unknown suite name.
SuiteResult run_suite(const std::string& name, std::uint64_t seed);

/// Runs the named suites (all when empty) and prints one row per suite.
bool run_verify(const std::vector<std::string>& names, std::uint64_t seed, std::ostream& out);

}  // namespace snvrg::harness
