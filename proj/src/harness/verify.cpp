#include "snvrg/harness/verify.hpp"

#include "snvrg/epoch.hpp"
#include "snvrg/fixtures.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace snvrg::harness {

double geometric_expectation(double p, const std::function<double(std::uint64_t)>& f, double growth,
                             double tail_tol) {
  if (!(p > 0 && p <= 1)) throw std::invalid_argument("geometric_expectation: p must lie in (0, 1]");
  const double q = 1.0 - p;
  double sum = 0;
  double weight = p;  // p q^k
  for (std::uint64_t k = 0;; ++k) {
    sum += weight * f(k);
    weight *= q;
    // sum_{j>k} p q^j growth (j + 1) = growth q^{k+1} (k + 2 + q/p)
    const double tail = growth * std::pow(q, static_cast<double>(k + 1)) * (static_cast<double>(k) + 2.0 + q / p);
    if (tail < tail_tol) break;
  }
  return sum;
}

LemmaC2Report verify_lemma_c2(Rng& rng, int instances) {
  LemmaC2Report r;
  {
    const double p = 0.3;
    const double lhs = (1 - p) / p * geometric_expectation(p, [](std::uint64_t) { return 1.0; });
    const double rhs = geometric_expectation(p, [](std::uint64_t k) { return static_cast<double>(k); });
    r.tight_case_equal = std::abs(lhs - rhs) <= 1e-10 * (1 + rhs);
  }
  for (int i = 0; i < instances; ++i) {
    const double p = 0.02 + 0.88 * rng.uniform();
    const int shape = i % 3;  // 0: a == 0, 1: tight (no slack), 2: positive slack
    std::vector<double> a;
    std::vector<double> slack;
    auto grow = [&](std::uint64_t k) {
      while (a.size() <= k) {
        a.push_back(shape == 0 ? 0.0 : rng.uniform());
        slack.push_back(shape == 2 ? rng.uniform() : 0.0);
      }
    };
    std::vector<double> prefix{0.0};  // prefix[k] = sum_{j<k} a(j)
    auto b = [&](std::uint64_t k) {
      grow(k);
      while (prefix.size() <= k) prefix.push_back(prefix.back() + a[prefix.size() - 1]);
      return prefix[k] + slack[k];
    };
    const double ea = geometric_expectation(p, [&](std::uint64_t k) {
      grow(k);
      return a[k];
    });
    const double eb = geometric_expectation(p, b, 2.0);
    const double lhs = (1 - p) / p * ea;
    const double gap = lhs - eb;
    r.worst_gap = std::max(r.worst_gap, gap);
    if (gap > 1e-12 * (1 + std::abs(eb))) ++r.violations;
    ++r.instances;
  }
  return r;
}

LemmaD4Report verify_lemma_d4(Rng& rng, int families, std::uint64_t subsets) {
  LemmaD4Report r;
  for (int f = 0; f < families; ++f) {
    const Index d = 1 + static_cast<Index>(rng.below(5));
    const Index N = 2 + static_cast<Index>(rng.below(29));
    Matrix<double> a(d, N);
    const double scale = 0.1 + 3.0 * rng.uniform();
    for (Index i = 0; i < N; ++i)
      for (Index j = 0; j < d; ++j) a(j, i) = scale * rng.normal();
    a.colwise() -= a.rowwise().mean();

    const Index m_mid = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(N - 1)));
    for (Index m : {Index{1}, m_mid}) {
      const SubsetVarianceCheck c = subset_mean_variance(a, m, subsets, rng);
      r.worst_ratio = std::max(r.worst_ratio, c.estimate / c.bound);
      if (!c.holds()) ++r.failures;
    }
    const SubsetVarianceCheck full = subset_mean_variance(a, N, 100, rng);
    r.worst_full = std::max(r.worst_full, full.estimate);
    if (!full.holds()) ++r.failures;
    ++r.families;
  }
  return r;
}

namespace {

struct Paired {
  double mean_a = 0;
  double mean_b = 0;
  double se = 0;
};

Paired paired_stats(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  Paired s;
  double mean_d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s.mean_a += a[i];
    s.mean_b += b[i];
    mean_d += a[i] - b[i];
  }
  s.mean_a /= n;
  s.mean_b /= n;
  mean_d /= n;
  double var = 0;
  for (std::size_t i = 0; i < a.size(); ++i) var += std::pow(a[i] - b[i] - mean_d, 2);
  s.se = a.size() > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
  return s;
}

}  // namespace

Lemma51Report verify_lemma_51(const FiniteSumProblem<double>& problem, const NestedSchedule& schedule, int trials,
                              Rng& rng) {
  Lemma51Report r;
  r.trials = trials;
  const double B0 = static_cast<double>(schedule.B0);
  const double sigma2 = problem.smoothness().sigma2;
  const double noise = schedule.B0 < problem.size() ? 2.0 * sigma2 / B0 : 0.0;
  const double f0 = problem.value(problem.start());
  const double lb = std::log2(B0);
  r.cost_bound = 7.0 * B0 * lb * lb * lb;
  r.exact_cost = exact_expected_epoch_cost(schedule);

  std::vector<double> lhs, rhs;
  double cost = 0;
  for (int t = 0; t < trials; ++t) {
    Rng epoch_rng = rng.split(static_cast<std::uint64_t>(t));
    GradCounter counter;
    const EpochResult<double> e = run_epoch(problem.start(), problem, schedule, epoch_rng, counter);
    if (e.left_domain) ++r.left_domain;
    cost += static_cast<double>(e.grads_used);
    lhs.push_back(problem.gradient(e.x_out).squaredNorm());
    rhs.push_back(100.0 * (schedule.M / std::sqrt(B0) * (f0 - problem.value(e.x_out)) + noise));
  }
  const Paired s = paired_stats(lhs, rhs);
  r.mean_grad_sq = s.mean_a;
  r.mean_rhs = s.mean_b;
  r.standard_error = s.se;
  r.mean_cost = cost / trials;
  return r;
}

LemmaC1Report verify_lemma_c1(const Problem<double>& problem, const NestedSchedule& schedule, std::uint64_t T,
                              int trials, Rng& rng) {
  LemmaC1Report r;
  r.trials = trials;
  r.T = T;
  const double L = problem.smoothness().L1;
  r.hypothesis_met = schedule.M >= 6.0 * L && !schedule.clamped && schedule.satisfies_variance_hypothesis();
  const auto n = problem.population();
  const double B0 = static_cast<double>(schedule.B0);
  const double noise = (!n || schedule.B0 < *n) ? 2.0 * problem.smoothness().sigma2 * static_cast<double>(T) / B0 : 0.0;
  const double f0 = problem.value(problem.start());

  std::vector<double> lhs, rhs;
  for (int t = 0; t < trials; ++t) {
    Rng epoch_rng = rng.split(static_cast<std::uint64_t>(t));
    GradCounter counter;
    double sum = 0;
    EpochOptions<double> opts;
    opts.fixed_length = T;
    opts.observer = [&](const EpochState<double>& s) { sum += problem.gradient(s.x).squaredNorm(); };
    const EpochResult<double> e = run_epoch(problem.start(), problem, schedule, epoch_rng, counter, opts);
    lhs.push_back(sum);
    rhs.push_back(100.0 * (schedule.M * (f0 - problem.value(e.x_out)) + noise));
  }
  const Paired s = paired_stats(lhs, rhs);
  r.mean_lhs = s.mean_a;
  r.mean_rhs = s.mean_b;
  r.standard_error = s.se;
  return r;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

SuiteResult suite_schedule() {
  SuiteResult r{"schedule", true, ""};
  int checked = 0;
  for (std::uint64_t B0 : {4ULL, 16ULL, 256ULL, 65536ULL}) {
    const NestedSchedule s = derive_schedule(B0, 6.0);
    const int K = static_cast<int>(std::lround(std::log2(std::log2(static_cast<double>(B0)))));
    bool ok = s.K == K && s.loop_product() * s.loop_product() == B0;
    for (int l = 1; l <= K; ++l) {
      const std::uint64_t Tl = l == 1 ? 2 : std::uint64_t{1} << (std::uint64_t{1} << (l - 2));
      std::uint64_t six = 1;
      for (int j = 0; j < K - l + 1; ++j) six *= 6;
      const std::uint64_t den = l == 1 ? 1 : std::uint64_t{1} << (std::uint64_t{1} << (l - 1));
      const std::uint64_t Bl = six * B0 / den;
      ok = ok && s.T[l - 1] == Tl && s.B[l - 1] == Bl;
    }
    ok = ok && s.satisfies_variance_hypothesis();
    const double lb = std::log2(static_cast<double>(B0));
    ok = ok && expected_epoch_cost(s) <= 7.0 * static_cast<double>(B0) * lb * lb * lb;
    if (!ok) {
      r.pass = false;
      r.detail += "B0=" + std::to_string(B0) + " mismatch; ";
    }
    ++checked;
  }
  if (r.pass) r.detail = std::to_string(checked) + " canonical schedules exact";
  return r;
}

SuiteResult suite_lemma_c2(std::uint64_t seed) {
  Rng rng = Rng(seed).split(0xC2);
  const LemmaC2Report rep = verify_lemma_c2(rng);
  return {"lemma-c2", rep.pass(),
          std::to_string(rep.instances) + " instances, " + std::to_string(rep.violations) +
              " violations, worst gap " + fmt(rep.worst_gap)};
}

SuiteResult suite_lemma_d4(std::uint64_t seed) {
  Rng rng = Rng(seed).split(0xD4);
  const LemmaD4Report rep = verify_lemma_d4(rng);
  return {"lemma-d4", rep.pass(),
          std::to_string(rep.families) + " families, worst estimate/bound " + fmt(rep.worst_ratio) +
              ", worst full-set value " + fmt(rep.worst_full)};
}

SuiteResult suite_lemma_d2() {
  SuiteResult r{"lemma-d2", true, ""};
  double worst = 0;
  for (std::uint64_t B0 : {4ULL, 16ULL, 256ULL, 65536ULL, 4294967296ULL}) {
    const LemmaD2Report rep = check_lemma_d2(derive_schedule(B0, 6.0), 1.0);
    worst = std::max({worst, rep.worst_cross_level_ratio, rep.worst_last_level_ratio});
    if (!rep.applicable || !rep.pass()) {
      r.pass = false;
      r.detail += "B0=" + std::to_string(B0) + " fails; ";
    }
  }
  r.detail += "worst lhs/rhs " + fmt(worst);
  return r;
}

SuiteResult suite_lemma_51(std::uint64_t seed) {
  auto problem = make_regularized_problem<double>(50, 1000, seed);
  const NestedSchedule s = clamp_schedule(derive_schedule(256, 6.0 * problem->smoothness().L1), problem->size());
  Rng rng = Rng(seed).split(0x51);
  const Lemma51Report rep = verify_lemma_51(*problem, s, 200, rng);
  return {"lemma-51", rep.pass(),
          "avg |grad|^2 " + fmt(rep.mean_grad_sq) + " vs bound " + fmt(rep.mean_rhs) + " (se " +
              fmt(rep.standard_error) + "), avg cost " + fmt(rep.mean_cost) + " <= " + fmt(rep.cost_bound)};
}

SuiteResult suite_lemma_c1(std::uint64_t seed) {
  auto base = make_regularized_problem<double>(20, 1000, seed);
  auto stream = make_streaming<double>(base);
  const NestedSchedule s = derive_schedule(16, 6.0 * stream->smoothness().L1);
  Rng rng = Rng(seed).split(0xC1);
  const LemmaC1Report rep = verify_lemma_c1(*stream, s, 8, 200, rng);
  return {"lemma-c1", rep.pass(),
          "avg sum |grad|^2 " + fmt(rep.mean_lhs) + " vs bound " + fmt(rep.mean_rhs) + " (se " +
              fmt(rep.standard_error) + ")"};
}

}  // namespace

std::vector<std::string> suite_names() {
  return {"schedule", "lemma-c2", "lemma-d4", "lemma-d2", "lemma-51", "lemma-c1"};
}

SuiteResult run_suite(const std::string& name, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult r;
  if (name == "schedule") {
    r = suite_schedule();
  } else if (name == "lemma-c2") {
    r = suite_lemma_c2(seed);
  } else if (name == "lemma-d4") {
    r = suite_lemma_d4(seed);
  } else if (name == "lemma-d2") {
    r = suite_lemma_d2();
  } else if (name == "lemma-51") {
    r = suite_lemma_51(seed);
  } else if (name == "lemma-c1") {
    r = suite_lemma_c1(seed);
  } else {
    throw std::invalid_argument("unknown suite '" + name + "'");
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

bool run_verify(const std::vector<std::string>& names, std::uint64_t seed, std::ostream& out) {
  const std::vector<std::string> selected = names.empty() ? suite_names() : names;
  bool all = true;
  out << std::left << std::setw(10) << "suite" << std::setw(8) << "result" << std::setw(10) << "seconds"
      << "detail\n";
  for (const auto& name : selected) {
    const SuiteResult r = run_suite(name, seed);
    all = all && r.pass;
    out << std::left << std::setw(10) << r.name << std::setw(8) << (r.pass ? "PASS" : "FAIL") << std::setw(10)
        << fmt(r.seconds) << r.detail << '\n';
  }
  return all;
}

}  // namespace snvrg::harness
