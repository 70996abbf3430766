#include "snvrg/driver.hpp"
#include "snvrg/fixtures.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace snvrg;
using snvrg::test_support::constants_problem;
using snvrg::test_support::constants_stream;

namespace {

void expect_rel(double actual, double expected, double tol = 1e-12) {
  EXPECT_LE(std::abs(actual - expected), tol * std::abs(expected)) << actual << " vs " << expected;
}

std::vector<EventKind> kinds(const RunTrace& t) {
  std::vector<EventKind> out;
  for (const auto& e : t.events) out.push_back(e.kind);
  return out;
}

}  // namespace

TEST(ConfigFinite2nd, StepSize) {
  auto p = constants_problem(100, 1, 2, 1);
  expect_rel(config_finite_2nd<double>(*p, 0.1, 0.1).eta, 0.05);
}

TEST(ConfigFinite2nd, FinderDelta) {
  auto p = constants_problem(100, 1, 1, 1);
  expect_rel(config_finite_2nd<double>(*p, 0.1, 0.1).delta, 1e-3 / 144);
}

TEST(ConfigFinite2nd, OuterBudget) {
  auto p = constants_problem(100, 1, 1, 1);
  const auto c = config_finite_2nd<double>(*p, 0.1, 0.5);
  EXPECT_EQ(c.U, 18192u);
  EXPECT_EQ(c.schedule.B0, 100u);
  EXPECT_DOUBLE_EQ(c.schedule.M, 6.0);
  EXPECT_EQ(c.B0_check, 100u);
  EXPECT_EQ(c.mode, Mode::finite);
}

TEST(ConfigFinite2nd, MissingConstantsRejected) {
  auto p = constants_problem(100, 1, 0, 1);
  EXPECT_THROW(config_finite_2nd<double>(*p, 0.1, 0.1), ConfigError);
  auto q = constants_problem(100, 1, 1, 0);
  EXPECT_THROW(config_finite_2nd<double>(*q, 0.1, 0.1), ConfigError);
  auto s = constants_stream(1, 1, 1, std::nullopt, 1);
  EXPECT_THROW(config_finite_2nd<double>(*s, 0.1, 0.1), ConfigError);
  EXPECT_THROW(config_finite_2nd<double>(*p, 1.5, 0.1), ConfigError);
}

TEST(ConfigFinite2nd, OverridesReplaceEffectiveValuesOnly) {
  auto p = constants_problem(100, 1, 1, 1);
  ConfigOverrides o;
  o.U = 7;
  o.eta = 0.25;
  o.B0 = 16;
  const auto c = config_finite_2nd<double>(*p, 0.1, 0.5, o);
  EXPECT_EQ(c.U, 7u);
  EXPECT_EQ(c.eta, 0.25);
  EXPECT_EQ(c.schedule.B0, 16u);
  EXPECT_EQ(c.B0_check, 16u);
  EXPECT_DOUBLE_EQ(c.theory.U, 192.0 + 1800.0 / (0.1 * 0.1 * 10.0));
  EXPECT_DOUBLE_EQ(c.theory.B0, 100.0);
}

TEST(ConfigFinite2nd, TinyDeltaFlooredForFinder) {
  auto p = constants_problem(100, 1, 1000, 1000);
  const auto c = config_finite_2nd<double>(*p, 0.1, 0.01);
  EXPECT_LT(c.delta, kMinFinderDelta);
  EXPECT_EQ(c.finder_delta(), kMinFinderDelta);
}

TEST(ConfigOnline2nd, RhoFloorAndM) {
  auto s = constants_stream(1, 1, 1, std::nullopt, 1);
  const auto c = config_online_2nd<double>(*s, 0.1, 0.5);
  ASSERT_TRUE(c.rho.has_value());
  EXPECT_EQ(*c.rho, 6.0);
  expect_rel(c.schedule.M, 12.0);
}

TEST(ConfigOnline2nd, RhoAboveFloor) {
  // 54 sigma2 L2^2 / (L1 eps_H^3 sqrt(B0)) with B0 forced to 10000: 54 * 8 / (1 * 0.001 * 100) = 4320.
  auto s = constants_stream(2, 1, 1, std::nullopt, 8);
  ConfigOverrides o;
  o.B0 = 10000;
  const auto c = config_online_2nd<double>(*s, 0.1, 0.1, o);
  expect_rel(*c.rho, 54.0 * 8 / (2 * 1e-3 * 100));
  expect_rel(c.schedule.M, 2 * *c.rho * 2);
  ASSERT_TRUE(c.theory.rho.has_value());
  EXPECT_NE(*c.theory.rho, *c.rho);
}

TEST(ConfigOnline2nd, BatchSizeTakesLargerBranch) {
  auto s = constants_stream(1, 1, 1, std::nullopt, 1);
  const auto c = config_online_2nd<double>(*s, 0.1, 0.5);
  const double curvature = 54.0 / 0.125;
  const double log_branch = 64.0 * (1 + std::log2(2500.0 * 200 * curvature / 0.01));
  EXPECT_LT(log_branch, 96.0 * 200);
  expect_rel(c.theory.B0, 1'920'000.0);
  EXPECT_EQ(c.schedule.B0, 1'920'000u);
  EXPECT_EQ(c.B0_check, 1'920'000u);
}

TEST(ConfigOnline2nd, DeltaUAndEta) {
  auto s = constants_stream(1, 2, 3, std::nullopt, 1);
  const auto c = config_online_2nd<double>(*s, 0.1, 0.5);
  expect_rel(c.delta, 1.0 / (3000.0 * 3 * 4 / 0.125));
  expect_rel(c.eta, 0.25);
  const double U = 216.0 * 3 * 4 / 0.125 + 96.0 * 200 * 6 * 3 * 1 / (std::sqrt(c.theory.B0) * 0.01);
  EXPECT_EQ(c.U, static_cast<std::uint64_t>(std::ceil(U)));
}

TEST(ConfigOnline2nd, MissingSigmaRejected) {
  auto s = constants_stream(1, 1, 1, std::nullopt, 0);
  EXPECT_THROW(config_online_2nd<double>(*s, 0.1, 0.5), ConfigError);
}

TEST(ConfigFinite3rd, StepSizeExamples) {
  auto p = constants_problem(100, 1, 1, 1, 1.0);
  expect_rel(config_finite_3rd<double>(*p, 0.1, 0.3).eta, std::sqrt(0.9));
  const double ratio = config_finite_3rd<double>(*p, 0.1, 0.01).eta / config_finite_2nd<double>(*p, 0.1, 0.01).eta;
  expect_rel(ratio, std::sqrt(0.03) / 0.01);
  EXPECT_NEAR(ratio, 17.3, 0.05);
}

TEST(ConfigFinite3rd, DeltaAndU) {
  auto p = constants_problem(100, 1, 1, 1, 2.0);
  const auto c = config_finite_3rd<double>(*p, 0.1, 0.1);
  expect_rel(c.delta, 0.01 / 144);
  const double U = 12.0 * 2 / 0.01 + 1800.0 * 600 / (0.01 * 10);
  EXPECT_EQ(c.U, static_cast<std::uint64_t>(std::ceil(U)));
  EXPECT_EQ(c.smoothness_order, 3);
}

TEST(ConfigFinite3rd, MissingL3Rejected) {
  auto p = constants_problem(100, 1, 1, 1);
  EXPECT_THROW(config_finite_3rd<double>(*p, 0.1, 0.1), ConfigError);
}

TEST(ConfigOnline3rd, Examples) {
  auto s = constants_stream(1, 1, 1, 1.0, 1);
  expect_rel(config_online_3rd<double>(*s, 0.1, 0.25).eta, 0.5);
  expect_rel(config_online_3rd<double>(*s, 0.1, 0.25, {}, true).eta, std::sqrt(0.75));
  const auto c = config_online_3rd<double>(*s, 0.1, 0.1);
  expect_rel(c.delta, 1e-5);
  EXPECT_EQ(*c.rho, 6.0);
  expect_rel(c.schedule.M, 12.0);
}

TEST(ConfigOnline3rd, MissingConstantsRejected) {
  EXPECT_THROW(config_online_3rd<double>(*constants_stream(1, 1, 1, std::nullopt, 1), 0.1, 0.1), ConfigError);
  EXPECT_THROW(config_online_3rd<double>(*constants_stream(1, 1, 1, 1.0, 0), 0.1, 0.1), ConfigError);
}

TEST(GradientCheckSampleSize, Formula) {
  // 2 sigma2 / r^2 (1 + sqrt(log2(1/delta)))^2 with sigma2 = 1, r = 0.5, delta = 1/16: 8 * 9 = 72.
  EXPECT_EQ(lemma_a5_sample_size(1.0, 0.5, 1.0 / 16), 72u);
  EXPECT_THROW(lemma_a5_sample_size(1.0, 0.0, 0.1), ConfigError);
}

TEST(NcDescentStep, ZeroStepAndLength) {
  Rng rng(1);
  const Vector<double> z = Vector<double>::LinSpaced(4, 0, 1);
  const Vector<double> v = Vector<double>::Unit(4, 2);
  EXPECT_EQ(nc_descent_step(z, v, 0.0, rng), z);
  for (int k = 0; k < 10; ++k) EXPECT_NEAR((nc_descent_step(z, v, 0.3, rng) - z).norm(), 0.3, 1e-15);
}

TEST(NcDescentStep, SignsBalanced) {
  Rng rng(2);
  const Vector<double> z = Vector<double>::Zero(1);
  int plus = 0;
  for (int k = 0; k < 20000; ++k) plus += nc_descent_step(z, Vector<double>::Ones(1), 1.0, rng)(0) > 0;
  EXPECT_NEAR(plus / 20000.0, 0.5, 0.015);
}

TEST(NcDescentStep, QuadraticAverageDecrease) {
  Rng rng(3);
  Vector<double> eigs(4);
  eigs << -0.7, 0.2, 1, 1.5;
  const Matrix<double> H = random_symmetric_with_spectrum(eigs, rng);
  auto p = make_quadratic_problem<double>(H, 1, 0, {0, 0, 1});
  const Vector<double> z = Vector<double>::LinSpaced(4, -1, 2);
  const Vector<double> v = Vector<double>::LinSpaced(4, 3, 1).normalized();
  const double eta = 0.4;
  const double avg = (p->value(z + eta * v) + p->value(z - eta * v)) / 2 - p->value(z);
  EXPECT_NEAR(avg, eta * eta / 2 * v.dot(H * v), 1e-12);
}

TEST(ClassifyPoint, SaddleOrigin) {
  auto p = make_saddle_problem<double>(6, 10, -1.0, 4);
  const auto c = classify_point(*p, p->start(), 1e-3, 0.5);
  EXPECT_EQ(c.gradient_norm, 0.0);
  EXPECT_DOUBLE_EQ(c.lambda_min, -1.0);
  EXPECT_FALSE(c.is_sosp);
}

TEST(ClassifyPoint, LocalMinimumOfTwoDimensionalSaddle) {
  auto p = make_saddle_problem<double>(2, 1, -1.0, 0);
  const auto c = classify_point(*p, Vector<double>(Eigen::Vector2d(0, 1)), 1e-6, 0.1);
  EXPECT_NEAR(c.gradient_norm, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(c.lambda_min, 1.0);
  EXPECT_TRUE(c.is_sosp);
}

TEST(ClassifyPoint, LooseThresholds) {
  auto p = make_regularized_problem<double>(3, 50, 5);
  const Vector<double> z = Vector<double>::Constant(3, 0.1);
  const auto c = classify_point(*p, z, 1.0, 1.0);
  ASSERT_LT(c.gradient_norm, 1.0);
  EXPECT_TRUE(c.is_sosp);
}

TEST(RunFinite, SaddleStartsWithCurvatureStep) {
  auto p = make_saddle_problem<double>(10, 64, -1.0, 5);
  ConfigOverrides o;
  o.U = 2;
  const auto cfg = config_finite_2nd<double>(*p, 1e-3, 0.1, o);
  Rng rng(6);
  const auto out = run_finite(*p, cfg, rng);
  const auto k = kinds(out.trace);
  ASSERT_GE(k.size(), 3u);
  EXPECT_EQ(k[0], EventKind::grad_check);
  EXPECT_EQ(k[1], EventKind::nc_probe);
  EXPECT_EQ(k[2], EventKind::nc_step);
  ASSERT_TRUE(out.trace.events[1].rayleigh.has_value());
  EXPECT_LE(*out.trace.events[1].rayleigh, -0.075);
  EXPECT_GE(out.trace.events[2].grads_cum, out.trace.events[1].grads_cum);
}

TEST(RunFinite, CertifiesAtMinimum) {
  auto p = make_quadratic_problem<double>(Matrix<double>::Identity(4, 4), 32, 7);
  const auto cfg = config_finite_2nd<double>(*p, 1e-3, 0.1);
  Rng rng(8);
  const auto out = run_finite(*p, cfg, rng);
  EXPECT_TRUE(out.certified());
  EXPECT_EQ(kinds(out.trace),
            (std::vector<EventKind>{EventKind::grad_check, EventKind::nc_probe, EventKind::terminate}));
  EXPECT_EQ(out.z_final, p->start());
  EXPECT_EQ(out.trace.events[0].grads_cum, 32u);
}

TEST(RunFinite, SingleOuterIterationRunsOneEpoch) {
  auto p = make_regularized_problem<double>(5, 400, 9);
  ConfigOverrides o;
  o.U = 1;
  const auto cfg = config_finite_2nd<double>(*p, 1e-3, 0.1, o);
  ASSERT_GE(p->gradient(p->start()).norm(), 1e-3);
  Rng rng(10);
  const auto out = run_finite(*p, cfg, rng);
  EXPECT_EQ(kinds(out.trace), (std::vector<EventKind>{EventKind::grad_check, EventKind::epoch}));
  EXPECT_EQ(out.status, RunStatus::budget_exhausted);
  EXPECT_EQ(out.grads_total, out.trace.events.back().grads_cum);
}

TEST(RunFinite, BranchExclusivityAndMonotoneCounts) {
  auto p = make_saddle_problem<double>(6, 128, -1.0, 11);
  ConfigOverrides o;
  o.U = 300;
  const auto cfg = config_finite_2nd<double>(*p, 1e-2, 0.1, o);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const auto out = run_finite(*p, cfg, rng);
    const auto& ev = out.trace.events;
    std::uint64_t last = 0, u = 0;
    for (std::size_t i = 0; i < ev.size(); ++i) {
      EXPECT_GE(ev[i].grads_cum, last);
      last = ev[i].grads_cum;
      if (ev[i].kind == EventKind::grad_check) {
        EXPECT_EQ(ev[i].u, ++u);
        ASSERT_LT(i + 1, ev.size());
        const EventKind next = ev[i + 1].kind;
        if (next == EventKind::nc_probe) {
          ASSERT_LT(i + 2, ev.size());
          const EventKind after = ev[i + 2].kind;
          EXPECT_TRUE(after == EventKind::nc_step || after == EventKind::terminate);
          if (after == EventKind::terminate) {
            EXPECT_EQ(i + 3, ev.size());
          }
        } else {
          EXPECT_EQ(next, EventKind::epoch);
        }
      }
    }
    EXPECT_EQ(out.certified(), ev.back().kind == EventKind::terminate);
    if (out.certified()) {
      const auto c = classify_point(*p, out.z_final, 2e-2, 0.2);
      EXPECT_TRUE(c.is_sosp) << c.gradient_norm << " " << c.lambda_min;
    }
  }
}

TEST(RunFinite, RejectsOnlineConfig) {
  auto p = make_saddle_problem<double>(3, 16, -1.0, 1);
  auto cfg = config_finite_2nd<double>(*p, 1e-2, 0.1);
  cfg.mode = Mode::online;
  Rng rng(1);
  EXPECT_THROW(run_finite(*p, cfg, rng), ConfigError);
}

TEST(RunOnline, DeterministicTrace) {
  auto base = make_saddle_problem<double>(4, 64, -1.0, 12);
  auto s = make_streaming<double>(base);
  ConfigOverrides o;
  o.B0 = 64;
  o.U = 30;
  const auto cfg = config_online_2nd<double>(*s, 0.05, 0.2, o);
  Rng a(13), b(13);
  const auto ra = run_online(*s, cfg, a);
  const auto rb = run_online(*s, cfg, b);
  ASSERT_EQ(ra.trace.events.size(), rb.trace.events.size());
  for (std::size_t i = 0; i < ra.trace.events.size(); ++i) {
    const auto& x = ra.trace.events[i];
    const auto& y = rb.trace.events[i];
    EXPECT_EQ(x.kind, y.kind);
    EXPECT_EQ(x.grads_cum, y.grads_cum);
    EXPECT_EQ(x.f_value, y.f_value);
    EXPECT_EQ(x.grad_norm, y.grad_norm);
    EXPECT_EQ(x.rayleigh, y.rayleigh);
  }
  EXPECT_EQ(ra.z_final, rb.z_final);
}

TEST(RunOnline, GradientCheckChargesB0Check) {
  auto base = make_quadratic_problem<double>(Matrix<double>::Identity(3, 3), 16, 14, {0.0, 0.1, 1.0});
  auto s = make_streaming<double>(base);
  ConfigOverrides o;
  o.B0 = 16;
  o.U = 1;
  o.B0_check = 500;
  const auto cfg = config_online_2nd<double>(*s, 0.5, 0.5, o);
  Rng rng(15);
  const auto out = run_online(*s, cfg, rng);
  EXPECT_EQ(out.trace.events.front().grads_cum, 500u);
}

TEST(RunDriver, DispatchesOnMode) {
  auto p = make_quadratic_problem<double>(Matrix<double>::Identity(2, 2), 8, 1);
  auto s = make_streaming<double>(p);
  const auto finite = config_finite_2nd<double>(*p, 0.1, 0.1);
  Rng rng(2);
  EXPECT_TRUE(run_driver<double>(*p, finite, rng).certified());
  EXPECT_THROW(run_driver<double>(*s, finite, rng), ConfigError);
}

TEST(Boost, RunCounts) {
  EXPECT_EQ(boost_runs(0.5), 1);
  EXPECT_EQ(boost_runs(1.0 / 16), 4);
  EXPECT_EQ(boost_runs(0.1), 4);
  EXPECT_THROW(boost_runs(1.0), std::invalid_argument);
}

TEST(Boost, ShortCircuitsOnCertification) {
  auto p = make_quadratic_problem<double>(Matrix<double>::Identity(3, 3), 8, 3);
  const auto cfg = config_finite_2nd<double>(*p, 0.1, 0.1);
  Rng rng(4);
  const auto out = boost<double>(*p, cfg, rng, 1.0 / 16);
  EXPECT_TRUE(out.certified());
  EXPECT_EQ(out.attempts, 1);
}

TEST(Boost, ExhaustsAllRunsAndSumsCounts) {
  auto p = make_regularized_problem<double>(4, 300, 5);
  ConfigOverrides o;
  o.U = 1;
  const auto cfg = config_finite_2nd<double>(*p, 1e-4, 0.1, o);
  Rng rng(6);
  const auto out = boost<double>(*p, cfg, rng, 1.0 / 8);
  EXPECT_EQ(out.attempts, 3);
  std::uint64_t sum = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t k = 0; k < 3; ++k) {
    Rng child = Rng(6).split(k);
    const auto o1 = run_finite(*p, cfg, child);
    sum += o1.grads_total;
    best = std::min(best, o1.last_measured_grad_norm);
  }
  EXPECT_EQ(out.grads_total, sum);
  EXPECT_EQ(out.last_measured_grad_norm, best);
}

TEST(NcStepDecrease, SecondOrderShape) {
  auto p = make_saddle_problem<double>(10, 64, -1.0, 16);
  const auto cfg = config_finite_2nd<double>(*p, 1e-3, 0.1);
  const double L2 = p->smoothness().L2, eta = cfg.eta;
  Rng rng(17);
  GradCounter c;
  const auto r = neon_finite(*p, make_nc_query<double>(*p, p->start(), 0.1, 0.1), rng, c);
  ASSERT_TRUE(r.found());
  const Vector<double>& v = *r.direction;
  const Vector<double> z = p->start();
  const double avg = (p->value(z + eta * v) + p->value(z - eta * v)) / 2 - p->value(z);
  const double predicted = eta * eta / 2 * rayleigh(*p, z, v);
  EXPECT_LE(std::abs(avg - predicted), L2 * eta * eta * eta / 6);
  EXPECT_GT(-avg, std::pow(0.1, 3) / (24 * L2 * L2));
}
