#include "snvrg/epoch.hpp"
#include "snvrg/fixtures.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace snvrg;

namespace {

NestedSchedule full_batch_schedule(std::uint64_t n, double M) {
  NestedSchedule s = derive_schedule(16, M);
  s.B0 = n;
  for (auto& b : s.B) b = n;
  s.clamped = true;
  return s;
}

}  // namespace

TEST(ResetLevel, HandValues) {
  const NestedSchedule s = derive_schedule(256, 1.0);  // T = [2, 2, 4]
  EXPECT_EQ(reset_level(0, s), 0);
  EXPECT_EQ(reset_level(1, s), 3);
  EXPECT_EQ(reset_level(4, s), 2);
  EXPECT_EQ(reset_level(8, s), 1);
  EXPECT_EQ(reset_level(12, s), 2);
  EXPECT_EQ(reset_level(16, s), 0);
  EXPECT_EQ(reset_level(17, s), 3);
}

TEST(ResetLevel, DivisibilityCharacterization) {
  const NestedSchedule s = derive_schedule(65536, 1.0);
  for (std::uint64_t t = 0; t < 2000; ++t) {
    const int r = reset_level(t, s);
    EXPECT_EQ(t % s.period(r), 0u);
    for (int j = 0; j < r; ++j) EXPECT_NE(t % s.period(j), 0u);
  }
}

TEST(ReferencePoints, ResetRanges) {
  std::vector<Vector<double>> refs(4, Vector<double>::Zero(2));
  for (std::size_t l = 0; l < refs.size(); ++l) refs[l].setConstant(static_cast<double>(l));
  const Vector<double> x = Vector<double>::Constant(2, 9.0);

  auto full = refs;
  update_reference_points(full, x, 0);
  for (const auto& r : full) EXPECT_EQ(r, x);

  auto minimal = refs;
  update_reference_points(minimal, x, 3);
  for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(minimal[l], refs[l]);
  EXPECT_EQ(minimal[3], x);

  auto mid = refs;
  update_reference_points(mid, x, 2);
  EXPECT_EQ(mid[1], refs[1]);
  EXPECT_EQ(mid[2], x);
}

TEST(ReferenceGradients, EqualPointsGiveZeroAndCharges) {
  auto p = make_regularized_problem<double>(4, 3000, 1);
  const NestedSchedule s = clamp_schedule(derive_schedule(256, 6.0), 3000);
  const Vector<double> x = Vector<double>::Constant(4, 0.5);
  std::vector<Vector<double>> refs(4, x), grads(4, Vector<double>::Ones(4));
  Rng rng(2);
  GradCounter c;
  update_reference_gradients(grads, refs, 2, *p, s, rng, c);
  EXPECT_EQ(grads[2].norm(), 0.0);
  EXPECT_EQ(grads[3].norm(), 0.0);
  EXPECT_EQ(grads[0], Vector<double>::Ones(4));
  EXPECT_EQ(grads[1], Vector<double>::Ones(4));
  EXPECT_EQ(c.count(), 2 * s.B[1]);
}

TEST(ReferenceGradients, FullBatchAnchorIsExactGradient) {
  auto p = make_regularized_problem<double>(5, 40, 3);
  const NestedSchedule s = full_batch_schedule(40, 6.0);
  const Vector<double> x = Vector<double>::LinSpaced(5, -1, 1);
  std::vector<Vector<double>> refs(s.K + 1, x), grads(s.K + 1, Vector<double>::Ones(5));
  Rng rng(4);
  GradCounter c;
  update_reference_gradients(grads, refs, 0, *p, s, rng, c);
  EXPECT_LE((grads[0] - p->gradient(x)).norm(), 1e-12);
  Vector<double> v = Vector<double>::Zero(5);
  for (const auto& g : grads) v += g;
  EXPECT_EQ(v, grads[0]);
  EXPECT_EQ(c.count(), 40u);
}

TEST(RunEpoch, ZeroLengthDoesNothing) {
  auto p = make_saddle_problem<double>(3, 8, -1.0, 1);
  Rng rng(5);
  GradCounter c;
  EpochOptions<double> opts;
  opts.fixed_length = 0;
  const Vector<double> x0 = Vector<double>::Constant(3, 0.1);
  const auto r = run_epoch(x0, *p, clamp_schedule(derive_schedule(4, 1.0), 8), rng, c, opts);
  EXPECT_EQ(r.x_out, x0);
  EXPECT_EQ(r.grads_used, 0u);
  EXPECT_EQ(c.count(), 0u);
}

TEST(RunEpoch, SingleComponentSingleStep) {
  test_support::LinearProblem p(Matrix<double>::Zero(3, 1), 1.0);  // f(x) = |x|^2 / 2
  const NestedSchedule s = clamp_schedule(derive_schedule(4, 2.5), 1);
  ASSERT_EQ(s.B0, 1u);
  Rng rng(6);
  GradCounter c;
  EpochOptions<double> opts;
  opts.fixed_length = 1;
  const Vector<double> x0(Vector<double>::LinSpaced(3, 1, 3));
  const auto r = run_epoch(x0, p, s, rng, c, opts);
  EXPECT_LE((r.x_out - x0 * (1 - 1 / (10 * 2.5))).norm(), 1e-15);
  EXPECT_EQ(r.grads_used, 1u);
}

TEST(RunEpoch, RejectsOversizedBatches) {
  auto p = make_saddle_problem<double>(3, 8, -1.0, 1);
  Rng rng(7);
  GradCounter c;
  EXPECT_THROW(run_epoch(p->start(), *p, derive_schedule(4, 1.0), rng, c), SizingError);
}

TEST(RunEpoch, FullBatchEstimatorIsExactGradient) {
  auto p = make_regularized_problem<double>(6, 30, 8);
  const NestedSchedule s = full_batch_schedule(30, 6.0 * p->smoothness().L1);
  Rng rng(9);
  GradCounter c;
  double worst = 0;
  EpochOptions<double> opts;
  opts.fixed_length = 100;
  opts.observer = [&](const EpochState<double>& st) {
    const Vector<double> g = p->gradient(st.x);
    worst = std::max(worst, (st.v - g).norm() / (1 + g.norm()));
    EXPECT_EQ(st.x_ref.back(), st.x);
  };
  const Vector<double> x0 = Vector<double>::Ones(6);
  run_epoch(x0, *p, s, rng, c, opts);
  EXPECT_LE(worst, 1e-10);
}

TEST(RunEpoch, ReferencePointLawOnReplay) {
  auto p = make_regularized_problem<double>(4, 2000, 10);
  const NestedSchedule s = clamp_schedule(derive_schedule(256, 6.0 * p->smoothness().L1), 2000);
  Rng rng(11);
  GradCounter c;
  std::vector<Vector<double>> xs;
  std::vector<std::vector<Vector<double>>> refs;
  EpochOptions<double> opts;
  opts.fixed_length = 70;
  opts.observer = [&](const EpochState<double>& st) {
    xs.push_back(st.x);
    refs.push_back(st.x_ref);
  };
  run_epoch(Vector<double>::Ones(4), *p, s, rng, c, opts);
  ASSERT_EQ(xs.size(), 70u);
  for (std::size_t t = 0; t < xs.size(); ++t) {
    for (int l = 0; l <= s.K; ++l) {
      const std::uint64_t per = s.period(l);
      const std::size_t anchor = t / per * per;
      EXPECT_EQ(refs[t][l], xs[anchor]) << "t=" << t << " l=" << l;
    }
  }
}

TEST(RunEpoch, DeterministicGivenSeed) {
  auto p = make_regularized_problem<double>(4, 500, 12);
  const NestedSchedule s = clamp_schedule(derive_schedule(16, 6.0 * p->smoothness().L1), 500);
  Rng a(13), b(13);
  GradCounter ca, cb;
  const auto ra = run_epoch(p->start(), *p, s, a, ca);
  const auto rb = run_epoch(p->start(), *p, s, b, cb);
  EXPECT_EQ(ra.T, rb.T);
  EXPECT_EQ(ra.x_out, rb.x_out);
  EXPECT_EQ(ra.grads_used, rb.grads_used);
}

TEST(RunEpoch, TrajectoryDoesNotChangeNumerics) {
  auto p = make_regularized_problem<double>(4, 500, 12);
  const NestedSchedule s = clamp_schedule(derive_schedule(16, 6.0 * p->smoothness().L1), 500);
  Rng a(14), b(14);
  GradCounter ca, cb;
  EpochOptions<double> opts;
  opts.record_trajectory = true;
  const auto ra = run_epoch(p->start(), *p, s, a, ca);
  const auto rb = run_epoch(p->start(), *p, s, b, cb, opts);
  EXPECT_EQ(ra.x_out, rb.x_out);
  EXPECT_EQ(rb.trajectory.size(), rb.T);
}

TEST(Geometric, EmpiricalPmfAndMean) {
  const NestedSchedule s = derive_schedule(256, 1.0);
  const double p = s.p();
  Rng rng(15);
  const int draws = 100000;
  std::array<int, 3> counts{};
  double sum = 0;
  for (int i = 0; i < draws; ++i) {
    const auto d = sample_epoch_length(s, rng);
    ASSERT_FALSE(d.truncated);
    sum += static_cast<double>(d.value);
    if (d.value < 3) ++counts[d.value];
  }
  EXPECT_NEAR(sum / draws, 16.0, 0.5);
  for (int k = 0; k < 3; ++k) {
    const double pk = p * std::pow(1 - p, k);
    const double se = std::sqrt(pk * (1 - pk) / draws);
    EXPECT_NEAR(counts[k] / static_cast<double>(draws), pk, 3 * se) << "k=" << k;
  }
}

TEST(Geometric, DegenerateAndInvalid) {
  Rng rng(16);
  EXPECT_EQ(sample_geometric(1.0, rng, 10).value, 0u);
  EXPECT_THROW(sample_geometric(0.0, rng, 10), std::invalid_argument);
  const auto capped = sample_geometric(1e-9, rng, 3);
  EXPECT_TRUE(capped.truncated);
  EXPECT_EQ(capped.value, 3u);
}

TEST(RunEpoch, MeanCostMatchesExactExpectation) {
  auto base = make_saddle_problem<double>(2, 64, -1.0, 17);
  auto stream = make_streaming<double>(base);
  const NestedSchedule s = derive_schedule(16, 6.0 * base->smoothness().L1);
  Rng rng(18);
  GradCounter c;
  const int epochs = 20000;
  for (int e = 0; e < epochs; ++e) run_epoch(stream->start(), *stream, s, rng, c);
  const double mean = static_cast<double>(c.count()) / epochs;
  EXPECT_NEAR(mean / exact_expected_epoch_cost(s), 1.0, 0.02);
  EXPECT_LE(mean, 7 * 16 * 64.0);
}
