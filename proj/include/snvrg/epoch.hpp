#pragma once

#include "snvrg/problems.hpp"
#include "snvrg/schedule.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace snvrg {

/// Iterate plus the K+1 nested reference points and reference gradients.
template <typename Scalar>
struct EpochState {
  std::uint64_t t = 0;
  Vector<Scalar> x;
  std::vector<Vector<Scalar>> x_ref;  ///< x_ref[l], l = 0..K
  std::vector<Vector<Scalar>> g_ref;  ///< g_ref[l], l = 0..K
  Vector<Scalar> v;                   ///< sum_l g_ref[l]
};

template <typename Scalar>
struct EpochResult {
  Vector<Scalar> x_out;
  std::uint64_t T = 0;
  std::uint64_t grads_used = 0;
  bool length_truncated = false;
  bool left_domain = false;  ///< some iterate left the certified ball
  std::vector<std::pair<std::uint64_t, Scalar>> trajectory;  ///< (t, |v_t|) when requested
};

template <typename Scalar>
struct EpochOptions {
  bool record_trajectory = false;
  /// Run exactly this many steps instead of drawing T.
  std::optional<std::uint64_t> fixed_length;
  /// Called once per step after v_t is assembled and before the iterate moves.
  std::function<void(const EpochState<Scalar>&)> observer;
};

struct GeometricDraw {
  std::uint64_t value = 0;
  bool truncated = false;
};

/// T ~ Geom(p) with P(T = k) = p (1-p)^k, by inverse CDF, capped at `cap`.
inline GeometricDraw sample_geometric(double p, Rng& rng, std::uint64_t cap) {
  if (!(p > 0 && p <= 1)) throw std::invalid_argument("geometric parameter must lie in (0, 1]");
  if (p == 1) return {0, false};
  const double draw = std::floor(std::log(rng.uniform()) / std::log1p(-p));
  if (draw >= static_cast<double>(cap)) return {cap, true};
  return {static_cast<std::uint64_t>(draw), false};
}

/// Epoch length for a schedule, truncated at 1e6 * prod T_l.
inline GeometricDraw sample_epoch_length(const NestedSchedule& schedule, Rng& rng) {
  return sample_geometric(schedule.p(), rng, 1'000'000ULL * schedule.loop_product());
}

/// Least j in [0, K] with t divisible by prod_{l=j+1}^K T_l (empty product = 1).
inline int reset_level(std::uint64_t t, const NestedSchedule& schedule) {
  for (int j = 0; j < schedule.K; ++j) {
    if (t % schedule.period(j) == 0) return j;
  }
  return schedule.K;
}

/// Levels below r keep their reference point; levels r..K move to x.
template <typename Scalar, typename Derived>
void update_reference_points(std::vector<Vector<Scalar>>& refs, const Eigen::MatrixBase<Derived>& x, int r) {
  for (std::size_t l = static_cast<std::size_t>(r); l < refs.size(); ++l) refs[l] = x;
}

/**
 * Refresh the reference gradient of level r and zero every finer level.
 *
 * r > 0: g[r] = (1/B_r) sum_{i in I} [grad f_i(x_ref[r]) - grad f_i(x_ref[r-1])], charging 2 B_r.
 * r = 0: g[0] = (1/B_0) sum_{i in I} grad f_i(x_ref[0]), charging B_0.
 */
template <typename Scalar>
void update_reference_gradients(std::vector<Vector<Scalar>>& grads, const std::vector<Vector<Scalar>>& refs, int r,
                                const Problem<Scalar>& problem, const NestedSchedule& schedule, Rng& rng,
                                GradCounter& counter) {
  const Batch batch = problem.draw_batch(schedule.batch(r), rng);
  if (r == 0) {
    grads[0] = minibatch_gradient(problem, refs[0], batch, counter);
  } else {
    grads[r] = minibatch_gradient(problem, refs[r], refs[r - 1], batch, counter);
  }
  for (std::size_t l = static_cast<std::size_t>(r) + 1; l < grads.size(); ++l) grads[l].setZero();
}

/// Throws SizingError when a batch exceeds a finite population.
inline void require_fits(const NestedSchedule& schedule, std::optional<std::uint64_t> population) {
  if (!population) return;
  for (int l = 0; l <= schedule.K; ++l) {
    if (schedule.batch(l) > *population) {
      throw SizingError("schedule batch B_" + std::to_string(l) + " = " + std::to_string(schedule.batch(l)) +
                        " exceeds n = " + std::to_string(*population) + "; clamp the schedule");
    }
  }
}

/**
 * One epoch of nested variance-reduced gradient descent with a geometrically
 * distributed length. Returns the last iterate x_T.
 */
template <typename Scalar, typename Derived>
EpochResult<Scalar> run_epoch(const Eigen::MatrixBase<Derived>& x0, const Problem<Scalar>& problem,
                              const NestedSchedule& schedule, Rng& rng, GradCounter& counter,
                              const EpochOptions<Scalar>& options = {}) {
  require_fits(schedule, problem.population());
  const Index d = problem.dim();
  const int K = schedule.K;
  const auto levels = static_cast<std::size_t>(K) + 1;

  EpochResult<Scalar> result;
  if (options.fixed_length) {
    result.T = *options.fixed_length;
  } else {
    const GeometricDraw draw = sample_epoch_length(schedule, rng);
    result.T = draw.value;
    result.length_truncated = draw.truncated;
  }

  EpochState<Scalar> state;
  state.x = x0;
  state.x_ref.assign(levels, Vector<Scalar>::Zero(d));
  state.g_ref.assign(levels, Vector<Scalar>::Zero(d));
  state.v = Vector<Scalar>::Zero(d);

  const std::uint64_t start_count = counter.count();
  const Scalar step = Scalar(1) / (Scalar(10) * static_cast<Scalar>(schedule.M));
  for (std::uint64_t t = 0; t < result.T; ++t) {
    state.t = t;
    const int r = reset_level(t, schedule);
    update_reference_points(state.x_ref, state.x, r);
    update_reference_gradients(state.g_ref, state.x_ref, r, problem, schedule, rng, counter);
    state.v.setZero();
    for (const auto& g : state.g_ref) state.v += g;
    if (options.record_trajectory) result.trajectory.emplace_back(t, state.v.norm());
    if (options.observer) options.observer(state);
    state.x -= step * state.v;
    if (!result.left_domain && !problem.in_domain(state.x)) result.left_domain = true;
  }
  result.x_out = std::move(state.x);
  result.grads_used = counter.count() - start_count;
  return result;
}

}  // namespace snvrg
