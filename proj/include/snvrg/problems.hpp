#pragma once

#include "snvrg/core.hpp"
#include "snvrg/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>

namespace snvrg {

/// Smoothness metadata of an objective, certified on the problem's declared ball.
template <typename Scalar>
struct SmoothnessSpec {
  Scalar L1 = 1;  ///< gradient Lipschitz constant of every component
  Scalar L2 = 1;  ///< Hessian Lipschitz constant
  std::optional<Scalar> L3;  ///< third-derivative Lipschitz constant, third-order smooth problems only
  Scalar sigma2 = 0;  ///< sub-Gaussian variance proxy; E|grad f_i - grad F|^2 <= 2 sigma2
  Scalar delta_F = 1;  ///< upper bound on F(x0) - inf F

  /// Throws std::invalid_argument unless every constant is positive and finite.
  void validate() const {
    auto positive = [](Scalar v) { return std::isfinite(static_cast<double>(v)) && v > 0; };
    if (!positive(L1)) throw std::invalid_argument("smoothness: L1 must be positive and finite");
    if (!positive(L2)) throw std::invalid_argument("smoothness: L2 must be positive and finite");
    if (L3 && !positive(*L3)) throw std::invalid_argument("smoothness: L3 must be positive and finite");
    if (!positive(sigma2)) throw std::invalid_argument("smoothness: sigma2 must be positive and finite");
    if (!positive(delta_F)) throw std::invalid_argument("smoothness: delta_F must be positive and finite");
  }
};

/**
 * Common oracle surface of finite-sum and streaming objectives.
 *
 * A "sample" is either a component index (finite-sum) or a key that fixes one
 * draw of the random variable (streaming). The epoch engine and the curvature
 * finder only talk to this interface, so one engine serves both settings.
 *
 * value/gradient/hessian are verification oracles: exact, never charged.
 */
template <typename Scalar>
class Problem {
 public:
  using VectorType = Vector<Scalar>;
  using MatrixType = Matrix<Scalar>;
  using ConstRef = Eigen::Ref<const VectorType>;
  using MutRef = Eigen::Ref<VectorType>;

  virtual ~Problem() = default;

  [[nodiscard]] Index dim() const { return start_.size(); }
  [[nodiscard]] const VectorType& start() const { return start_; }
  [[nodiscard]] const SmoothnessSpec<Scalar>& smoothness() const { return smoothness_; }
  void set_smoothness(const SmoothnessSpec<Scalar>& s) { smoothness_ = s; }

  /// Radius of the ball around start() on which the smoothness constants hold.
  [[nodiscard]] Scalar radius() const { return radius_; }
  [[nodiscard]] bool in_domain(ConstRef x) const {
    return !std::isfinite(static_cast<double>(radius_)) || (x - start_).norm() <= radius_;
  }

  /// Number of components, or nullopt for a streaming objective.
  [[nodiscard]] virtual std::optional<std::uint64_t> population() const = 0;

  /// Minibatch for the epoch engine: without replacement (finite) or fresh draws (streaming).
  [[nodiscard]] virtual Batch draw_batch(std::uint64_t m, Rng& rng) const = 0;

  /// m independent draws (with replacement in the finite-sum case).
  [[nodiscard]] virtual Batch draw_iid(std::uint64_t m, Rng& rng) const = 0;

  /// acc += weight * grad f_id(x)
  virtual void add_sample_gradient(ConstRef x, std::uint64_t id, Scalar weight, MutRef acc) const = 0;

  /// acc += weight * (grad f_id(x) - grad f_id(y)), with the same sample at both points.
  virtual void add_sample_difference(ConstRef x, ConstRef y, std::uint64_t id, Scalar weight,
                                     MutRef acc) const {
    add_sample_gradient(x, id, weight, acc);
    add_sample_gradient(y, id, -weight, acc);
  }

  [[nodiscard]] virtual Scalar value(ConstRef x) const = 0;
  [[nodiscard]] virtual VectorType gradient(ConstRef x) const = 0;
  [[nodiscard]] virtual MatrixType hessian(ConstRef x) const = 0;

  [[nodiscard]] virtual std::string name() const = 0;

 protected:
  Problem(VectorType start, Scalar radius) : start_(std::move(start)), radius_(radius) {}

 private:
  VectorType start_;
  Scalar radius_;
  SmoothnessSpec<Scalar> smoothness_;
};

/// Uniformly random m-subset of {0..n-1}. Deterministic given the stream state.
inline Batch sample_indices_without_replacement(std::uint64_t n, std::uint64_t m, Rng& rng) {
  if (m == 0) throw SizingError("batch size must be at least 1");
  if (m > n) {
    throw SizingError("batch size " + std::to_string(m) + " exceeds population " + std::to_string(n) +
                      "; clamp the schedule first");
  }
  Batch out;
  out.reserve(m);
  if (m == n) {
    out.resize(n);
    std::iota(out.begin(), out.end(), std::uint64_t{0});
    return out;
  }
  if (m * 16 < n) {
    // Floyd's algorithm: O(m) expected work, uniform over m-subsets.
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(2 * m);
    for (std::uint64_t j = n - m; j < n; ++j) {
      const std::uint64_t t = rng.below(j + 1);
      const std::uint64_t pick = seen.insert(t).second ? t : j;
      if (pick == j) seen.insert(j);
      out.push_back(pick);
    }
    return out;
  }
  // Partial Fisher-Yates.
  Batch pool(n);
  std::iota(pool.begin(), pool.end(), std::uint64_t{0});
  for (std::uint64_t i = 0; i < m; ++i) {
    const std::uint64_t j = i + rng.below(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  return pool;
}

/// Objective F = (1/n) sum_i f_i.
template <typename Scalar>
class FiniteSumProblem : public Problem<Scalar> {
 public:
  using typename Problem<Scalar>::VectorType;

  [[nodiscard]] std::uint64_t size() const { return n_; }
  [[nodiscard]] std::optional<std::uint64_t> population() const override { return n_; }

  [[nodiscard]] Batch draw_batch(std::uint64_t m, Rng& rng) const override {
    return sample_indices_without_replacement(n_, m, rng);
  }
  [[nodiscard]] Batch draw_iid(std::uint64_t m, Rng& rng) const override {
    Batch out(m);
    for (auto& id : out) id = rng.below(n_);
    return out;
  }
  [[nodiscard]] Batch full_batch() const {
    Batch out(n_);
    std::iota(out.begin(), out.end(), std::uint64_t{0});
    return out;
  }

 protected:
  FiniteSumProblem(std::uint64_t n, VectorType start, Scalar radius)
      : Problem<Scalar>(std::move(start), radius), n_(n) {
    if (n == 0) throw std::invalid_argument("finite-sum problem needs at least one component");
  }

 private:
  std::uint64_t n_;
};

/// Objective F(x) = E_xi F(x; xi); each sample id is a fresh draw.
template <typename Scalar>
class StreamingProblem : public Problem<Scalar> {
 public:
  using typename Problem<Scalar>::VectorType;

  [[nodiscard]] std::optional<std::uint64_t> population() const override { return std::nullopt; }

  [[nodiscard]] Batch draw_batch(std::uint64_t m, Rng& rng) const override { return draw_iid(m, rng); }
  [[nodiscard]] Batch draw_iid(std::uint64_t m, Rng& rng) const override {
    if (m == 0) throw SizingError("batch size must be at least 1");
    Batch out(m);
    for (auto& id : out) id = rng();
    return out;
  }

 protected:
  StreamingProblem(VectorType start, Scalar radius) : Problem<Scalar>(std::move(start), radius) {}
};

/**
 * Streaming objective whose random variable is a uniformly drawn component of
 * a finite-sum problem. The stochastic gradient is unbiased for the same F, and
 * draws are independent (with replacement), which is the streaming regime.
 */
template <typename Scalar>
class StreamingView final : public StreamingProblem<Scalar> {
 public:
  using typename Problem<Scalar>::ConstRef;
  using typename Problem<Scalar>::MutRef;
  using typename Problem<Scalar>::VectorType;
  using typename Problem<Scalar>::MatrixType;

  explicit StreamingView(std::shared_ptr<const FiniteSumProblem<Scalar>> base)
      : StreamingProblem<Scalar>(base->start(), base->radius()), base_(std::move(base)) {
    this->set_smoothness(base_->smoothness());
  }

  void add_sample_gradient(ConstRef x, std::uint64_t key, Scalar weight, MutRef acc) const override {
    base_->add_sample_gradient(x, component(key), weight, acc);
  }
  void add_sample_difference(ConstRef x, ConstRef y, std::uint64_t key, Scalar weight,
                             MutRef acc) const override {
    base_->add_sample_difference(x, y, component(key), weight, acc);
  }
  [[nodiscard]] Scalar value(ConstRef x) const override { return base_->value(x); }
  [[nodiscard]] VectorType gradient(ConstRef x) const override { return base_->gradient(x); }
  [[nodiscard]] MatrixType hessian(ConstRef x) const override { return base_->hessian(x); }
  [[nodiscard]] std::string name() const override { return "streaming-" + base_->name(); }

  [[nodiscard]] const FiniteSumProblem<Scalar>& base() const { return *base_; }

 private:
  [[nodiscard]] std::uint64_t component(std::uint64_t key) const {
    return static_cast<std::uint64_t>((static_cast<__uint128_t>(key) * base_->size()) >> 64);
  }

  std::shared_ptr<const FiniteSumProblem<Scalar>> base_;
};

template <typename Scalar>
std::shared_ptr<const StreamingView<Scalar>> make_streaming(std::shared_ptr<const FiniteSumProblem<Scalar>> base) {
  return std::make_shared<const StreamingView<Scalar>>(std::move(base));
}

// ---------------------------------------------------------------------------
// Minibatch oracles

/// (1/|I|) sum_{i in I} grad f_i(x). Charges |I|.
template <typename Scalar, typename Derived>
Vector<Scalar> minibatch_gradient(const Problem<Scalar>& problem, const Eigen::MatrixBase<Derived>& x,
                                  const Batch& batch, GradCounter& counter) {
  if (batch.empty()) throw std::invalid_argument("minibatch_gradient: empty index set");
  const Vector<Scalar> xe = x;
  Vector<Scalar> acc = Vector<Scalar>::Zero(problem.dim());
  const Scalar w = Scalar(1) / static_cast<Scalar>(batch.size());
  for (auto id : batch) problem.add_sample_gradient(xe, id, w, acc);
  counter.charge(batch.size());
  return acc;
}

/// (1/|I|) sum_{i in I} [grad f_i(x) - grad f_i(y)]. Charges 2|I|.
template <typename Scalar, typename DerivedX, typename DerivedY>
Vector<Scalar> minibatch_gradient(const Problem<Scalar>& problem, const Eigen::MatrixBase<DerivedX>& x,
                                  const Eigen::MatrixBase<DerivedY>& y, const Batch& batch,
                                  GradCounter& counter) {
  if (batch.empty()) throw std::invalid_argument("minibatch_gradient: empty index set");
  const Vector<Scalar> xe = x;
  const Vector<Scalar> ye = y;
  Vector<Scalar> acc = Vector<Scalar>::Zero(problem.dim());
  const Scalar w = Scalar(1) / static_cast<Scalar>(batch.size());
  for (auto id : batch) problem.add_sample_difference(xe, ye, id, w, acc);
  counter.charge(2 * batch.size());
  return acc;
}

// ---------------------------------------------------------------------------
// Variance estimation

/// Half the worst mean squared deviation of sampled gradients from grad F,
/// over start() and `points` random points of the certified ball.
template <typename Scalar>
Scalar estimate_sigma2(const Problem<Scalar>& problem, Rng& rng, std::uint64_t samples = 10000,
                       int points = 10) {
  const Index d = problem.dim();
  const Scalar probe_radius =
      std::isfinite(static_cast<double>(problem.radius())) ? problem.radius() : Scalar(1);
  Scalar worst = 0;
  Vector<Scalar> g(d);
  for (int p = 0; p <= points; ++p) {
    Vector<Scalar> x = problem.start();
    if (p > 0) {
      Vector<Scalar> dir(d);
      for (Index j = 0; j < d; ++j) dir(j) = static_cast<Scalar>(rng.normal());
      const Scalar r = probe_radius * static_cast<Scalar>(std::pow(rng.uniform(), 1.0 / static_cast<double>(d)));
      x += r * dir / dir.norm();
    }
    const Vector<Scalar> full = problem.gradient(x);
    Scalar total = 0;
    for (auto id : problem.draw_iid(samples, rng)) {
      g.setZero();
      problem.add_sample_gradient(x, id, Scalar(1), g);
      total += (g - full).squaredNorm();
    }
    worst = std::max(worst, total / static_cast<Scalar>(samples));
  }
  // Floor keeps the invariant sigma2 > 0 on noiseless fixtures.
  return std::max(worst / Scalar(2), std::numeric_limits<Scalar>::epsilon());
}

/// Monte-Carlo estimate of E|(1/m) sum_{j in J} a_j|^2 over uniform m-subsets J.
struct SubsetVarianceCheck {
  double estimate = 0;      ///< Monte-Carlo left-hand side
  double bound = 0;         ///< 1{m < N} / m * mean |a_j|^2
  double mean_sq_norm = 0;  ///< mean |a_j|^2
  Index m = 0;
  Index N = 0;

  /// True when the estimate sits under the bound up to a relative allowance
  /// (and is numerically zero when m == N).
  [[nodiscard]] bool holds(double allowance = 0.05) const {
    if (m == N) return estimate <= 1e-20 * (1.0 + mean_sq_norm);
    return estimate <= bound * (1.0 + allowance);
  }
};

/// Columns of `a` are the vectors a_1..a_N and must sum to zero.
template <typename Derived>
SubsetVarianceCheck subset_mean_variance(const Eigen::MatrixBase<Derived>& a, Index m, std::uint64_t subsets,
                                         Rng& rng) {
  using Scalar = typename Derived::Scalar;
  const Index N = a.cols();
  if (m < 1 || m > N) throw SizingError("subset size must lie in [1, N]");
  SubsetVarianceCheck out;
  out.m = m;
  out.N = N;
  out.mean_sq_norm = static_cast<double>(a.colwise().squaredNorm().mean());
  out.bound = m < N ? out.mean_sq_norm / static_cast<double>(m) : 0.0;
  Vector<Scalar> acc(a.rows());
  double total = 0;
  for (std::uint64_t s = 0; s < subsets; ++s) {
    acc.setZero();
    for (auto j : sample_indices_without_replacement(static_cast<std::uint64_t>(N), static_cast<std::uint64_t>(m), rng))
      acc += a.col(static_cast<Index>(j));
    total += static_cast<double>((acc / static_cast<Scalar>(m)).squaredNorm());
  }
  out.estimate = total / static_cast<double>(subsets);
  return out;
}

}  // namespace snvrg
