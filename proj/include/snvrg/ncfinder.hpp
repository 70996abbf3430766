#pragma once

// First-order negative-curvature search built on gradient-difference
// Hessian-vector products.

#include "snvrg/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace snvrg {

template <typename Scalar>
struct NCQuery {
  Vector<Scalar> z;
  Scalar eps_H = Scalar(0.1);
  Scalar delta = Scalar(0.1);
  Scalar L1 = 1;
  Scalar L2 = 1;

  void validate() const {
    if (!(eps_H > 0 && eps_H < 1)) throw std::invalid_argument("NC query: eps_H must lie in (0, 1)");
    if (!(delta > 0 && delta < 1)) throw std::invalid_argument("NC query: delta must lie in (0, 1)");
    if (!(L1 > 0)) throw std::invalid_argument("NC query: L1 must be positive");
    if (!(L2 >= 0)) throw std::invalid_argument("NC query: L2 must be nonnegative");
  }
};

template <typename Scalar>
NCQuery<Scalar> make_nc_query(const Problem<Scalar>& problem, const Vector<Scalar>& z, Scalar eps_H, Scalar delta) {
  NCQuery<Scalar> q;
  q.z = z;
  q.eps_H = eps_H;
  q.delta = delta;
  q.L1 = problem.smoothness().L1;
  q.L2 = problem.smoothness().L2;
  return q;
}

/// A unit direction of certified negative curvature, or bottom (no direction).
template <typename Scalar>
struct NCResult {
  std::optional<Vector<Scalar>> direction;
  /// Certification estimate of v^T H v for the last candidate examined (NaN if none).
  Scalar rayleigh_estimate = std::numeric_limits<Scalar>::quiet_NaN();
  /// Bottom returned although some candidate's estimate crossed -eps_H / 2.
  bool near_threshold = false;
  int restarts_used = 0;
  std::uint64_t power_steps = 0;

  [[nodiscard]] bool found() const { return direction.has_value(); }
};

/// (1/|I|) sum_{i in I} [grad f_i(z + q v) - grad f_i(z)] / q. Charges 2|I|.
template <typename Scalar, typename DerivedZ, typename DerivedV>
Vector<Scalar> hvp_estimate(const Problem<Scalar>& problem, const Eigen::MatrixBase<DerivedZ>& z,
                            const Eigen::MatrixBase<DerivedV>& v, Scalar q, const Batch& batch,
                            GradCounter& counter) {
  if (!(q > 0)) throw std::invalid_argument("hvp_estimate: displacement q must be positive");
  const Vector<Scalar> base = z;
  const Vector<Scalar> moved = base + q * v;
  return minibatch_gradient(problem, moved, base, batch, counter) / q;
}

/// v^T hess F(z) v / |v|^2 from the verification Hessian. Never charged.
template <typename Scalar, typename DerivedZ, typename DerivedV>
Scalar rayleigh(const Problem<Scalar>& problem, const Eigen::MatrixBase<DerivedZ>& z,
                const Eigen::MatrixBase<DerivedV>& v) {
  const Vector<Scalar> ve = v;
  const Scalar nrm2 = ve.squaredNorm();
  if (!(nrm2 > 0)) throw std::invalid_argument("rayleigh: direction must be nonzero");
  return ve.dot(problem.hessian(z) * ve) / nrm2;
}

/// Displacement for gradient-difference HVPs; keeps the Taylor error L2 q / 2 at eps_H / 20.
template <typename Scalar>
Scalar hvp_displacement(const NCQuery<Scalar>& query) {
  if (query.L2 > 0) return query.eps_H / (10 * query.L2);
  return Scalar(1e-5) * (1 + query.z.norm());
}

/// Number of restarts, ceil(log2(1/delta)), and power steps per restart, ceil(8 (L1/eps_H) log2(d/delta)).
struct NCBudget {
  int restarts = 1;
  std::uint64_t steps = 1;
};

template <typename Scalar>
NCBudget nc_budget(const NCQuery<Scalar>& query, Index dim) {
  const double delta = static_cast<double>(query.delta);
  NCBudget b;
  b.restarts = std::max(1, static_cast<int>(std::ceil(std::log2(1.0 / delta))));
  const double ratio = static_cast<double>(query.L1 / query.eps_H);
  b.steps = static_cast<std::uint64_t>(
      std::ceil(8.0 * ratio * std::log2(std::max(2.0, static_cast<double>(dim) / delta))));
  return b;
}

namespace detail {

/**
 * Restarted power iteration on (L1 I - H), H applied through minibatch HVPs,
 * each restart ending in a certification call. Returns on the first certified
 * candidate. `certify(v)` returns the Rayleigh estimate and whether it passed.
 */
template <typename Scalar, typename Certify>
NCResult<Scalar> shifted_power_search(const Problem<Scalar>& problem, const NCQuery<Scalar>& query,
                                      std::uint64_t step_batch, Rng& rng, GradCounter& counter, Certify&& certify) {
  query.validate();
  const Index d = problem.dim();
  const Scalar q = hvp_displacement(query);
  const Scalar shift = query.L1;
  const NCBudget budget = nc_budget(query, d);

  NCResult<Scalar> out;
  for (int restart = 0; restart < budget.restarts; ++restart) {
    out.restarts_used = restart + 1;
    Vector<Scalar> v(d);
    for (Index j = 0; j < d; ++j) v(j) = static_cast<Scalar>(rng.normal());
    v.normalize();
    for (std::uint64_t step = 0; step < budget.steps; ++step) {
      const Batch batch = problem.draw_batch(step_batch, rng);
      Vector<Scalar> w = shift * v - hvp_estimate(problem, query.z, v, q, batch, counter);
      const Scalar nrm = w.norm();
      ++out.power_steps;
      if (!(nrm > 0)) break;
      v = w / nrm;
    }
    const auto [estimate, accepted] = certify(v, q);
    out.rayleigh_estimate = estimate;
    if (accepted) {
      out.direction = v;
      out.near_threshold = false;
      return out;
    }
    if (estimate <= -query.eps_H / 2) out.near_threshold = true;
  }
  return out;
}

}  // namespace detail

/**
 * Negative-curvature finder for finite sums.
 *
 * Contract: a returned unit v satisfies v^T hess F(z) v <= -eps_H / 2 (the
 * certificate is a full-batch HVP, whose only error is the Taylor term
 * L2 q / 2); when lambda_min < -eps_H a direction is found with probability
 * at least 1 - delta; when lambda_min >= -eps_H / 2 the result is bottom.
 */
template <typename Scalar>
NCResult<Scalar> neon_finite(const FiniteSumProblem<Scalar>& problem, const NCQuery<Scalar>& query, Rng& rng,
                             GradCounter& counter) {
  const std::uint64_t n = problem.size();
  const auto step_batch = std::clamp<std::uint64_t>(
      static_cast<std::uint64_t>(std::ceil(std::pow(static_cast<double>(n), 0.75))), 1, n);
  const Batch full = problem.full_batch();
  auto certify = [&](const Vector<Scalar>& v, Scalar q) {
    const Scalar estimate = v.dot(hvp_estimate(problem, query.z, v, q, full, counter));
    const Scalar taylor = query.L2 * q / 2;
    const bool ok = estimate <= -Scalar(0.75) * query.eps_H && estimate + taylor <= -query.eps_H / 2;
    return std::pair<Scalar, bool>{estimate, ok};
  };
  return detail::shifted_power_search(problem, query, step_batch, rng, counter, certify);
}

/// Samples needed for a mean of values in [-L1, L1] to land within `radius` with probability 1 - delta (Hoeffding).
template <typename Scalar>
std::uint64_t online_certificate_batch(Scalar L1, Scalar radius, Scalar delta) {
  const double r = static_cast<double>(radius);
  const double l1 = static_cast<double>(L1);
  return static_cast<std::uint64_t>(std::ceil(2.0 * l1 * l1 * std::log(2.0 / static_cast<double>(delta)) / (r * r)));
}

/**
 * Negative-curvature finder for streaming objectives. Same contract as
 * neon_finite; every HVP uses fresh samples and the certificate is a large
 * Hoeffding-sized batch with tolerance eps_H / 8, so soundness holds with
 * probability 1 - delta per call.
 */
template <typename Scalar>
NCResult<Scalar> neon_online(const Problem<Scalar>& problem, const NCQuery<Scalar>& query, Rng& rng,
                             GradCounter& counter) {
  const auto step_batch =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(static_cast<double>(query.L1 / query.eps_H))));
  const Scalar tolerance = query.eps_H / 8;
  const std::uint64_t cert_batch = online_certificate_batch(query.L1, tolerance, query.delta);
  auto certify = [&](const Vector<Scalar>& v, Scalar q) {
    const Batch batch = problem.draw_iid(cert_batch, rng);
    const Scalar estimate = v.dot(hvp_estimate(problem, query.z, v, q, batch, counter));
    const Scalar taylor = query.L2 * q / 2;
    const bool ok =
        estimate <= -Scalar(0.75) * query.eps_H && estimate + taylor + tolerance <= -query.eps_H / 2;
    return std::pair<Scalar, bool>{estimate, ok};
  };
  return detail::shifted_power_search(problem, query, step_batch, rng, counter, certify);
}

}  // namespace snvrg
