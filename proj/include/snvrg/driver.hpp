#pragma once

// Outer loops that alternate variance-reduced epochs with negative-curvature
// escapes, plus the parameter choices that make them provably find
// (eps, eps_H)-second-order stationary points.

#include "snvrg/epoch.hpp"
#include "snvrg/ncfinder.hpp"
#include "snvrg/schedule.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

namespace snvrg {

enum class Mode { finite, online };
enum class RunStatus { certified_sosp, budget_exhausted };
enum class EventKind { grad_check, epoch, nc_probe, nc_step, terminate };

constexpr std::string_view to_string(Mode m) { return m == Mode::finite ? "finite" : "online"; }
constexpr std::string_view to_string(RunStatus s) {
  return s == RunStatus::certified_sosp ? "certified-SOSP" : "budget-exhausted";
}
constexpr std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::grad_check: return "grad-check";
    case EventKind::epoch: return "epoch";
    case EventKind::nc_probe: return "nc-probe";
    case EventKind::nc_step: return "nc-step";
    case EventKind::terminate: return "terminate";
  }
  return "?";
}

struct TraceEvent {
  EventKind kind = EventKind::grad_check;
  std::uint64_t u = 0;
  std::uint64_t grads_cum = 0;
  double f_value = 0;
  std::optional<double> grad_norm;
  std::optional<double> rayleigh;
  double wall_ms = 0;  ///< informational; never part of determinism checks
};

struct RunTrace {
  std::vector<TraceEvent> events;
};

/// Parameter values exactly as the formulas give them, before rounding or overrides.
struct TheoryValues {
  double B0 = 0;
  double U = 0;
  double M = 0;
  double eta = 0;
  double delta = 0;
  std::optional<double> rho;
  double B0_check = 0;
};

/// Desk-scale substitutions for theory values.
struct ConfigOverrides {
  std::optional<std::uint64_t> B0;
  std::optional<std::uint64_t> U;
  std::optional<double> M;
  std::optional<double> eta;
  std::optional<std::uint64_t> B0_check;

  [[nodiscard]] bool any() const { return B0 || U || M || eta || B0_check; }
};

/// Smallest per-call failure probability handed to the curvature finder.
inline constexpr double kMinFinderDelta = 1e-8;

template <typename Scalar>
struct DriverConfig {
  Scalar eps = Scalar(0.1);
  Scalar eps_H = Scalar(0.1);
  std::uint64_t U = 1;
  Scalar eta = 0;
  Scalar delta = Scalar(0.1);  ///< per-call finder failure probability from the formulas
  Mode mode = Mode::finite;
  int smoothness_order = 2;
  std::uint64_t B0_check = 0;
  NestedSchedule schedule;
  std::optional<Scalar> rho;
  TheoryValues theory;
  ConfigOverrides overrides;

  [[nodiscard]] Scalar finder_delta() const { return std::max(delta, static_cast<Scalar>(kMinFinderDelta)); }

  void validate(const Problem<Scalar>& problem) const {
    if (!(eps > 0 && eps < 1)) throw ConfigError("eps must lie in (0, 1)");
    if (!(eps_H > 0 && eps_H < 1)) throw ConfigError("eps_H must lie in (0, 1)");
    if (U < 1) throw ConfigError("U must be at least 1");
    if (!(eta > 0)) throw ConfigError("eta must be positive");
    if (!(delta > 0 && delta < 1)) throw ConfigError("delta must lie in (0, 1)");
    if (smoothness_order != 2 && smoothness_order != 3) throw ConfigError("smoothness_order must be 2 or 3");
    if (smoothness_order == 3 && !problem.smoothness().L3) throw ConfigError("third-order config needs L3");
    if (mode == Mode::online && B0_check < 1) throw ConfigError("online mode needs B0_check >= 1");
    if (schedule.K < 1) throw ConfigError("schedule has no nested loops");
  }
};

template <typename Scalar>
struct DriverOutcome {
  Vector<Scalar> z_final;
  RunStatus status = RunStatus::budget_exhausted;
  RunTrace trace;
  std::uint64_t grads_total = 0;
  /// Norm of the last gradient estimate the driver itself computed.
  Scalar last_measured_grad_norm = std::numeric_limits<Scalar>::infinity();
  bool left_domain = false;
  int attempts = 1;  ///< independent runs consumed (boost only)

  [[nodiscard]] bool certified() const { return status == RunStatus::certified_sosp; }
};

// ---------------------------------------------------------------------------
// Configuration formulas

inline constexpr double kOnlineC1 = 200.0;
inline constexpr double kCorollaryC = 600.0;

/// |S| = 2 sigma2 / r^2 (1 + sqrt(log2(1/delta)))^2 samples put a sub-Gaussian
/// gradient mean within r of the truth with probability 1 - delta.
inline std::uint64_t lemma_a5_sample_size(double sigma2, double radius, double delta) {
  if (!(sigma2 > 0) || !(radius > 0)) throw ConfigError("sample size: sigma2 and radius must be positive");
  if (!(delta > 0 && delta < 1)) throw ConfigError("sample size: delta must lie in (0, 1)");
  const double root = 1.0 + std::sqrt(std::log2(1.0 / delta));
  return static_cast<std::uint64_t>(std::ceil(2.0 * sigma2 / (radius * radius) * root * root));
}

namespace detail {

inline std::uint64_t round_up_count(double v) {
  if (!(v >= 1)) return 1;
  if (v >= 1.8e19) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(std::ceil(v));
}

template <typename Scalar>
void check_eps(Scalar eps, Scalar eps_H) {
  if (!(eps > 0 && eps < 1)) throw ConfigError("eps must lie in (0, 1)");
  if (!(eps_H > 0 && eps_H < 1)) throw ConfigError("eps_H must lie in (0, 1)");
}

template <typename Scalar>
std::uint64_t finite_population(const Problem<Scalar>& problem) {
  const auto n = problem.population();
  if (!n) throw ConfigError("finite-sum config needs a finite population");
  return *n;
}

template <typename Scalar>
double constant_L3(const Problem<Scalar>& problem) {
  const auto& L3 = problem.smoothness().L3;
  if (!L3 || !(*L3 > 0)) throw ConfigError("third-order config needs a positive L3");
  return static_cast<double>(*L3);
}

template <typename Scalar>
double constant_sigma2(const Problem<Scalar>& problem) {
  const auto s2 = static_cast<double>(problem.smoothness().sigma2);
  if (!(s2 > 0) || !std::isfinite(s2)) throw ConfigError("online config needs a positive sigma2");
  return s2;
}

template <typename Scalar>
void check_common(const Problem<Scalar>& problem) {
  const auto& s = problem.smoothness();
  if (!(s.L1 > 0)) throw ConfigError("config needs a positive L1");
  if (!(s.L2 > 0)) throw ConfigError("config needs a positive L2");
  if (!(s.delta_F > 0)) throw ConfigError("config needs a positive delta_F");
}

/// Fill effective values from theory values and overrides, then build the schedule.
template <typename Scalar>
DriverConfig<Scalar> finish(DriverConfig<Scalar> c, const TheoryValues& t, const ConfigOverrides& o,
                            std::optional<std::uint64_t> population) {
  c.theory = t;
  c.overrides = o;
  const std::uint64_t B0 = o.B0 ? *o.B0 : round_up_count(t.B0);
  c.U = o.U ? *o.U : round_up_count(t.U);
  const double M = o.M ? *o.M : t.M;
  c.eta = static_cast<Scalar>(o.eta ? *o.eta : t.eta);
  c.delta = static_cast<Scalar>(t.delta);
  c.B0_check = o.B0_check ? *o.B0_check : (o.B0 ? B0 : round_up_count(t.B0_check));
  if (population) c.B0_check = std::min(c.B0_check, *population);
  try {
    c.schedule = clamp_schedule(derive_schedule(B0, M), population.value_or(kUnbounded));
  } catch (const ScheduleError& e) {
    throw ConfigError(std::string("cannot build schedule: ") + e.what());
  }
  if (!(c.delta > 0 && c.delta < 1)) c.delta = std::clamp(c.delta, Scalar(kMinFinderDelta), Scalar(0.5));
  return c;
}

/// Batch size and rho of the streaming theorems; `curvature_term` is
/// 54 sigma2 L2^2 / (L1 eps_H^3) (second order) or 36 sigma2 L3 / (L1 eps_H^2) (third order).
inline double online_b0(double sigma2, double eps, double curvature_term, double delta_F, double L1) {
  const double inner = 2500.0 * kOnlineC1 * std::max(curvature_term, 6.0) * delta_F * L1 / (eps * eps);
  const double log_branch = 64.0 * (1.0 + std::log2(inner));
  return sigma2 / (eps * eps) * std::max(log_branch, 96.0 * kOnlineC1);
}

}  // namespace detail

/// Finite sum, Hessian-Lipschitz: B0 = n, M = 6 L1, eta = eps_H / L2,
/// delta = eps_H^3 / (144 L2^2 dF), U = 24 L2^2 dF eps_H^-3 + 1800 L1 dF eps^-2 n^-1/2.
template <typename Scalar>
DriverConfig<Scalar> config_finite_2nd(const Problem<Scalar>& problem, Scalar eps, Scalar eps_H,
                                       const ConfigOverrides& overrides = {}) {
  detail::check_eps(eps, eps_H);
  detail::check_common(problem);
  const auto n = detail::finite_population(problem);
  const auto& s = problem.smoothness();
  const double L1 = s.L1, L2 = s.L2, dF = s.delta_F, e = eps, eH = eps_H, nn = static_cast<double>(n);

  TheoryValues t;
  t.B0 = nn;
  t.M = 6.0 * L1;
  t.eta = eH / L2;
  t.delta = eH * eH * eH / (144.0 * L2 * L2 * dF);
  t.U = 24.0 * L2 * L2 * dF / (eH * eH * eH) + 1800.0 * L1 * dF / (e * e * std::sqrt(nn));
  t.B0_check = nn;

  DriverConfig<Scalar> c;
  c.eps = eps;
  c.eps_H = eps_H;
  c.mode = Mode::finite;
  c.smoothness_order = 2;
  return detail::finish(c, t, overrides, problem.population());
}

/// Finite sum, third-order smooth: delta = eps_H^2 / (72 L3 dF), eta = sqrt(3 eps_H / L3),
/// U = 12 L3 dF eps_H^-2 + 1800 C L1 dF eps^-2 n^-1/2 with C = 600.
template <typename Scalar>
DriverConfig<Scalar> config_finite_3rd(const Problem<Scalar>& problem, Scalar eps, Scalar eps_H,
                                       const ConfigOverrides& overrides = {}) {
  detail::check_eps(eps, eps_H);
  detail::check_common(problem);
  const auto n = detail::finite_population(problem);
  const double L3 = detail::constant_L3(problem);
  const auto& s = problem.smoothness();
  const double L1 = s.L1, dF = s.delta_F, e = eps, eH = eps_H, nn = static_cast<double>(n);

  TheoryValues t;
  t.B0 = nn;
  t.M = 6.0 * L1;
  t.eta = std::sqrt(3.0 * eH / L3);
  t.delta = eH * eH / (72.0 * L3 * dF);
  t.U = 12.0 * L3 * dF / (eH * eH) + 1800.0 * kCorollaryC * L1 * dF / (e * e * std::sqrt(nn));
  t.B0_check = nn;

  DriverConfig<Scalar> c;
  c.eps = eps;
  c.eps_H = eps_H;
  c.mode = Mode::finite;
  c.smoothness_order = 3;
  return detail::finish(c, t, overrides, problem.population());
}

/// Streaming, Hessian-Lipschitz. rho, M and U follow the effective B0, so a
/// B0 override propagates; the theory record keeps the formula values.
template <typename Scalar>
DriverConfig<Scalar> config_online_2nd(const Problem<Scalar>& problem, Scalar eps, Scalar eps_H,
                                       const ConfigOverrides& overrides = {}) {
  detail::check_eps(eps, eps_H);
  detail::check_common(problem);
  const double sigma2 = detail::constant_sigma2(problem);
  const auto& s = problem.smoothness();
  const double L1 = s.L1, L2 = s.L2, dF = s.delta_F, e = eps, eH = eps_H;
  const double curvature = 54.0 * sigma2 * L2 * L2 / (L1 * eH * eH * eH);

  auto values = [&](double B0) {
    TheoryValues t;
    t.B0 = B0;
    t.rho = std::max(curvature / std::sqrt(B0), 6.0);
    t.M = 2.0 * *t.rho * L1;
    t.delta = 1.0 / (3000.0 * dF * L2 * L2 / (eH * eH * eH));
    t.U = 216.0 * dF * L2 * L2 / (eH * eH * eH) + 96.0 * kOnlineC1 * *t.rho * dF * L1 / (std::sqrt(B0) * e * e);
    t.eta = eH / L2;
    t.B0_check = B0;
    return t;
  };
  const TheoryValues theory = values(detail::online_b0(sigma2, e, curvature, dF, L1));
  const TheoryValues effective = overrides.B0 ? values(static_cast<double>(*overrides.B0)) : theory;

  DriverConfig<Scalar> c;
  c.eps = eps;
  c.eps_H = eps_H;
  c.mode = Mode::online;
  c.smoothness_order = 2;
  c = detail::finish(c, effective, overrides, problem.population());
  c.rho = static_cast<Scalar>(*effective.rho);
  c.theory = theory;
  return c;
}

/// Streaming, third-order smooth. eta = sqrt(eps_H / L3) as stated with the
/// theorem; `sqrt3_step` selects the sqrt(3 eps_H / L3) of the supporting lemma.
template <typename Scalar>
DriverConfig<Scalar> config_online_3rd(const Problem<Scalar>& problem, Scalar eps, Scalar eps_H,
                                       const ConfigOverrides& overrides = {}, bool sqrt3_step = false) {
  detail::check_eps(eps, eps_H);
  detail::check_common(problem);
  const double sigma2 = detail::constant_sigma2(problem);
  const double L3 = detail::constant_L3(problem);
  const auto& s = problem.smoothness();
  const double L1 = s.L1, dF = s.delta_F, e = eps, eH = eps_H;
  const double curvature = 36.0 * sigma2 * L3 / (L1 * eH * eH);

  auto values = [&](double B0) {
    TheoryValues t;
    t.B0 = B0;
    t.rho = std::max(curvature / std::sqrt(B0), 6.0);
    t.M = 2.0 * *t.rho * L1;
    t.delta = 1.0 / (1000.0 * dF * L3 / (eH * eH));
    t.U = 72.0 * dF * L3 / (eH * eH) + 96.0 * kOnlineC1 * *t.rho * dF * L1 / (std::sqrt(B0) * e * e);
    t.eta = std::sqrt((sqrt3_step ? 3.0 : 1.0) * eH / L3);
    t.B0_check = B0;
    return t;
  };
  const TheoryValues theory = values(detail::online_b0(sigma2, e, curvature, dF, L1));
  const TheoryValues effective = overrides.B0 ? values(static_cast<double>(*overrides.B0)) : theory;

  DriverConfig<Scalar> c;
  c.eps = eps;
  c.eps_H = eps_H;
  c.mode = Mode::online;
  c.smoothness_order = 3;
  c = detail::finish(c, effective, overrides, problem.population());
  c.rho = static_cast<Scalar>(*effective.rho);
  c.theory = theory;
  return c;
}

// ---------------------------------------------------------------------------
// Steps and loops

/// z + zeta eta v with a Rademacher zeta drawn from `rng`.
template <typename Scalar, typename DerivedZ, typename DerivedV>
Vector<Scalar> nc_descent_step(const Eigen::MatrixBase<DerivedZ>& z, const Eigen::MatrixBase<DerivedV>& v,
                               Scalar eta, Rng& rng) {
  const auto zeta = static_cast<Scalar>(rng.rademacher());
  return z + (zeta * eta) * v;
}

template <typename Scalar>
struct PointClass {
  Scalar gradient_norm = 0;
  Scalar lambda_min = 0;
  bool is_sosp = false;
};

/// Exact gradient norm and smallest Hessian eigenvalue from the verification oracles.
template <typename Scalar, typename Derived>
PointClass<Scalar> classify_point(const Problem<Scalar>& problem, const Eigen::MatrixBase<Derived>& z, Scalar eps,
                                  Scalar eps_H) {
  const Vector<Scalar> ze = z;
  PointClass<Scalar> out;
  out.gradient_norm = problem.gradient(ze).norm();
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(problem.hessian(ze), Eigen::EigenvaluesOnly);
  out.lambda_min = eig.eigenvalues().minCoeff();
  out.is_sosp = out.gradient_norm <= eps && out.lambda_min >= -eps_H;
  return out;
}

namespace detail {

/**
 * Shared outer loop. `check(z)` returns the measured gradient norm (charging
 * the counter) and `probe(z)` runs the curvature finder.
 */
template <typename Scalar, typename Check, typename Probe>
DriverOutcome<Scalar> drive(const Problem<Scalar>& problem, const DriverConfig<Scalar>& config, Rng& rng,
                            GradCounter& counter, Scalar threshold, Check&& check, Probe&& probe) {
  config.validate(problem);
  const auto started = std::chrono::steady_clock::now();
  DriverOutcome<Scalar> out;
  Vector<Scalar> z = problem.start();

  auto log = [&](EventKind kind, std::uint64_t u, std::optional<double> grad_norm = std::nullopt,
                 std::optional<double> rq = std::nullopt) {
    TraceEvent e;
    e.kind = kind;
    e.u = u;
    e.grads_cum = counter.count();
    e.f_value = static_cast<double>(problem.value(z));
    e.grad_norm = grad_norm;
    e.rayleigh = rq;
    e.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    out.trace.events.push_back(e);
  };

  for (std::uint64_t u = 1; u <= config.U; ++u) {
    const Scalar gnorm = check(z);
    out.last_measured_grad_norm = gnorm;
    log(EventKind::grad_check, u, static_cast<double>(gnorm));
    if (gnorm >= threshold) {
      EpochResult<Scalar> epoch = run_epoch(z, problem, config.schedule, rng, counter);
      out.left_domain = out.left_domain || epoch.left_domain;
      z = std::move(epoch.x_out);
      log(EventKind::epoch, u);
      continue;
    }
    const NCResult<Scalar> nc = probe(z);
    std::optional<double> rq;
    if (!std::isnan(static_cast<double>(nc.rayleigh_estimate))) rq = static_cast<double>(nc.rayleigh_estimate);
    log(EventKind::nc_probe, u, std::nullopt, rq);
    if (!nc.found()) {
      log(EventKind::terminate, u, static_cast<double>(gnorm), rq);
      out.status = RunStatus::certified_sosp;
      break;
    }
    z = nc_descent_step(z, *nc.direction, config.eta, rng);
    if (!problem.in_domain(z)) out.left_domain = true;
    log(EventKind::nc_step, u);
  }
  out.z_final = std::move(z);
  out.grads_total = counter.count();
  return out;
}

}  // namespace detail

/// Finite-sum driver: full gradient (charged n) against eps, epochs otherwise curvature probes.
template <typename Scalar>
DriverOutcome<Scalar> run_finite(const FiniteSumProblem<Scalar>& problem, const DriverConfig<Scalar>& config,
                                 Rng& rng) {
  if (config.mode != Mode::finite) throw ConfigError("run_finite needs a finite-mode config");
  GradCounter counter;
  const Batch full = problem.full_batch();
  auto check = [&](const Vector<Scalar>& z) { return minibatch_gradient(problem, z, full, counter).norm(); };
  auto probe = [&](const Vector<Scalar>& z) {
    return neon_finite(problem, make_nc_query(problem, z, config.eps_H, config.finder_delta()), rng, counter);
  };
  return detail::drive(problem, config, rng, counter, config.eps, check, probe);
}

/// Streaming driver: B0_check fresh samples against eps / 2.
template <typename Scalar>
DriverOutcome<Scalar> run_online(const Problem<Scalar>& problem, const DriverConfig<Scalar>& config, Rng& rng) {
  if (config.mode != Mode::online) throw ConfigError("run_online needs an online-mode config");
  GradCounter counter;
  auto check = [&](const Vector<Scalar>& z) {
    return minibatch_gradient(problem, z, problem.draw_iid(config.B0_check, rng), counter).norm();
  };
  auto probe = [&](const Vector<Scalar>& z) {
    return neon_online(problem, make_nc_query(problem, z, config.eps_H, config.finder_delta()), rng, counter);
  };
  return detail::drive(problem, config, rng, counter, config.eps / 2, check, probe);
}

/// Dispatch on the config mode.
template <typename Scalar>
DriverOutcome<Scalar> run_driver(const Problem<Scalar>& problem, const DriverConfig<Scalar>& config, Rng& rng) {
  if (config.mode == Mode::online) return run_online(problem, config, rng);
  const auto* finite = dynamic_cast<const FiniteSumProblem<Scalar>*>(&problem);
  if (!finite) throw ConfigError("finite mode needs a finite-sum problem");
  return run_finite(*finite, config, rng);
}

/// Number of independent runs used to reach failure probability p_target.
inline int boost_runs(double p_target) {
  if (!(p_target > 0 && p_target < 1)) throw std::invalid_argument("boost: p_target must lie in (0, 1)");
  return std::max(1, static_cast<int>(std::ceil(std::log2(1.0 / p_target) - 1e-12)));
}

/**
 * Repeat the driver with independent child streams; return the first
 * certified outcome, else the one with the smallest measured gradient norm.
 * Gradient counts accumulate across attempts.
 */
template <typename Scalar>
DriverOutcome<Scalar> boost(const Problem<Scalar>& problem, const DriverConfig<Scalar>& config, Rng& rng,
                            double p_target) {
  const int runs = boost_runs(p_target);
  std::optional<DriverOutcome<Scalar>> best;
  std::uint64_t total = 0;
  for (int k = 0; k < runs; ++k) {
    Rng child = rng.split(static_cast<std::uint64_t>(k));
    DriverOutcome<Scalar> o = run_driver(problem, config, child);
    total += o.grads_total;
    const bool done = o.certified();
    if (done || !best || o.last_measured_grad_norm < best->last_measured_grad_norm) best = std::move(o);
    best->attempts = k + 1;
    if (done) break;
  }
  best->grads_total = total;
  return std::move(*best);
}

}  // namespace snvrg
