#pragma once

// Synthetic test objectives with hand-coded gradients and Hessians.

#include "snvrg/problems.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <memory>
#include <vector>

namespace snvrg {

namespace detail {

/// Fill a d x n matrix with N(0, scale^2) entries whose columns sum to zero.
template <typename Scalar>
Matrix<Scalar> centered_noise(Index d, Index n, Scalar scale, Rng& rng) {
  Matrix<Scalar> out(d, n);
  if (n == 1 || scale == 0) return Matrix<Scalar>::Zero(d, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) out(j, i) = scale * static_cast<Scalar>(rng.normal());
  out.colwise() -= out.rowwise().mean();
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Strict saddle: F(x) = 1/2 sum_j a_j x_j^2 + w/4 sum_j x_j^4

struct SaddleOptions {
  double quartic_weight = 1.0;
  /// Certified radius; <= 0 selects 1.5x the norm of the global minimizers.
  double radius = 0.0;
  double curvature_noise = 0.05;
  double gradient_noise = 0.05;
};

/**
 * Components f_i(x) = 1/2 sum_j (a_j + e_ij) x_j^2 + w/4 sum_j x_j^4 + b_i^T x
 * with sum_i e_i = 0 and sum_i b_i = 0, so the average is exactly the
 * separable quartic above. The curvature vector a has one negative entry
 * (the last coordinate) and the rest spread over [1, 2).
 */
template <typename Scalar>
class SaddleProblem final : public FiniteSumProblem<Scalar> {
 public:
  using typename Problem<Scalar>::ConstRef;
  using typename Problem<Scalar>::MutRef;
  using typename Problem<Scalar>::VectorType;
  using typename Problem<Scalar>::MatrixType;

  SaddleProblem(Vector<Scalar> curvature, Scalar quartic_weight, Matrix<Scalar> curvature_noise,
                Matrix<Scalar> gradient_noise, Scalar radius)
      : FiniteSumProblem<Scalar>(static_cast<std::uint64_t>(curvature_noise.cols()),
                                 Vector<Scalar>::Zero(curvature.size()), radius),
        a_(std::move(curvature)),
        w_(quartic_weight),
        e_(std::move(curvature_noise)),
        b_(std::move(gradient_noise)) {}

  void add_sample_gradient(ConstRef x, std::uint64_t id, Scalar weight, MutRef acc) const override {
    const auto i = static_cast<Index>(id);
    acc.array() += weight * ((a_.array() + e_.col(i).array()) * x.array() + w_ * x.array().cube() +
                             b_.col(i).array());
  }
  void add_sample_difference(ConstRef x, ConstRef y, std::uint64_t id, Scalar weight,
                             MutRef acc) const override {
    const auto i = static_cast<Index>(id);
    acc.array() += weight * ((a_.array() + e_.col(i).array()) * (x - y).array() +
                             w_ * (x.array().cube() - y.array().cube()));
  }

  [[nodiscard]] Scalar value(ConstRef x) const override {
    return Scalar(0.5) * (a_.array() * x.array().square()).sum() + w_ / 4 * x.array().square().square().sum();
  }
  [[nodiscard]] VectorType gradient(ConstRef x) const override {
    return (a_.array() * x.array() + w_ * x.array().cube()).matrix();
  }
  [[nodiscard]] MatrixType hessian(ConstRef x) const override {
    return (a_.array() + 3 * w_ * x.array().square()).matrix().asDiagonal();
  }
  [[nodiscard]] std::string name() const override { return "saddle"; }

  [[nodiscard]] const Vector<Scalar>& curvature() const { return a_; }
  [[nodiscard]] Scalar quartic_weight() const { return w_; }

 private:
  Vector<Scalar> a_;
  Scalar w_;
  Matrix<Scalar> e_;
  Matrix<Scalar> b_;
};

/// Strict saddle at x0 = 0 with lambda_min(hess F(0)) = negative_eigenvalue.
template <typename Scalar = double>
std::shared_ptr<const SaddleProblem<Scalar>> make_saddle_problem(Index dim, Index n, Scalar negative_eigenvalue,
                                                                 std::uint64_t seed, SaddleOptions opts = {}) {
  if (dim < 2) throw std::invalid_argument("saddle problem: dim must be at least 2");
  if (n < 1) throw std::invalid_argument("saddle problem: n must be at least 1");
  if (!(negative_eigenvalue < 0)) throw std::invalid_argument("saddle problem: eigenvalue must be negative");
  if (!(opts.quartic_weight > 0)) throw std::invalid_argument("saddle problem: quartic weight must be positive");

  Rng rng(seed);
  const auto w = static_cast<Scalar>(opts.quartic_weight);
  Vector<Scalar> a(dim);
  for (Index j = 0; j + 1 < dim; ++j) a(j) = 1 + static_cast<Scalar>(j) / static_cast<Scalar>(dim - 1);
  a(dim - 1) = negative_eigenvalue;

  // Global minimizers sit at x_last^2 = -lambda / w.
  const Scalar minimizer_norm = std::sqrt(-negative_eigenvalue / w);
  const Scalar radius = opts.radius > 0 ? static_cast<Scalar>(opts.radius) : Scalar(1.5) * minimizer_norm;

  Rng noise_rng = rng.split(1);
  Matrix<Scalar> e = detail::centered_noise<Scalar>(dim, n, static_cast<Scalar>(opts.curvature_noise), noise_rng);
  Matrix<Scalar> b = detail::centered_noise<Scalar>(dim, n, static_cast<Scalar>(opts.gradient_noise), noise_rng);

  // Component Hessian diag(a_j + e_ij + 3 w x_j^2) with x_j^2 in [0, R^2].
  Scalar l1 = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < dim; ++j) {
      const Scalar base = a(j) + e(j, i);
      l1 = std::max({l1, std::abs(base), std::abs(base + 3 * w * radius * radius)});
    }

  auto problem = std::make_shared<SaddleProblem<Scalar>>(std::move(a), w, std::move(e), std::move(b), radius);
  SmoothnessSpec<Scalar> s;
  s.L1 = l1;
  s.L2 = 6 * w * radius;  // |3w(x^2 - y^2)| <= 6 w R |x - y|
  s.L3 = 6 * w;           // third derivative diag(6 w x_j)
  s.delta_F = negative_eigenvalue * negative_eigenvalue / (4 * w);
  Rng sigma_rng = rng.split(2);
  s.sigma2 = estimate_sigma2<Scalar>(*problem, sigma_rng);
  problem->set_smoothness(s);
  return problem;
}

// ---------------------------------------------------------------------------
// Least squares with the nonconvex regularizer sum_j x_j^2 / (1 + x_j^2)

struct RegularizedOptions {
  double regularizer_weight = 0.1;
  double label_noise = 0.1;
};

/**
 * f_i(x) = 1/2 (a_i^T x - y_i)^2 + w sum_j r(x_j),  r(t) = t^2 / (1 + t^2).
 *
 * r'' ranges over [-1/2, 2] and r'''(t) = 24 t (t^2 - 1) / (1 + t^2)^4 is
 * bounded by 24 |t| / (1 + t^2)^3 <= 6.21 (maximized at t^2 = 1/5), so the
 * problem is globally smooth and needs no certified ball.
 */
template <typename Scalar>
class RegularizedProblem final : public FiniteSumProblem<Scalar> {
 public:
  using typename Problem<Scalar>::ConstRef;
  using typename Problem<Scalar>::MutRef;
  using typename Problem<Scalar>::VectorType;
  using typename Problem<Scalar>::MatrixType;

  RegularizedProblem(Matrix<Scalar> data, Vector<Scalar> labels, Scalar weight)
      : FiniteSumProblem<Scalar>(static_cast<std::uint64_t>(data.cols()), Vector<Scalar>::Zero(data.rows()),
                                 std::numeric_limits<Scalar>::infinity()),
        data_(std::move(data)),
        labels_(std::move(labels)),
        w_(weight) {}

  static Scalar reg(Scalar t) { return t * t / (1 + t * t); }
  static Scalar reg_d1(Scalar t) { return 2 * t / ((1 + t * t) * (1 + t * t)); }
  static Scalar reg_d2(Scalar t) {
    const Scalar u = 1 + t * t;
    return (2 - 6 * t * t) / (u * u * u);
  }

  void add_sample_gradient(ConstRef x, std::uint64_t id, Scalar weight, MutRef acc) const override {
    const auto i = static_cast<Index>(id);
    const Scalar residual = data_.col(i).dot(x) - labels_(i);
    acc.noalias() += (weight * residual) * data_.col(i);
    acc += (weight * w_) * x.unaryExpr(&RegularizedProblem::reg_d1);
  }
  void add_sample_difference(ConstRef x, ConstRef y, std::uint64_t id, Scalar weight,
                             MutRef acc) const override {
    const auto i = static_cast<Index>(id);
    acc.noalias() += (weight * data_.col(i).dot(x - y)) * data_.col(i);
    acc += (weight * w_) * (x.unaryExpr(&RegularizedProblem::reg_d1) - y.unaryExpr(&RegularizedProblem::reg_d1));
  }

  [[nodiscard]] Scalar value(ConstRef x) const override {
    const Vector<Scalar> r = data_.transpose() * x - labels_;
    return r.squaredNorm() / (2 * static_cast<Scalar>(data_.cols())) + w_ * x.unaryExpr(&RegularizedProblem::reg).sum();
  }
  [[nodiscard]] VectorType gradient(ConstRef x) const override {
    const Vector<Scalar> r = data_.transpose() * x - labels_;
    return data_ * r / static_cast<Scalar>(data_.cols()) + w_ * x.unaryExpr(&RegularizedProblem::reg_d1);
  }
  [[nodiscard]] MatrixType hessian(ConstRef x) const override {
    MatrixType h = data_ * data_.transpose() / static_cast<Scalar>(data_.cols());
    h.diagonal() += w_ * x.unaryExpr(&RegularizedProblem::reg_d2);
    return h;
  }
  [[nodiscard]] std::string name() const override { return "regularized"; }

  [[nodiscard]] Scalar regularizer_weight() const { return w_; }

 private:
  Matrix<Scalar> data_;  // d x n, column i is a_i
  Vector<Scalar> labels_;
  Scalar w_;
};

template <typename Scalar = double>
std::shared_ptr<const RegularizedProblem<Scalar>> make_regularized_problem(Index dim, Index n, std::uint64_t seed,
                                                                           RegularizedOptions opts = {}) {
  if (dim < 1) throw std::invalid_argument("regularized problem: dim must be at least 1");
  if (n < 2) throw std::invalid_argument("regularized problem: n must be at least 2");
  Rng rng(seed);
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dim));
  Matrix<Scalar> data(dim, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < dim; ++j) data(j, i) = scale * static_cast<Scalar>(rng.normal());
  Vector<Scalar> truth(dim);
  for (Index j = 0; j < dim; ++j) truth(j) = static_cast<Scalar>(rng.normal());
  Vector<Scalar> labels = data.transpose() * truth;
  for (Index i = 0; i < n; ++i) labels(i) += static_cast<Scalar>(opts.label_noise * rng.normal());

  const auto w = static_cast<Scalar>(opts.regularizer_weight);
  const Scalar max_sq = data.colwise().squaredNorm().maxCoeff();
  auto problem = std::make_shared<RegularizedProblem<Scalar>>(std::move(data), std::move(labels), w);

  SmoothnessSpec<Scalar> s;
  s.L1 = max_sq + 2 * w;    // |a_i a_i^T + w diag(r'')| <= |a_i|^2 + 2w
  s.L2 = w * Scalar(6.22);  // the quadratic part has a constant Hessian
  s.delta_F = std::max(problem->value(problem->start()), std::numeric_limits<Scalar>::min());  // F >= 0
  Rng sigma_rng = rng.split(2);
  s.sigma2 = estimate_sigma2<Scalar>(*problem, sigma_rng);
  problem->set_smoothness(s);
  return problem;
}

// ---------------------------------------------------------------------------
// Noisy quadratic: f_i(x) = 1/2 x^T (H + E_i) x + b_i^T x

struct QuadraticOptions {
  double hessian_noise = 0.02;
  double gradient_noise = 0.0;
  /// Any positive value is a valid Hessian-Lipschitz bound for a quadratic.
  double declared_l2 = 1.0;
};

template <typename Scalar>
class QuadraticProblem final : public FiniteSumProblem<Scalar> {
 public:
  using typename Problem<Scalar>::ConstRef;
  using typename Problem<Scalar>::MutRef;
  using typename Problem<Scalar>::VectorType;
  using typename Problem<Scalar>::MatrixType;

  /// `hessian_noise` holds one symmetric d x d block per component, or is empty.
  QuadraticProblem(Matrix<Scalar> hessian, std::vector<Matrix<Scalar>> hessian_noise, Matrix<Scalar> gradient_noise)
      : FiniteSumProblem<Scalar>(static_cast<std::uint64_t>(gradient_noise.cols()),
                                 Vector<Scalar>::Zero(hessian.rows()), std::numeric_limits<Scalar>::infinity()),
        h_(std::move(hessian)),
        e_(std::move(hessian_noise)),
        b_(std::move(gradient_noise)) {}

  void add_sample_gradient(ConstRef x, std::uint64_t id, Scalar weight, MutRef acc) const override {
    acc.noalias() += weight * (h_ * x);
    if (!e_.empty()) acc.noalias() += weight * (e_[id] * x);
    acc += weight * b_.col(static_cast<Index>(id));
  }
  void add_sample_difference(ConstRef x, ConstRef y, std::uint64_t id, Scalar weight,
                             MutRef acc) const override {
    const Vector<Scalar> diff = x - y;
    acc.noalias() += weight * (h_ * diff);
    if (!e_.empty()) acc.noalias() += weight * (e_[id] * diff);
  }

  [[nodiscard]] Scalar value(ConstRef x) const override { return Scalar(0.5) * x.dot(h_ * x); }
  [[nodiscard]] VectorType gradient(ConstRef x) const override { return h_ * x; }
  [[nodiscard]] MatrixType hessian(ConstRef) const override { return h_; }
  [[nodiscard]] std::string name() const override { return "quadratic"; }

 private:
  Matrix<Scalar> h_;
  std::vector<Matrix<Scalar>> e_;
  Matrix<Scalar> b_;
};

/// Random symmetric matrix with the given spectrum, rotated by the Q factor of a Gaussian matrix.
template <typename Scalar = double>
Matrix<Scalar> random_symmetric_with_spectrum(const Vector<Scalar>& eigenvalues, Rng& rng) {
  const Index d = eigenvalues.size();
  Matrix<Scalar> g(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) g(i, j) = static_cast<Scalar>(rng.normal());
  Eigen::HouseholderQR<Matrix<Scalar>> qr(g);
  const Matrix<Scalar> q = qr.householderQ();
  const Matrix<Scalar> h = q * eigenvalues.asDiagonal() * q.transpose();
  return (h + h.transpose()) / 2;
}

/**
 * Finite-sum quadratic with mean Hessian `hessian` and start point 0.
 * delta_F is only meaningful for positive semidefinite H; an indefinite H is
 * unbounded below and the declared 1 is a placeholder.
 */
template <typename Scalar = double>
std::shared_ptr<const QuadraticProblem<Scalar>> make_quadratic_problem(const Matrix<Scalar>& hessian, Index n,
                                                                       std::uint64_t seed, QuadraticOptions opts = {}) {
  if (n < 1) throw std::invalid_argument("quadratic problem: n must be at least 1");
  if (hessian.rows() != hessian.cols()) throw std::invalid_argument("quadratic problem: Hessian must be square");
  const Index d = hessian.rows();
  Rng rng(seed);
  Rng noise_rng = rng.split(1);

  std::vector<Matrix<Scalar>> e;
  Scalar noise_norm = 0;
  if (opts.hessian_noise > 0 && n > 1) {
    e.resize(static_cast<std::size_t>(n));
    Matrix<Scalar> mean = Matrix<Scalar>::Zero(d, d);
    for (auto& block : e) {
      block.resize(d, d);
      for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) block(i, j) = static_cast<Scalar>(opts.hessian_noise * noise_rng.normal());
      block = (block + block.transpose()).eval() / 2;
      mean += block;
    }
    mean /= static_cast<Scalar>(n);
    for (auto& block : e) {
      block -= mean;
      noise_norm = std::max(noise_norm, block.norm());  // Frobenius bounds spectral
    }
  }
  Matrix<Scalar> b = detail::centered_noise<Scalar>(d, n, static_cast<Scalar>(opts.gradient_noise), noise_rng);

  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(hessian, Eigen::EigenvaluesOnly);
  const Scalar spectral = eig.eigenvalues().cwiseAbs().maxCoeff();

  auto problem = std::make_shared<QuadraticProblem<Scalar>>(hessian, std::move(e), std::move(b));
  SmoothnessSpec<Scalar> s;
  s.L1 = std::max(spectral + noise_norm, std::numeric_limits<Scalar>::epsilon());
  s.L2 = static_cast<Scalar>(opts.declared_l2);
  s.delta_F = 1;
  Rng sigma_rng = rng.split(2);
  s.sigma2 = estimate_sigma2<Scalar>(*problem, sigma_rng);
  problem->set_smoothness(s);
  return problem;
}

}  // namespace snvrg
