#pragma once

#include "snvrg/problems.hpp"

#include <memory>

namespace snvrg::test_support {

/// f_i(x) = a_i^T x + 1/2 c |x|^2 with hand-set smoothness metadata.
class LinearProblem final : public FiniteSumProblem<double> {
 public:
  LinearProblem(Matrix<double> a, double c = 0.0)
      : FiniteSumProblem<double>(static_cast<std::uint64_t>(a.cols()), Vector<double>::Zero(a.rows()),
                                 std::numeric_limits<double>::infinity()),
        a_(std::move(a)),
        c_(c) {}

  void add_sample_gradient(ConstRef x, std::uint64_t id, double w, MutRef acc) const override {
    acc += w * (a_.col(static_cast<Index>(id)) + c_ * x);
  }
  [[nodiscard]] double value(ConstRef x) const override {
    return a_.rowwise().mean().dot(x) + 0.5 * c_ * x.squaredNorm();
  }
  [[nodiscard]] VectorType gradient(ConstRef x) const override { return a_.rowwise().mean() + c_ * x; }
  [[nodiscard]] MatrixType hessian(ConstRef x) const override {
    return c_ * MatrixType::Identity(x.size(), x.size());
  }
  [[nodiscard]] std::string name() const override { return "linear"; }

 private:
  Matrix<double> a_;
  double c_;
};

/// Problem whose only purpose is to carry constants into the config formulas.
inline std::shared_ptr<LinearProblem> constants_problem(std::uint64_t n, double L1, double L2, double delta_F,
                                                        std::optional<double> L3 = std::nullopt,
                                                        double sigma2 = 1.0) {
  auto p = std::make_shared<LinearProblem>(Matrix<double>::Zero(2, static_cast<Index>(n)));
  SmoothnessSpec<double> s;
  s.L1 = L1;
  s.L2 = L2;
  s.L3 = L3;
  s.delta_F = delta_F;
  s.sigma2 = sigma2;
  p->set_smoothness(s);
  return p;
}

/// Streaming counterpart of constants_problem.
inline std::shared_ptr<const StreamingView<double>> constants_stream(double L1, double L2, double delta_F,
                                                                     std::optional<double> L3, double sigma2) {
  std::shared_ptr<const FiniteSumProblem<double>> base = constants_problem(4, L1, L2, delta_F, L3, sigma2);
  return make_streaming(base);
}

}  // namespace snvrg::test_support
