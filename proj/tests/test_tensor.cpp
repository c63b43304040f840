#include <cmath>
#include <vector>

#include "doctest.h"
#include "htm/errors.hpp"
#include "htm/nn.hpp"
#include "htm/optim.hpp"
#include "htm/selftest.hpp"

using namespace htm;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
  return m;
}

// Scalar loops, no Eigen products: an independent forward pass.
std::vector<double> naive_forward(const MlpParams& p, std::vector<double> x) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const DenseLayer& layer = p.layers[l];
    std::vector<double> y(static_cast<std::size_t>(layer.weight.rows()));
    for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
      double s = layer.bias(0, o);
      for (Eigen::Index i = 0; i < layer.weight.cols(); ++i) s += layer.weight(o, i) * x[static_cast<std::size_t>(i)];
      const Activation a = l + 1 == p.layers.size() ? p.output : p.hidden;
      if (a == Activation::Relu) s = s > 0.0 ? s : 0.0;
      if (a == Activation::Tanh) s = std::tanh(s);
      y[static_cast<std::size_t>(o)] = s;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("identity layer passes input through") {
  MlpParams p;
  p.output = Activation::Identity;
  p.layers.push_back({Matrix::Identity(3, 3), Matrix::Zero(1, 3)});
  Matrix x(1, 3);
  x << 0.5, -2.0, 7.0;
  CHECK(mlp_apply(p, x) == x);
}

TEST_CASE("relu layer on (-1, 2)") {
  MlpParams p;
  p.output = Activation::Relu;
  p.layers.push_back({Matrix::Identity(2, 2), Matrix::Zero(1, 2)});
  Matrix x(1, 2);
  x << -1.0, 2.0;
  const Matrix y = mlp_apply(p, x);
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 2.0);
}

TEST_CASE("random network matches a scalar re-implementation") {
  Rng rng(3);
  for (Activation a : {Activation::Relu, Activation::Tanh}) {
    const std::vector<int> sizes{4, 7, 5, 3};
    const MlpParams p = make_mlp(sizes, a, Activation::Tanh, rng);
    const Matrix x = random_matrix(6, 4, rng);
    const Matrix y = mlp_apply(p, x);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const auto expected = naive_forward(p, std::vector<double>(x.row(r).data(), x.row(r).data() + 4));
      for (Eigen::Index c = 0; c < 3; ++c) CHECK(std::abs(y(r, c) - expected[static_cast<std::size_t>(c)]) < 1e-12);
    }
    // The tape forward agrees with the plain forward.
    ad::Tape tape;
    const MlpVars vars = bind(tape, p);
    const Matrix taped = mlp_apply(vars, tape.constant(x)).value();
    CHECK((taped - y).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("gradient of w^T x with respect to w is x") {
  Rng rng(1);
  ad::Tape tape;
  const Matrix w0 = random_matrix(1, 5, rng);
  const Matrix x0 = random_matrix(5, 1, rng);
  const ad::Var w = tape.parameter(w0);
  const ad::Var x = tape.constant(x0);
  tape.backward(ad::matmul(w, x));
  CHECK((tape.grad(w) - x0.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant loss gives zero gradients") {
  ad::Tape tape;
  const ad::Var w = tape.parameter(Matrix::Ones(2, 3));
  const ad::Var c = tape.constant(Matrix::Constant(1, 1, 4.0));
  tape.backward(c);
  CHECK(tape.grad(w).isZero(0.0));
}

TEST_CASE("backward requires a scalar loss and matching shapes") {
  ad::Tape tape;
  const ad::Var a = tape.parameter(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(tape.backward(a), UsageError);
  CHECK_THROWS_AS(ad::add(a, tape.constant(Matrix::Ones(3, 2))), ShapeError);
}

TEST_CASE("every tape op passes finite differences") {
  Rng rng(9);
  Matrix a0 = random_matrix(3, 4, rng);
  Matrix b0 = random_matrix(3, 4, rng);
  Matrix c0 = random_matrix(4, 2, rng);
  Matrix r0 = random_matrix(1, 4, rng);
  Matrix pos0 = (random_matrix(3, 4, rng).array().abs() + 0.5).matrix();
  std::vector<Matrix*> params{&a0, &b0, &c0, &r0, &pos0};
  const LossBuilder loss = [](ad::Tape&, std::span<const ad::Var> v) {
    using namespace ad;
    const Var a = v[0], b = v[1], c = v[2], r = v[3], pos = v[4];
    Var t = add(mul(tanh(a), sigmoid(b)), scale(sub(a, b), 0.3));
    t = add_row(t, r);
    t = add(t, add_scalar(square(a), 0.1));
    t = add(t, log(pos));
    t = add(t, softplus(b));
    t = add(t, scale(exp(scale(a, 0.2)), 0.5));
    const Var m = matmul(t, c);                      // 3 x 2
    const Var n = matmul_nt(t, a);                   // 3 x 3
    const Var cat = concat_cols(m, n);               // 3 x 5
    const Var sl = slice_cols(cat, 1, 3);            // 3 x 3
    const Var rep = repeat_rows(sl, 2);              // 6 x 3
    const Var lse = log_sum_exp_rows(reshape(rep, 3, 6));
    return add(add(sum(lse), mean(row_sum(relu(cat)))), sum(column(cat, 2)));
  };
  const GradCheckReport report = grad_check(loss, params, 1e-5, 1e-5);
  CHECK(report.passed);
}

TEST_CASE("grad_check on a linear loss has no error") {
  Matrix w = Matrix::Constant(2, 2, 0.3);
  std::vector<Matrix*> params{&w};
  const Matrix x = Matrix::Constant(2, 2, 2.0);
  const GradCheckReport r = grad_check(
      [&](ad::Tape& t, std::span<const ad::Var> v) { return ad::sum(ad::mul(v[0], t.constant(x))); }, params);
  CHECK(r.worst < 1e-9);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Matrix p = Matrix::Constant(2, 3, 1.5);
  std::vector<Matrix*> params{&p};
  OptimizerState s = make_adam(params);
  const std::vector<Matrix> g{Matrix::Zero(2, 3)};
  for (int i = 0; i < 5; ++i) adam_step(params, g, s);
  CHECK(p == Matrix::Constant(2, 3, 1.5));
}

TEST_CASE("adam: first step moves each entry by about lr against the gradient sign") {
  Matrix p = Matrix::Zero(1, 3);
  std::vector<Matrix*> params{&p};
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  OptimizerState s = make_adam(params, cfg);
  Matrix g(1, 3);
  g << 3.0, -0.2, 1e-3;
  adam_step(params, std::vector<Matrix>{g}, s);
  for (int k = 0; k < 3; ++k) {
    const double expected = -cfg.learning_rate * (g(0, k) > 0 ? 1.0 : -1.0);
    CHECK(p(0, k) == doctest::Approx(expected).epsilon(1e-4));
  }
}

TEST_CASE("adam converges on a quadratic bowl") {
  Matrix p(1, 3);
  p << 4.0, -3.0, 0.5;
  Matrix target(1, 3);
  target << 1.0, 2.0, -1.0;
  Matrix curvature(1, 3);
  curvature << 1.0, 3.0, 0.5;
  std::vector<Matrix*> params{&p};
  AdamConfig cfg;
  cfg.learning_rate = 0.05;
  OptimizerState s = make_adam(params, cfg);
  for (int i = 0; i < 2000; ++i) {
    const Matrix g = 2.0 * curvature.cwiseProduct(p - target);
    adam_step(params, std::vector<Matrix>{g}, s);
  }
  CHECK((p - target).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("log_sum_exp is stable for large magnitudes") {
  const std::vector<double> big{500.0, 500.0};
  CHECK(log_sum_exp(big) == doctest::Approx(500.0 + std::log(2.0)).epsilon(1e-15));
  const std::vector<double> small{-500.0, -500.0};
  CHECK(log_sum_exp(small) == doctest::Approx(-500.0 + std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("loss gradients pass finite differences on random small instances") {
  for (GradLoss l : {GradLoss::Cpc, GradLoss::SptmBce, GradLoss::CvaeElbo, GradLoss::Inverse}) {
    CAPTURE(to_string(l));
    const SuiteResult r = gradient_suite(l, 5, 123, 1e-4);
    CHECK(r.passed);
    CHECK(r.instances == 5);
  }
}

}
