#include "htm/optim.hpp"

#include <algorithm>
#include <cmath>

#include "htm/errors.hpp"

namespace htm {

OptimizerState make_adam(std::span<Matrix* const> params, AdamConfig config) {
  OptimizerState s;
  s.config = config;
  for (const Matrix* p : params) {
    s.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    s.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
  return s;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads,
               OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw ShapeError("adam_step: parameter/gradient/state count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols() ||
        state.first_moment[i].rows() != grads[i].rows() ||
        state.first_moment[i].cols() != grads[i].cols()) {
      throw ShapeError("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[i].cwiseAbs2();
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    params[i]->array() -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
  }
}

double loss_and_grad(const LossBuilder& loss, std::span<Matrix* const> params,
                     std::vector<Matrix>& grads) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const Matrix* p : params) vars.push_back(tape.parameter(*p));
  ad::Var l = loss(tape, vars);
  tape.backward(l);
  grads.clear();
  for (const auto& v : vars) grads.push_back(tape.grad(v));
  return l.scalar();
}

namespace {

double evaluate(const LossBuilder& loss, std::span<Matrix* const> params) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Matrix* p : params) vars.push_back(tape.constant(*p));
  return loss(tape, vars).scalar();
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& loss, std::span<Matrix* const> params,
                           double delta, double tol) {
  std::vector<Matrix> analytic;
  loss_and_grad(loss, params, analytic);
  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    double worst = 0.0;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      double& x = p.data()[k];
      const double saved = x;
      x = saved + delta;
      const double up = evaluate(loss, params);
      x = saved - delta;
      const double down = evaluate(loss, params);
      x = saved;
      const double numeric = (up - down) / (2.0 * delta);
      const double a = analytic[i].data()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / denom);
      ++report.entries_checked;
    }
    report.max_rel_error.push_back(worst);
    report.worst = std::max(report.worst, worst);
  }
  report.passed = report.worst < tol;
  return report;
}

}  // namespace htm
