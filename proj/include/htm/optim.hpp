#pragma once

#include <functional>
#include <span>
#include <vector>

#include "htm/tensor.hpp"

namespace htm {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamConfig config;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  long step = 0;
};

OptimizerState make_adam(std::span<Matrix* const> params, AdamConfig config = {});

/// Bias-corrected adaptive-moment update in place.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads,
               OptimizerState& state);

/// Builds a scalar loss on `tape` from the bound parameter variables.
using LossBuilder = std::function<ad::Var(ad::Tape&, std::span<const ad::Var>)>;

/// Evaluates the loss and its gradient with respect to `params`.
double loss_and_grad(const LossBuilder& loss, std::span<Matrix* const> params,
                     std::vector<Matrix>& grads);

struct GradCheckReport {
  std::vector<double> max_rel_error;  // per parameter tensor
  double worst = 0.0;
  std::size_t entries_checked = 0;
  bool passed = true;
};

/// Central finite differences against the tape gradient. The relative error
/// of an entry is |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(const LossBuilder& loss, std::span<Matrix* const> params,
                           double delta = 1e-5, double tol = 1e-4);

}  // namespace htm
