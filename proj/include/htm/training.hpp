#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace htm {

using LogFn = std::function<void(const std::string&)>;

struct TrainingCurve {
  double initial_validation = 0.0;      // before the first update
  std::vector<double> train_loss;       // mean minibatch loss per epoch
  std::vector<double> validation_loss;  // per epoch
  int best_epoch = -1;
  double best_validation = std::numeric_limits<double>::infinity();
};

/// Throws DivergenceError when `value` is NaN or infinite.
void require_finite(double value, const std::string& what, int epoch, long step = -1);

/// Validation split: every tenth trajectory of a context is held back
/// (trajectory_id % 10 == 9) when a context has at least two trajectories.
bool is_validation_trajectory(int trajectory_id, int trajectories_per_context);

}  // namespace htm
