#include "htm/training.hpp"

#include <cmath>

#include "htm/errors.hpp"

namespace htm {

void require_finite(double value, const std::string& what, int epoch, long step) {
  if (std::isfinite(value)) return;
  std::string msg = what + " became non-finite at epoch " + std::to_string(epoch);
  if (step >= 0) msg += ", step " + std::to_string(step);
  throw DivergenceError(msg);
}

bool is_validation_trajectory(int trajectory_id, int trajectories_per_context) {
  return trajectories_per_context >= 2 && trajectory_id % 10 == 9;
}

}  // namespace htm
