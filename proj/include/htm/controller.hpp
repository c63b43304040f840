#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "htm/checkpoint.hpp"
#include "htm/connectivity.hpp"
#include "htm/dataset_io.hpp"
#include "htm/generator.hpp"
#include "htm/planner.hpp"

namespace htm {

struct InverseConfig {
  int hidden = 64;
  int depth = 2;
  Activation activation = Activation::Relu;
  AdamConfig adam;
  int epochs = 20;
  int batch_size = 128;
  std::uint64_t seed = 0;
};

/// Policy pi(o, o_target, c) = a_max * tanh(mlp(o (+) o_target (+) c)).
struct InverseModel {
  int obs_dim = 0;
  int ctx_dim = 0;
  double max_action = 0.1;
  MlpParams net;

  std::vector<Matrix*> parameters() { return net.parameters(); }
  std::vector<const Matrix*> parameters() const { return net.parameters(); }
};

InverseModel make_inverse(int obs_dim, int ctx_dim, double max_action, const InverseConfig& config);

/// One-step transitions flattened into matrices.
struct TransitionBatch {
  Matrix obs;
  Matrix next_obs;
  Matrix contexts;
  Matrix actions;  // rows (dx, dy)

  Eigen::Index size() const { return obs.rows(); }
};

TransitionBatch gather_transitions(const World& world, const TransitionDataset& data,
                                   bool validation_split);

/// Batch mean of the squared L2 action error.
ad::Var inverse_loss(const InverseModel& shape, std::span<const ad::Var> params,
                     const TransitionBatch& batch);
double inverse_loss(const InverseModel& model, const TransitionBatch& batch);
Matrix predict_actions(const InverseModel& model, const Matrix& obs, const Matrix& target,
                       const Matrix& contexts);

struct InverseTrainResult {
  InverseModel model;
  TrainingCurve curve;
  double baseline_error = 0.0;    // validation error of the mean-action predictor
  double validation_error = 0.0;  // validation error of the returned model
};

InverseTrainResult train_inverse(const World& world, const TransitionDataset& data,
                                 const InverseConfig& config, const LogFn& log = {});

Action infer_action(const InverseModel& model, std::span<const double> current,
                    std::span<const double> target, std::span<const double> context);

Checkpoint to_checkpoint(const InverseModel& model);
InverseModel inverse_from_checkpoint(const Checkpoint& ckpt);

struct ExecutionConfig {
  int max_steps = 500;         // n
  int replan_interval = 200;   // r
  double tau = 0.5;            // success radius in world units
  double waypoint_radius = 0.1;
  int waypoint_horizon = 5;    // steps spent on one waypoint before moving on
  /// State mode only: targets farther than this (world units) are replaced by
  /// the point at this distance along the straight line, so the inverse model
  /// is queried within the range of its one-step training pairs. 0 disables.
  double lookahead = 0.1;
  bool use_planner = true;     // false: pursue the goal observation directly
  PlanningConfig planning;
};

struct Models {
  const CvaeModel* cvae = nullptr;
  const PairScorer* scorer = nullptr;
  const InverseModel* inverse = nullptr;
};

struct ExecutionResult {
  bool success = false;
  int steps = 0;
  double final_distance = 0.0;
  int replans = 0;
  bool planless = false;  // the planner found no path at least once
  std::vector<Vec2> states;
  std::vector<Action> actions;
  std::vector<Plan> plans;
};

/// Closed-loop execution. Replanning happens on the global step counter
/// whenever it reaches a multiple of the replanning interval.
ExecutionResult execute(const World& world, const Task& task, const Models& models,
                        const ExecutionConfig& config, std::uint64_t seed);

Json to_json(const Plan& plan);
Json to_json(const ExecutionResult& result);

}  // namespace htm
