#include "htm/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "htm/errors.hpp"

namespace htm {

namespace {

Matrix take_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(idx[k]));
  return out;
}

TransitionBatch take(const TransitionBatch& b, std::span<const std::size_t> idx) {
  return {take_rows(b.obs, idx), take_rows(b.next_obs, idx), take_rows(b.contexts, idx),
          take_rows(b.actions, idx)};
}

Matrix policy_input(const Matrix& obs, const Matrix& target, const Matrix& contexts) {
  Matrix x(obs.rows(), obs.cols() + target.cols() + contexts.cols());
  x << obs, target, contexts;
  return x;
}

double mean_action_error(const Matrix& actions, const Eigen::RowVectorXd& mean) {
  return (actions.rowwise() - mean).rowwise().squaredNorm().mean();
}

}  // namespace

InverseModel make_inverse(int obs_dim, int ctx_dim, double max_action, const InverseConfig& config) {
  if (!(max_action > 0.0)) throw ConfigError("world.a_max must be positive", "world.a_max");
  Rng rng(derive_seed(config.seed, seed_stream::kInit));
  InverseModel m;
  m.obs_dim = obs_dim;
  m.ctx_dim = ctx_dim;
  m.max_action = max_action;
  m.net = make_mlp(mlp_sizes(2 * obs_dim + ctx_dim, config.hidden, config.depth, 2), config.activation,
                   Activation::Tanh, rng);
  return m;
}

TransitionBatch gather_transitions(const World& world, const TransitionDataset& data,
                                   bool validation_split) {
  std::map<int, std::vector<double>> enc;
  for (const Context& c : data.contexts) enc[c.id] = world.encode_context(c);
  std::vector<std::vector<double>> obs, next, ctx, act;
  for (const Trajectory& t : data.trajectories) {
    if (is_validation_trajectory(t.trajectory_id, data.spec.trajectories_per_context) != validation_split) {
      continue;
    }
    for (std::size_t k = 0; k < t.length(); ++k) {
      obs.push_back(t.observations[k].data);
      next.push_back(t.observations[k + 1].data);
      ctx.push_back(enc.at(t.context_id));
      act.push_back({t.actions[k].dx, t.actions[k].dy});
    }
  }
  TransitionBatch b;
  if (obs.empty()) return b;
  b.obs = stack_rows(obs);
  b.next_obs = stack_rows(next);
  b.contexts = stack_rows(ctx);
  b.actions = stack_rows(act);
  return b;
}

ad::Var inverse_loss(const InverseModel& shape, std::span<const ad::Var> params,
                     const TransitionBatch& batch) {
  if (batch.size() == 0) throw UsageError("inverse loss of an empty batch");
  if (batch.obs.cols() != shape.obs_dim || batch.contexts.cols() != shape.ctx_dim) {
    throw ShapeError("inverse: batch shape does not match the model");
  }
  ad::Tape& tape = *params.front().tape();
  const MlpVars net = bind(params, shape.net);
  const ad::Var x = tape.constant(policy_input(batch.obs, batch.next_obs, batch.contexts));
  const ad::Var pred = ad::scale(mlp_apply(net, x), shape.max_action);
  const ad::Var err = ad::sub(pred, tape.constant(batch.actions));
  return ad::mean(ad::row_sum(ad::square(err)));
}

double inverse_loss(const InverseModel& model, const TransitionBatch& batch) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Matrix* p : model.parameters()) vars.push_back(tape.constant(*p));
  return inverse_loss(model, vars, batch).scalar();
}

Matrix predict_actions(const InverseModel& model, const Matrix& obs, const Matrix& target,
                       const Matrix& contexts) {
  if (obs.cols() != model.obs_dim || target.cols() != model.obs_dim ||
      contexts.cols() != model.ctx_dim || obs.rows() != target.rows() || obs.rows() != contexts.rows()) {
    throw ShapeError("inverse: input shape does not match the model");
  }
  return model.max_action * mlp_apply(model.net, policy_input(obs, target, contexts));
}

InverseTrainResult train_inverse(const World& world, const TransitionDataset& data,
                                 const InverseConfig& config, const LogFn& log) {
  const TransitionBatch train = gather_transitions(world, data, false);
  TransitionBatch val = gather_transitions(world, data, true);
  if (train.size() == 0) throw EvaluationError("train_inverse: empty dataset");
  if (val.size() == 0) val = train;

  InverseModel model = make_inverse(static_cast<int>(world.observation_dim()),
                                    static_cast<int>(world.context_dim()), world.params().max_action, config);
  auto params = model.parameters();
  OptimizerState opt = make_adam(params, config.adam);
  Rng rng(derive_seed(config.seed, seed_stream::kTraining));

  InverseTrainResult result;
  const Eigen::RowVectorXd mean_action = train.actions.colwise().mean();
  result.baseline_error = mean_action_error(val.actions, mean_action);
  result.curve.initial_validation = inverse_loss(model, val);
  result.model = model;
  result.validation_error = result.curve.initial_validation;

  std::vector<std::size_t> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(std::max(1, config.batch_size));
  std::vector<Matrix> grads;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(batch, order.size() - start));
      const TransitionBatch mb = take(train, idx);
      const double loss = loss_and_grad(
          [&](ad::Tape&, std::span<const ad::Var> vars) { return inverse_loss(model, vars, mb); }, params,
          grads);
      require_finite(loss, "inverse loss", epoch, step);
      adam_step(params, grads, opt);
      epoch_loss += loss;
      ++batches;
      ++step;
    }
    const double val_loss = inverse_loss(model, val);
    require_finite(val_loss, "inverse validation loss", epoch);
    result.curve.train_loss.push_back(epoch_loss / std::max(1, batches));
    result.curve.validation_loss.push_back(val_loss);
    if (val_loss < result.curve.best_validation) {
      result.curve.best_validation = val_loss;
      result.curve.best_epoch = epoch;
      result.model = model;
      result.validation_error = val_loss;
    }
    if (log) {
      log("inverse epoch " + std::to_string(epoch) + " train " +
          std::to_string(result.curve.train_loss.back()) + " val " + std::to_string(val_loss) +
          " (mean-action baseline " + std::to_string(result.baseline_error) + ")");
    }
  }
  return result;
}

Action infer_action(const InverseModel& model, std::span<const double> current,
                    std::span<const double> target, std::span<const double> context) {
  const Matrix a = predict_actions(model, row_vector(current), row_vector(target), row_vector(context));
  // tanh can round to exactly +-1; clamp keeps the bound exact.
  return {std::clamp(a(0, 0), -model.max_action, model.max_action),
          std::clamp(a(0, 1), -model.max_action, model.max_action)};
}

Checkpoint to_checkpoint(const InverseModel& model) {
  Checkpoint ckpt;
  ckpt.kind = "INVM";
  ckpt.meta = {static_cast<double>(model.obs_dim), static_cast<double>(model.ctx_dim), model.max_action};
  append_mlp(ckpt, model.net);
  return ckpt;
}

InverseModel inverse_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "INVM") throw IoError("not an INVM checkpoint", ckpt.kind);
  if (ckpt.meta.size() < 3) throw IoError("INVM checkpoint metadata truncated", "<checkpoint>");
  InverseModel m;
  m.obs_dim = static_cast<int>(ckpt.meta[0]);
  m.ctx_dim = static_cast<int>(ckpt.meta[1]);
  m.max_action = ckpt.meta[2];
  std::size_t meta = 3;
  std::size_t tensor = 0;
  m.net = read_mlp(ckpt, meta, tensor);
  if (m.net.input_dim() != 2 * m.obs_dim + m.ctx_dim || m.net.output_dim() != 2) {
    throw IoError("INVM checkpoint dimensions are inconsistent", "<checkpoint>");
  }
  return m;
}

ExecutionResult execute(const World& world, const Task& task, const Models& models,
                        const ExecutionConfig& config, std::uint64_t seed) {
  if (!models.inverse) throw UsageError("execute: an inverse model is required");
  if (config.use_planner && (!models.cvae || !models.scorer)) {
    throw UsageError("execute: planning needs a generator and a connectivity scorer");
  }
  if (config.max_steps < 0) throw ConfigError("execution.n must be nonnegative", "execution.n");
  if (config.replan_interval < 1) throw ConfigError("execution.r must be positive", "execution.r");
  if (config.waypoint_horizon < 1) throw ConfigError("execution.h must be positive", "execution.h");

  const Context& c = task.context;
  const std::vector<double> enc = world.encode_context(c);
  const Vec2 goal = task.goal.position;
  ExecutionResult result;
  AgentState s = task.start;
  result.states.push_back(s.position);
  result.final_distance = distance(s.position, goal);
  if (result.final_distance <= task.tau) {
    result.success = true;
    return result;
  }

  // Waypoints as observation rows; the last row is always the goal.
  Matrix route;
  std::vector<double> edge_logits;  // logit of the edge into each route row
  std::size_t wp = 0;
  int steps_on_wp = 0;
  const auto replan = [&](int index) {
    const Observation current = world.observe(c, s);
    route = row_vector(task.o_goal.data);
    edge_logits.assign(1, -std::numeric_limits<double>::infinity());
    wp = 0;
    steps_on_wp = 0;
    if (!config.use_planner) return;
    try {
      Plan plan = plan_end_to_end(c, world, current, task.o_goal, *models.cvae, *models.scorer,
                                  config.planning, derive_seed(seed, seed_stream::kHallucination, index));
      route = plan.observations.bottomRows(plan.observations.rows() - 1);
      edge_logits.clear();
      for (Eigen::Index k = 1; k < plan.observations.rows(); ++k) {
        edge_logits.push_back(models.scorer->logit(
            std::span<const double>(plan.observations.row(k - 1).data(), static_cast<std::size_t>(route.cols())),
            std::span<const double>(plan.observations.row(k).data(), static_cast<std::size_t>(route.cols())), enc));
      }
      result.plans.push_back(std::move(plan));
    } catch (const NoPathError&) {
      result.planless = true;
    }
  };
  replan(0);

  for (int t = 1; t <= config.max_steps; ++t) {
    const Observation current = world.observe(c, s);
    const std::span<const double> target(route.row(static_cast<Eigen::Index>(wp)).data(),
                                         static_cast<std::size_t>(route.cols()));
    std::vector<double> query(target.begin(), target.end());
    if (world.mode() == ObservationMode::State && config.lookahead > 0.0) {
      const Vec2 goal_point = world.decode(target);
      const double d = distance(s.position, goal_point);
      if (d > config.lookahead) {
        const Vec2 near = s.position + (config.lookahead / d) * (goal_point - s.position);
        query = world.observe_position(near).data;
      }
    }
    const Action a = infer_action(*models.inverse, current.data, query, enc);
    s = world.step(c, s, a);
    result.actions.push_back(a);
    result.states.push_back(s.position);
    result.steps = t;
    result.final_distance = distance(s.position, goal);
    if (result.final_distance <= task.tau) {
      result.success = true;
      break;
    }
    ++steps_on_wp;
    if (wp + 1 < static_cast<std::size_t>(route.rows())) {
      bool reached = false;
      if (world.mode() == ObservationMode::State) {
        reached = distance(s.position, world.decode(target)) <= config.waypoint_radius;
      } else if (models.scorer) {
        const Observation now = world.observe(c, s);
        reached = models.scorer->logit(now.data, target, enc) >= edge_logits[wp];
      }
      if (reached || steps_on_wp >= config.waypoint_horizon) {
        ++wp;
        steps_on_wp = 0;
      }
    }
    if (t % config.replan_interval == 0) {
      ++result.replans;
      if (t < config.max_steps) replan(result.replans);
    }
  }
  return result;
}

Json to_json(const Plan& plan) {
  Json j;
  j["path"] = plan.path;
  j["edge_weights"] = plan.edge_weights;
  j["total"] = plan.total;
  j["found"] = plan.found;
  j["scheme"] = to_string(plan.scheme.kind);
  j["s_shortcut"] = plan.scheme.s_shortcut;
  j["seed"] = plan.seed;
  Json obs = Json::array();
  for (Eigen::Index r = 0; r < plan.observations.rows(); ++r) {
    obs.push_back(std::vector<double>(plan.observations.row(r).data(),
                                      plan.observations.row(r).data() + plan.observations.cols()));
  }
  j["observations"] = std::move(obs);
  return j;
}

Json to_json(const ExecutionResult& result) {
  Json j;
  j["success"] = result.success;
  j["steps"] = result.steps;
  j["final_distance"] = result.final_distance;
  j["replans"] = result.replans;
  j["planless"] = result.planless;
  Json states = Json::array();
  for (const Vec2& p : result.states) states.push_back({p.x, p.y});
  j["states"] = std::move(states);
  Json actions = Json::array();
  for (const Action& a : result.actions) actions.push_back({a.dx, a.dy});
  j["actions"] = std::move(actions);
  Json plans = Json::array();
  for (const Plan& p : result.plans) plans.push_back(to_json(p));
  j["plans"] = std::move(plans);
  return j;
}

}  // namespace htm
