#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "htm/geometry.hpp"
#include "htm/random.hpp"

namespace htm {

enum class ObservationMode { State, Raster };
enum class WallOrientation { Vertical, Horizontal, Mixed };
enum class TaskDifficulty { Any, CrossWall };

std::string to_string(ObservationMode m);
std::string to_string(WallOrientation o);
std::string to_string(TaskDifficulty d);
ObservationMode parse_observation_mode(const std::string& s);
WallOrientation parse_wall_orientation(const std::string& s);
TaskDifficulty parse_task_difficulty(const std::string& s);

/// Ranges from which obstacle layouts are drawn.
struct ContextSpec {
  int min_walls = 1;
  int max_walls = 1;
  WallOrientation orientation = WallOrientation::Vertical;
  double half_thickness_min = 0.1;
  double half_thickness_max = 0.15;
  double half_length_min = 0.6;
  double half_length_max = 1.0;
  /// Minimum distance from the arena border to the wall center, across the
  /// wall's thin axis. Leaves room on both sides for cross-wall tasks.
  double cross_margin = 0.8;
};

struct WorldParams {
  double arena_size = 2.8;
  double agent_radius = 0.15;
  double max_action = 0.1;
  int raster_size = 16;
  ObservationMode mode = ObservationMode::State;
  ContextSpec contexts;
};

struct Context {
  int id = 0;
  double arena_size = 2.8;
  std::vector<Rect> walls;
  friend bool operator==(const Context&, const Context&) = default;
};

struct AgentState {
  Vec2 position;
  double radius = 0.15;
  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct Action {
  double dx = 0.0;
  double dy = 0.0;
  friend bool operator==(const Action&, const Action&) = default;
};

struct Observation {
  ObservationMode mode = ObservationMode::State;
  std::vector<double> data;
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct Trajectory {
  int context_id = 0;
  int trajectory_id = 0;
  std::vector<Observation> observations;  // T + 1 entries
  std::vector<Action> actions;            // T entries
  std::vector<Vec2> positions;            // underlying states, T + 1 entries

  std::size_t length() const { return actions.size(); }
};

struct DataSpec {
  int num_contexts = 40;
  int trajectories_per_context = 20;
  int horizon = 20;
  std::uint64_t seed = 0;
  int first_context_id = 0;
};

struct TransitionDataset {
  WorldParams world;
  DataSpec spec;
  std::vector<Context> contexts;
  std::vector<Trajectory> trajectories;

  const Context& context(int id) const;
  std::vector<const Trajectory*> trajectories_for(int context_id) const;
  std::size_t transition_count() const;
};

struct Task {
  int id = 0;
  Context context;
  AgentState start;
  AgentState goal;
  Observation o_start;
  Observation o_goal;
  double tau = 0.5;
  TaskDifficulty difficulty = TaskDifficulty::Any;
};

/// Deterministic kinematic block world. Moves that would sweep the agent disc
/// through a wall or out of the arena are rejected (the agent stays put).
class World {
 public:
  explicit World(WorldParams params = {});

  const WorldParams& params() const { return params_; }
  ObservationMode mode() const { return params_.mode; }

  /// Throws ConfigError when the context ranges are infeasible.
  static void validate(const WorldParams& params);

  Context generate_context(std::uint64_t seed, int id = 0) const;

  AgentState state(double x, double y) const;
  bool is_valid(const Context& c, Vec2 position) const;
  /// True when a disc translated along a->b stays in the arena and clear of walls.
  bool segment_free(const Context& c, Vec2 a, Vec2 b) const;

  Action clamp(Action a) const;
  AgentState step(const Context& c, const AgentState& s, Action a) const;
  Trajectory rollout_random(const Context& c, const AgentState& s0, int steps,
                            std::uint64_t seed) const;
  AgentState sample_free_state(const Context& c, Rng& rng) const;

  Observation observe(const Context& c, const AgentState& s) const;
  Observation observe_position(Vec2 p) const;
  /// Recovers the agent position. Raster observations decode through the
  /// occupancy centroid. Throws EvaluationError when undecodable.
  Vec2 decode(const Observation& o) const;
  Vec2 decode(std::span<const double> data) const;

  std::vector<double> encode_context(const Context& c) const;
  std::size_t observation_dim() const;
  std::size_t context_dim() const;

  bool oracle_reachable(const Context& c, const Observation& a,
                        const Observation& b, int horizon) const;
  bool oracle_reachable(const Context& c, Vec2 a, Vec2 b, int horizon) const;

  Task make_task(const Context& c, std::uint64_t seed, TaskDifficulty difficulty,
                 double tau = 0.5, int id = 0) const;

  /// Flood fill over a grid of candidate agent positions; true when every
  /// valid cell is reachable from every other one.
  bool free_space_connected(const Context& c, double resolution = 0.02) const;

 private:
  WorldParams params_;
};

/// Collects random-exploration trajectories for `spec.num_contexts` contexts
/// with ids starting at `spec.first_context_id`.
TransitionDataset collect_dataset(const World& world, const DataSpec& spec);

/// Contexts that never appear in a dataset collected with `spec`.
std::vector<Context> heldout_contexts(const World& world, const DataSpec& spec,
                                      int count);

/// Replays `fraction` of the trajectories and counts transitions whose stored
/// successor differs from `World::step`.
std::size_t audit_replay(const World& world, const TransitionDataset& data,
                         double fraction, std::uint64_t seed);

}  // namespace htm
