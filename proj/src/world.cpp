#include "htm/world.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "htm/errors.hpp"

namespace htm {

std::string to_string(ObservationMode m) {
  return m == ObservationMode::State ? "state" : "raster";
}

std::string to_string(WallOrientation o) {
  switch (o) {
    case WallOrientation::Vertical: return "vertical";
    case WallOrientation::Horizontal: return "horizontal";
    case WallOrientation::Mixed: return "mixed";
  }
  return "vertical";
}

std::string to_string(TaskDifficulty d) {
  return d == TaskDifficulty::Any ? "any" : "cross-wall";
}

ObservationMode parse_observation_mode(const std::string& s) {
  if (s == "state") return ObservationMode::State;
  if (s == "raster") return ObservationMode::Raster;
  throw ConfigError("unknown observation mode '" + s + "'");
}

WallOrientation parse_wall_orientation(const std::string& s) {
  if (s == "vertical") return WallOrientation::Vertical;
  if (s == "horizontal") return WallOrientation::Horizontal;
  if (s == "mixed") return WallOrientation::Mixed;
  throw ConfigError("unknown wall orientation '" + s + "'");
}

TaskDifficulty parse_task_difficulty(const std::string& s) {
  if (s == "any") return TaskDifficulty::Any;
  if (s == "cross-wall") return TaskDifficulty::CrossWall;
  throw ConfigError("unknown task difficulty '" + s + "'");
}

const Context& TransitionDataset::context(int id) const {
  for (const auto& c : contexts) {
    if (c.id == id) return c;
  }
  throw EvaluationError("unknown context id " + std::to_string(id));
}

std::vector<const Trajectory*> TransitionDataset::trajectories_for(int context_id) const {
  std::vector<const Trajectory*> out;
  for (const auto& t : trajectories) {
    if (t.context_id == context_id) out.push_back(&t);
  }
  return out;
}

std::size_t TransitionDataset::transition_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.length();
  return n;
}

World::World(WorldParams params) : params_(std::move(params)) { validate(params_); }

void World::validate(const WorldParams& p) {
  const auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError(key + ": " + why, key);
  };
  if (!(p.arena_size > 0.0)) fail("world.arena_size", "must be positive");
  if (!(p.agent_radius > 0.0)) fail("world.agent_radius", "must be positive");
  if (!(2.0 * p.agent_radius < p.arena_size)) fail("world.agent_radius", "agent does not fit in arena");
  if (!(p.max_action > 0.0)) fail("world.a_max", "must be positive");
  if (p.raster_size < 2) fail("world.raster_size", "must be at least 2");
  const ContextSpec& c = p.contexts;
  if (c.min_walls < 0) fail("world.walls.min_walls", "must be nonnegative");
  if (c.max_walls < c.min_walls) fail("world.walls.max_walls", "must be >= min_walls");
  if (!(c.half_thickness_min > 0.0) || c.half_thickness_max < c.half_thickness_min) {
    fail("world.walls.half_thickness", "range must be positive and ordered");
  }
  if (!(c.half_length_min > 0.0) || c.half_length_max < c.half_length_min) {
    fail("world.walls.half_length", "range must be positive and ordered");
  }
  if (2.0 * c.half_length_max > p.arena_size) {
    fail("world.walls.half_length", "wall longer than arena");
  }
  if (c.cross_margin < c.half_thickness_max || 2.0 * c.cross_margin > p.arena_size) {
    fail("world.walls.cross_margin", "must lie in [half_thickness_max, arena_size/2]");
  }
}

Context World::generate_context(std::uint64_t seed, int id) const {
  const ContextSpec& spec = params_.contexts;
  const double S = params_.arena_size;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(seed, seed_stream::kContext, static_cast<std::uint64_t>(attempt)));
    std::uniform_int_distribution<int> count_dist(spec.min_walls, spec.max_walls);
    Context c;
    c.id = id;
    c.arena_size = S;
    const int n = count_dist(rng);
    for (int w = 0; w < n; ++w) {
      bool vertical = spec.orientation != WallOrientation::Horizontal;
      if (spec.orientation == WallOrientation::Mixed) {
        vertical = std::bernoulli_distribution(0.5)(rng);
      }
      const double thick =
          std::uniform_real_distribution<double>(spec.half_thickness_min, spec.half_thickness_max)(rng);
      const double len =
          std::uniform_real_distribution<double>(spec.half_length_min, spec.half_length_max)(rng);
      const double across =
          std::uniform_real_distribution<double>(spec.cross_margin, S - spec.cross_margin)(rng);
      const double along = std::uniform_real_distribution<double>(len, S - len)(rng);
      c.walls.push_back(vertical ? Rect{across, along, thick, len} : Rect{along, across, len, thick});
    }
    if (free_space_connected(c)) return c;
  }
  throw GenerationError("could not generate a context with connected free space (seed " +
                        std::to_string(seed) + ")");
}

AgentState World::state(double x, double y) const {
  return AgentState{{x, y}, params_.agent_radius};
}

bool World::is_valid(const Context& c, Vec2 p) const {
  const double r = params_.agent_radius;
  const double S = c.arena_size;
  if (p.x < r || p.x > S - r || p.y < r || p.y > S - r) return false;
  for (const Rect& w : c.walls) {
    if (point_rect_distance(p, w) < r) return false;
  }
  return true;
}

bool World::segment_free(const Context& c, Vec2 a, Vec2 b) const {
  const double r = params_.agent_radius;
  const double S = c.arena_size;
  for (Vec2 p : {a, b}) {
    if (p.x < r || p.x > S - r || p.y < r || p.y > S - r) return false;
  }
  for (const Rect& w : c.walls) {
    if (segment_rect_distance(a, b, w) < r) return false;
  }
  return true;
}

Action World::clamp(Action a) const {
  const double m = params_.max_action;
  return {std::clamp(a.dx, -m, m), std::clamp(a.dy, -m, m)};
}

AgentState World::step(const Context& c, const AgentState& s, Action a) const {
  a = clamp(a);
  const Vec2 target{s.position.x + a.dx, s.position.y + a.dy};
  if (!segment_free(c, s.position, target)) return s;
  return AgentState{target, s.radius};
}

Trajectory World::rollout_random(const Context& c, const AgentState& s0, int steps,
                                 std::uint64_t seed) const {
  Rng rng(seed);
  std::uniform_real_distribution<double> action_dist(-params_.max_action, params_.max_action);
  Trajectory traj;
  traj.context_id = c.id;
  traj.positions.push_back(s0.position);
  traj.observations.push_back(observe(c, s0));
  AgentState s = s0;
  for (int t = 0; t < steps; ++t) {
    const double dx = action_dist(rng);
    const double dy = action_dist(rng);
    const Action a{dx, dy};
    s = step(c, s, a);
    traj.actions.push_back(a);
    traj.positions.push_back(s.position);
    traj.observations.push_back(observe(c, s));
  }
  return traj;
}

AgentState World::sample_free_state(const Context& c, Rng& rng) const {
  const double r = params_.agent_radius;
  std::uniform_real_distribution<double> dist(r, c.arena_size - r);
  for (int i = 0; i < 100000; ++i) {
    const double x = dist(rng);
    const double y = dist(rng);
    if (is_valid(c, {x, y})) return state(x, y);
  }
  throw GenerationError("context " + std::to_string(c.id) + " has no free space");
}

Observation World::observe(const Context& /*c*/, const AgentState& s) const {
  return observe_position(s.position);
}

Observation World::observe_position(Vec2 p) const {
  const double S = params_.arena_size;
  Observation o;
  o.mode = params_.mode;
  if (params_.mode == ObservationMode::State) {
    o.data = {std::clamp(p.x / S, 0.0, 1.0), std::clamp(p.y / S, 0.0, 1.0)};
    return o;
  }
  const int G = params_.raster_size;
  const double cell = S / G;
  const double cell_area = cell * cell;
  o.data.assign(static_cast<std::size_t>(G * G), 0.0);
  const double r = params_.agent_radius;
  const int ix0 = std::max(0, static_cast<int>(std::floor((p.x - r) / cell)));
  const int ix1 = std::min(G - 1, static_cast<int>(std::floor((p.x + r) / cell)));
  const int iy0 = std::max(0, static_cast<int>(std::floor((p.y - r) / cell)));
  const int iy1 = std::min(G - 1, static_cast<int>(std::floor((p.y + r) / cell)));
  for (int iy = iy0; iy <= iy1; ++iy) {
    for (int ix = ix0; ix <= ix1; ++ix) {
      const double a = disc_rect_area(p, r, ix * cell, (ix + 1) * cell, iy * cell, (iy + 1) * cell);
      o.data[static_cast<std::size_t>(iy * G + ix)] = std::clamp(a / cell_area, 0.0, 1.0);
    }
  }
  return o;
}

Vec2 World::decode(const Observation& o) const { return decode(o.data); }

Vec2 World::decode(std::span<const double> data) const {
  const double S = params_.arena_size;
  if (data.size() != observation_dim()) {
    throw EvaluationError("observation has length " + std::to_string(data.size()) +
                          ", expected " + std::to_string(observation_dim()));
  }
  if (params_.mode == ObservationMode::State) {
    if (!std::isfinite(data[0]) || !std::isfinite(data[1])) {
      throw EvaluationError("non-finite state observation");
    }
    return {data[0] * S, data[1] * S};
  }
  const int G = params_.raster_size;
  const double cell = S / G;
  double mass = 0.0;
  double mx = 0.0;
  double my = 0.0;
  for (int iy = 0; iy < G; ++iy) {
    for (int ix = 0; ix < G; ++ix) {
      const double v = data[static_cast<std::size_t>(iy * G + ix)];
      if (!std::isfinite(v)) throw EvaluationError("non-finite raster observation");
      if (v <= 0.0) continue;
      mass += v;
      mx += v * (ix + 0.5) * cell;
      my += v * (iy + 0.5) * cell;
    }
  }
  if (mass <= 1e-12) throw EvaluationError("raster observation has no agent mass");
  return {mx / mass, my / mass};
}

std::vector<double> World::encode_context(const Context& c) const {
  const double S = c.arena_size;
  if (params_.mode == ObservationMode::State) {
    const int slots = params_.contexts.max_walls;
    std::vector<double> enc(static_cast<std::size_t>(5 * slots), 0.0);
    for (int k = 0; k < std::min<int>(slots, static_cast<int>(c.walls.size())); ++k) {
      const Rect& w = c.walls[static_cast<std::size_t>(k)];
      double* e = enc.data() + 5 * k;
      e[0] = 1.0;
      e[1] = w.x0() / S;
      e[2] = w.x1() / S;
      e[3] = w.y0() / S;
      e[4] = w.y1() / S;
    }
    return enc;
  }
  const int G = params_.raster_size;
  const double cell = S / G;
  std::vector<double> enc(static_cast<std::size_t>(G * G), 0.0);
  for (int iy = 0; iy < G; ++iy) {
    for (int ix = 0; ix < G; ++ix) {
      double a = 0.0;
      for (const Rect& w : c.walls) {
        a += box_overlap_area(ix * cell, (ix + 1) * cell, iy * cell, (iy + 1) * cell, w.x0(),
                              w.x1(), w.y0(), w.y1());
      }
      enc[static_cast<std::size_t>(iy * G + ix)] = std::min(1.0, a / (cell * cell));
    }
  }
  return enc;
}

std::size_t World::observation_dim() const {
  return params_.mode == ObservationMode::State
             ? 2
             : static_cast<std::size_t>(params_.raster_size * params_.raster_size);
}

std::size_t World::context_dim() const {
  return params_.mode == ObservationMode::State
             ? static_cast<std::size_t>(5 * params_.contexts.max_walls)
             : static_cast<std::size_t>(params_.raster_size * params_.raster_size);
}

bool World::oracle_reachable(const Context& c, const Observation& a, const Observation& b,
                             int horizon) const {
  return oracle_reachable(c, decode(a), decode(b), horizon);
}

bool World::oracle_reachable(const Context& c, Vec2 a, Vec2 b, int horizon) const {
  if (horizon < 0) throw EvaluationError("oracle horizon must be nonnegative");
  // Actions are box-bounded, so h steps along the straight line cover an
  // L-infinity displacement of h * a_max.
  const double reach = horizon * params_.max_action;
  const Vec2 d = b - a;
  return std::max(std::abs(d.x), std::abs(d.y)) <= reach + 1e-12 && segment_free(c, a, b);
}

Task World::make_task(const Context& c, std::uint64_t seed, TaskDifficulty difficulty,
                      double tau, int id) const {
  if (difficulty == TaskDifficulty::CrossWall && c.walls.empty()) {
    throw GenerationError("cross-wall task requested for a context without walls");
  }
  Rng rng(derive_seed(seed, seed_stream::kTask));
  const double clearance = params_.agent_radius + tau;
  for (int attempt = 0; attempt < 5000; ++attempt) {
    const AgentState start = sample_free_state(c, rng);
    const AgentState goal = sample_free_state(c, rng);
    const double d = distance(start.position, goal.position);
    if (d <= tau) continue;
    if (difficulty == TaskDifficulty::CrossWall) {
      if (segment_free(c, start.position, goal.position)) continue;
      bool clear = true;
      for (const Rect& w : c.walls) {
        clear = clear && point_rect_distance(start.position, w) >= clearance &&
                point_rect_distance(goal.position, w) >= clearance;
      }
      if (!clear) continue;
    }
    Task t;
    t.id = id;
    t.context = c;
    t.start = start;
    t.goal = goal;
    t.o_start = observe(c, start);
    t.o_goal = observe(c, goal);
    t.tau = tau;
    t.difficulty = difficulty;
    return t;
  }
  throw GenerationError("could not generate a " + to_string(difficulty) + " task in context " +
                        std::to_string(c.id));
}

bool World::free_space_connected(const Context& c, double resolution) const {
  const double r = params_.agent_radius;
  const double span = c.arena_size - 2.0 * r;
  const int n = static_cast<int>(std::floor(span / resolution)) + 1;
  const auto at = [&](int i, int j) { return Vec2{r + i * resolution, r + j * resolution}; };
  std::vector<char> valid(static_cast<std::size_t>(n * n), 0);
  int total = 0;
  int first = -1;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (is_valid(c, at(i, j))) {
        valid[static_cast<std::size_t>(j * n + i)] = 1;
        ++total;
        if (first < 0) first = j * n + i;
      }
    }
  }
  if (total == 0) return false;
  std::vector<char> seen(valid.size(), 0);
  std::queue<int> queue;
  queue.push(first);
  seen[static_cast<std::size_t>(first)] = 1;
  int reached = 0;
  while (!queue.empty()) {
    const int k = queue.front();
    queue.pop();
    ++reached;
    const int i = k % n;
    const int j = k / n;
    const int di[4] = {1, -1, 0, 0};
    const int dj[4] = {0, 0, 1, -1};
    for (int e = 0; e < 4; ++e) {
      const int ni = i + di[e];
      const int nj = j + dj[e];
      if (ni < 0 || nj < 0 || ni >= n || nj >= n) continue;
      const int nk = nj * n + ni;
      if (!valid[static_cast<std::size_t>(nk)] || seen[static_cast<std::size_t>(nk)]) continue;
      if (!segment_free(c, at(i, j), at(ni, nj))) continue;
      seen[static_cast<std::size_t>(nk)] = 1;
      queue.push(nk);
    }
  }
  return reached == total;
}

namespace {

std::uint64_t trajectory_key(int context_id, int j) {
  return static_cast<std::uint64_t>(context_id) * 1000003ULL + static_cast<std::uint64_t>(j);
}

}  // namespace

TransitionDataset collect_dataset(const World& world, const DataSpec& spec) {
  if (spec.num_contexts < 0 || spec.trajectories_per_context < 0 || spec.horizon < 0) {
    throw ConfigError("data counts must be nonnegative", "data");
  }
  TransitionDataset data;
  data.world = world.params();
  data.spec = spec;
  for (int k = 0; k < spec.num_contexts; ++k) {
    const int id = spec.first_context_id + k;
    const Context c =
        world.generate_context(derive_seed(spec.seed, seed_stream::kContext, static_cast<std::uint64_t>(id)), id);
    data.contexts.push_back(c);
    for (int j = 0; j < spec.trajectories_per_context; ++j) {
      Rng init_rng(derive_seed(spec.seed, seed_stream::kInitialState, trajectory_key(id, j)));
      const AgentState s0 = world.sample_free_state(c, init_rng);
      Trajectory t = world.rollout_random(
          c, s0, spec.horizon, derive_seed(spec.seed, seed_stream::kTrajectory, trajectory_key(id, j)));
      t.trajectory_id = j;
      data.trajectories.push_back(std::move(t));
    }
  }
  return data;
}

std::vector<Context> heldout_contexts(const World& world, const DataSpec& spec, int count) {
  std::vector<Context> out;
  for (int k = 0; k < count; ++k) {
    const int id = spec.first_context_id + spec.num_contexts + k;
    out.push_back(world.generate_context(
        derive_seed(spec.seed, seed_stream::kContext, static_cast<std::uint64_t>(id)), id));
  }
  return out;
}

std::size_t audit_replay(const World& world, const TransitionDataset& data, double fraction,
                         std::uint64_t seed) {
  const std::size_t total = data.transition_count();
  if (total == 0) return 0;
  const auto samples = static_cast<std::size_t>(
      std::max(1.0, std::ceil(fraction * static_cast<double>(total))));
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> traj_dist(0, data.trajectories.size() - 1);
  std::size_t bad = 0;
  std::size_t drawn = 0;
  while (drawn < samples) {
    const Trajectory& t = data.trajectories[traj_dist(rng)];
    if (t.length() == 0) continue;
    ++drawn;
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, t.length() - 1)(rng);
    const Context& c = data.context(t.context_id);
    const AgentState next = world.step(c, world.state(t.positions[i].x, t.positions[i].y), t.actions[i]);
    if (!(next.position == t.positions[i + 1]) || !(world.observe(c, next) == t.observations[i + 1])) {
      ++bad;
    }
  }
  return bad;
}

}  // namespace htm
