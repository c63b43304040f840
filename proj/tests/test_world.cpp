#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "htm/errors.hpp"
#include "htm/world.hpp"

using namespace htm;

namespace {

Context one_wall() {
  Context c;
  c.arena_size = 2.8;
  c.walls.push_back(Rect{1.4, 1.4, 0.1, 0.8});
  return c;
}

// Swept-disc oracle: samples the straight path densely and checks every point.
bool swept_free(const World& w, const Context& c, Vec2 a, Vec2 b) {
  for (int k = 0; k <= 2000; ++k) {
    const double t = k / 2000.0;
    if (!w.is_valid(c, a + t * (b - a))) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("world") {

TEST_CASE("seed 0 with one vertical wall yields one wall inside the arena") {
  const World w;
  const Context c = w.generate_context(0);
  REQUIRE(c.walls.size() == 1);
  const Rect& r = c.walls[0];
  CHECK(r.half_h > r.half_w);
  CHECK(r.x0() >= 0.0);
  CHECK(r.x1() <= c.arena_size);
  CHECK(r.y0() >= 0.0);
  CHECK(r.y1() <= c.arena_size);
}

TEST_CASE("contexts are deterministic in the seed") {
  const World w;
  CHECK(w.generate_context(7, 3) == w.generate_context(7, 3));
  CHECK_FALSE(w.generate_context(7, 3) == w.generate_context(8, 3));
}

TEST_CASE("1000 seeds all give connected free space") {
  const World w;
  int connected = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const Context c = w.generate_context(s);
    if (w.free_space_connected(c, 0.05)) ++connected;
  }
  CHECK(connected == 1000);
}

TEST_CASE("a disconnecting wall is detected by the flood fill") {
  const World w;
  Context c;
  c.walls.push_back(Rect{1.4, 1.4, 0.1, 1.4});
  CHECK_FALSE(w.free_space_connected(c));
  CHECK(w.free_space_connected(one_wall()));
}

TEST_CASE("step: identity, clamping and wall rejection") {
  WorldParams p;
  p.max_action = 0.05;
  const World w(p);
  const Context c = one_wall();
  const AgentState s = w.state(0.5, 0.5);
  CHECK(w.step(c, s, {0.0, 0.0}) == s);
  const AgentState moved = w.step(c, s, {0.2, 0.0});
  CHECK(moved.position.x == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(moved.position.y == 0.5);

  // Agent touching the wall's left face from outside.
  const AgentState near = w.state(1.3 - 0.15 - 0.01, 1.4);
  REQUIRE(w.is_valid(c, near.position));
  CHECK(w.step(c, near, {0.05, 0.0}) == near);
  CHECK_FALSE(w.step(c, near, {-0.05, 0.0}) == near);
}

TEST_CASE("step agrees with the swept-disc oracle on random moves") {
  const World w;
  const Context c = w.generate_context(11);
  Rng rng(5);
  std::uniform_real_distribution<double> a(-0.1, 0.1);
  int disagreements = 0;
  for (int i = 0; i < 500; ++i) {
    const AgentState s = w.sample_free_state(c, rng);
    const Action act{a(rng), a(rng)};
    const Vec2 target = s.position + Vec2{act.dx, act.dy};
    const bool expected_move = swept_free(w, c, s.position, target);
    const bool moved = !(w.step(c, s, act) == s);
    if (expected_move != moved) ++disagreements;
  }
  CHECK(disagreements == 0);
}

TEST_CASE("rollout: T = 0 and replay consistency") {
  const World w;
  const Context c = w.generate_context(2);
  const Trajectory empty = w.rollout_random(c, w.state(0.3, 0.3), 0, 1);
  CHECK(empty.observations.size() == 1);
  CHECK(empty.actions.empty());

  const Trajectory t = w.rollout_random(c, w.state(0.3, 0.3), 50, 9);
  AgentState s = w.state(0.3, 0.3);
  for (std::size_t i = 0; i < t.length(); ++i) {
    s = w.step(c, s, t.actions[i]);
    CHECK(w.observe(c, s) == t.observations[i + 1]);
  }
}

TEST_CASE("random exploration covers at least 90% of free cells") {
  const World w;
  const Context c = w.generate_context(3);
  const double cell = 0.2;
  const int n = static_cast<int>(std::round(c.arena_size / cell));
  std::set<int> visited;
  Rng rng(17);
  for (int k = 0; k < 10000; ++k) {
    const AgentState s0 = w.sample_free_state(c, rng);
    const Trajectory t = w.rollout_random(c, s0, 20, rng());
    for (const Vec2& p : t.positions) {
      visited.insert(static_cast<int>(p.y / cell) * n + static_cast<int>(p.x / cell));
    }
  }
  int free_cells = 0;
  int covered = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (!w.is_valid(c, {(i + 0.5) * cell, (j + 0.5) * cell})) continue;
      ++free_cells;
      if (visited.count(j * n + i)) ++covered;
    }
  }
  CHECK(covered >= 0.9 * free_cells);
}

TEST_CASE("collect_dataset: counts, determinism and replay audit") {
  const World w;
  DataSpec spec;
  CHECK(spec.num_contexts * spec.trajectories_per_context * spec.horizon == 16000);
  spec.num_contexts = 5;
  spec.trajectories_per_context = 4;
  spec.horizon = 20;
  spec.seed = 3;
  const TransitionDataset a = collect_dataset(w, spec);
  CHECK(a.transition_count() == 5u * 4u * 20u);
  const TransitionDataset b = collect_dataset(w, spec);
  REQUIRE(a.trajectories.size() == b.trajectories.size());
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    CHECK(a.trajectories[i].observations == b.trajectories[i].observations);
    CHECK(a.trajectories[i].actions == b.trajectories[i].actions);
  }
  CHECK(audit_replay(w, a, 1.0, 1) == 0);
  CHECK(audit_replay(w, a, 0.01, 2) == 0);

  TransitionDataset corrupt = a;
  corrupt.trajectories[0].positions[5].x += 0.01;
  corrupt.trajectories[0].positions[6].x += 0.01;
  CHECK(audit_replay(w, corrupt, 50.0, 3) > 0);
}

TEST_CASE("held-out contexts never appear in the dataset") {
  const World w;
  DataSpec spec;
  spec.num_contexts = 6;
  spec.trajectories_per_context = 1;
  const TransitionDataset d = collect_dataset(w, spec);
  for (const Context& h : heldout_contexts(w, spec, 4)) {
    for (const Context& c : d.contexts) {
      CHECK(h.id != c.id);
      CHECK_FALSE(h.walls == c.walls);
    }
  }
}

TEST_CASE("state observations are normalized positions") {
  const World w;
  const Observation o = w.observe(one_wall(), w.state(1.4, 1.4));
  CHECK(o.data == std::vector<double>{0.5, 0.5});
  const Vec2 p = w.decode(w.observe_position({0.37, 2.11}));
  CHECK(p.x == doctest::Approx(0.37).epsilon(1e-14));
  CHECK(p.y == doctest::Approx(2.11).epsilon(1e-14));
}

TEST_CASE("raster observations: exactly the cells overlapped by the disc are positive") {
  WorldParams params;
  params.mode = ObservationMode::Raster;
  const World w(params);
  const double cell = params.arena_size / params.raster_size;
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.15, 2.65);
  for (int k = 0; k < 50; ++k) {
    const Vec2 p{u(rng), u(rng)};
    const Observation o = w.observe_position(p);
    double mass = 0.0;
    for (int iy = 0; iy < params.raster_size; ++iy) {
      for (int ix = 0; ix < params.raster_size; ++ix) {
        const Rect r{(ix + 0.5) * cell, (iy + 0.5) * cell, cell / 2, cell / 2};
        const double v = o.data[static_cast<std::size_t>(iy * params.raster_size + ix)];
        mass += v;
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        // Cells at tangency have zero-area overlap; skip the boundary band.
        const double d = point_rect_distance(p, r);
        if (d < params.agent_radius - 1e-6) CHECK(v > 0.0);
        if (d > params.agent_radius + 1e-9) CHECK(v == 0.0);
      }
    }
    const double disc = M_PI * params.agent_radius * params.agent_radius / (cell * cell);
    CHECK(mass == doctest::Approx(disc).epsilon(1e-9));
    const Vec2 back = w.decode(o);
    CHECK(distance(back, p) < cell / 2);
  }
  const Observation a = w.observe_position({0.5, 0.5});
  const Observation b = w.observe_position({0.5 + 2.0 * cell + 0.01, 0.5});
  CHECK_FALSE(a == b);
}

TEST_CASE("oracle reachability") {
  const World w;
  const Context c = one_wall();
  const Observation a = w.observe_position({0.6, 1.4});
  CHECK(w.oracle_reachable(c, a, a, 0));
  const Observation b = w.observe_position({2.2, 1.4});
  CHECK_FALSE(w.oracle_reachable(c, a, b, 100));

  // Oracle true implies a greedy straight-line controller arrives within h steps.
  Rng rng(4);
  std::uniform_real_distribution<double> jitter(-0.6, 0.6);
  int checked = 0;
  for (int k = 0; k < 400; ++k) {
    const AgentState s = w.sample_free_state(c, rng);
    const Vec2 g = s.position + Vec2{jitter(rng), jitter(rng)};
    if (!w.is_valid(c, g) || !w.oracle_reachable(c, s.position, g, 5)) continue;
    ++checked;
    AgentState cur = s;
    for (int t = 0; t < 5; ++t) {
      // Scale the whole displacement so the heading is kept.
      const Vec2 d = g - cur.position;
      const double m = std::max({std::abs(d.x), std::abs(d.y), 0.1});
      cur = w.step(c, cur, {0.1 * d.x / m, 0.1 * d.y / m});
    }
    CHECK(distance(cur.position, g) < 1e-9);
  }
  CHECK(checked > 50);
}

TEST_CASE("tasks: determinism and cross-wall property") {
  const World w;
  const Context c = w.generate_context(21, 1);
  const Task any1 = w.make_task(c, 5, TaskDifficulty::Any);
  const Task any2 = w.make_task(c, 5, TaskDifficulty::Any);
  CHECK(any1.start == any2.start);
  CHECK(any1.goal == any2.goal);

  DataSpec spec;
  for (const Context& h : heldout_contexts(w, spec, 5)) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const Task t = w.make_task(h, s, TaskDifficulty::CrossWall);
      CHECK_FALSE(w.oracle_reachable(h, t.start.position, t.goal.position, 5));
      CHECK_FALSE(w.segment_free(h, t.start.position, t.goal.position));
      CHECK(distance(t.start.position, t.goal.position) > t.tau);
    }
  }
}

TEST_CASE("invalid world parameters name the key") {
  WorldParams p;
  p.max_action = -1.0;
  try {
    World w(p);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "world.a_max");
  }
}

}
