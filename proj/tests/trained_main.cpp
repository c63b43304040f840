// Checks on models trained with the default configuration. Training runs once
// and is shared by every test case.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <iostream>

#include "doctest.h"
#include "htm/pipeline.hpp"

using namespace htm;

namespace {

struct Fixture {
  RunConfig config;
  World world;
  TransitionDataset data;
  TrainedModels models;

  Fixture() : config(config_from_json(Json::object())), world(config.world) {
    data = collect_dataset(world, config.data);
    models = train_all(config, world, data);
  }
};

const Fixture& fx() {
  static const Fixture f;
  return f;
}

std::vector<const Trajectory*> validation_trajectories(const TransitionDataset& d) {
  std::vector<const Trajectory*> out;
  for (const Trajectory& t : d.trajectories) {
    if (is_validation_trajectory(t.trajectory_id, d.spec.trajectories_per_context)) out.push_back(&t);
  }
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("CPC beats the uniform classifier and separates 1-step pairs") {
  const Fixture& f = fx();
  const CpcTrainResult& cpc = f.models.cpc;
  const int N = f.config.cpc.candidates;
  MESSAGE("cpc best validation " << cpc.curve.best_validation << " vs ln N " << std::log(N));
  CHECK(cpc.curve.best_validation < std::log(static_cast<double>(N)));

  const CpcScorer scorer(cpc.model);
  Rng rng(11);
  double one_step = 0.0, random = 0.0;
  int count = 0;
  for (const Trajectory* t : validation_trajectories(f.data)) {
    const std::vector<double> ctx = f.world.encode_context(f.data.context(t->context_id));
    const auto refs = f.data.trajectories_for(t->context_id);
    std::uniform_int_distribution<std::size_t> pick_traj(0, refs.size() - 1);
    for (std::size_t k = 0; k < t->length(); ++k) {
      one_step += scorer.logit(t->observations[k].data, t->observations[k + 1].data, ctx);
      const Trajectory& other = *refs[pick_traj(rng)];
      std::uniform_int_distribution<std::size_t> pick_t(0, other.length());
      random += scorer.logit(t->observations[k].data, other.observations[pick_t(rng)].data, ctx);
      ++count;
    }
  }
  const double gap = (one_step - random) / count;
  MESSAGE("1-step minus random mean logit " << gap);
  CHECK(gap >= 1.0);

  const Trajectory& t = f.data.trajectories.front();
  const std::vector<double> ctx = f.world.encode_context(f.data.context(t.context_id));
  bool asymmetric = false;
  for (std::size_t k = 0; k + 3 < t.observations.size() && !asymmetric; ++k) {
    const auto& a = t.observations[k].data;
    const auto& b = t.observations[k + 3].data;
    asymmetric = scorer.logit(a, b, ctx) != scorer.logit(b, a, ctx);
  }
  CHECK(asymmetric);
}

TEST_CASE("MI lower bound is positive and grows over training") {
  const CpcTrainResult& cpc = fx().models.cpc;
  const int N = fx().config.cpc.candidates;
  const auto& v = cpc.curve.validation_loss;
  REQUIRE(v.size() >= 2);
  const double first = mi_lower_bound(std::max(0.0, cpc.curve.initial_validation), N);
  const double best = mi_lower_bound(cpc.curve.best_validation, N);
  MESSAGE("MI bound initial " << first << " best " << best);
  CHECK(best > 0.0);
  CHECK(mi_lower_bound(v.back(), N) > first);
}

TEST_CASE("SPTM classifier beats chance and accepts 1-step pairs") {
  const Fixture& f = fx();
  const SptmTrainResult& sptm = f.models.sptm;
  MESSAGE("sptm best validation " << sptm.curve.best_validation);
  CHECK(sptm.curve.best_validation < std::log(2.0));
  int accepted = 0, total = 0;
  for (const Trajectory* t : validation_trajectories(f.data)) {
    const std::vector<double> ctx = f.world.encode_context(f.data.context(t->context_id));
    for (std::size_t k = 0; k < t->length(); ++k) {
      accepted += sigmoid(sptm_logit(sptm.model, t->observations[k].data, t->observations[k + 1].data, ctx)) > 0.5;
      ++total;
    }
  }
  MESSAGE("1-step acceptance " << accepted << "/" << total);
  CHECK(accepted >= 0.8 * total);
}

TEST_CASE("CVAE training reduces the validation ELBO by at least 30%") {
  const TrainingCurve& c = fx().models.cvae.curve;
  MESSAGE("cvae validation " << c.initial_validation << " -> " << c.best_validation);
  CHECK(c.best_validation <= 0.7 * c.initial_validation);
}

TEST_CASE("beta = 0 reconstructs no worse than beta > 0") {
  const Fixture& f = fx();
  CvaeConfig base = f.config.cvae;
  base.epochs = 20;
  CvaeConfig ae = base;
  ae.beta = 0.0;
  CvaeConfig vae = base;
  vae.beta = 1.0;
  const CvaeModel m0 = train_cvae(f.world, f.data, ae).model;
  const CvaeModel m1 = train_cvae(f.world, f.data, vae).model;

  const auto val = validation_trajectories(f.data);
  Matrix obs(static_cast<Eigen::Index>(val.size() * 21), 2);
  Matrix ctx(obs.rows(), static_cast<Eigen::Index>(f.world.context_dim()));
  Eigen::Index r = 0;
  for (const Trajectory* t : val) {
    const std::vector<double> c = f.world.encode_context(f.data.context(t->context_id));
    for (const Observation& o : t->observations) {
      if (r == obs.rows()) break;
      obs.row(r) = row_vector(o.data);
      ctx.row(r) = row_vector(c);
      ++r;
    }
  }
  obs.conservativeResize(r, 2);
  ctx.conservativeResize(r, ctx.cols());
  const double rec0 = cvae_elbo(m0, obs, ctx, std::uint64_t{5}).reconstruction;
  const double rec1 = cvae_elbo(m1, obs, ctx, std::uint64_t{5}).reconstruction;
  MESSAGE("reconstruction beta=0 " << rec0 << " beta=1 " << rec1);
  CHECK(rec0 <= rec1);
}

TEST_CASE("hallucinations cover both sides of the wall on held-out contexts") {
  const Fixture& f = fx();
  int ok = 0;
  const auto held = heldout_contexts(f.world, f.config.data, 10);
  for (const Context& c : held) {
    const HallucinationSet s = hallucinate(f.models.cvae.model, f.world.encode_context(c), 300, 7);
    const Rect& wall = c.walls.front();
    int left = 0, right = 0;
    for (const Observation& o : s.samples) {
      const Vec2 p = f.world.decode(o);
      left += p.x < wall.cx;
      right += p.x > wall.cx;
    }
    ok += left >= 30 && right >= 30;
  }
  CHECK(ok == static_cast<int>(held.size()));
}

TEST_CASE("inverse model beats the mean-action baseline and passes directional probes") {
  const Fixture& f = fx();
  const InverseTrainResult& inv = f.models.inverse;
  MESSAGE("inverse validation " << inv.validation_error << " baseline " << inv.baseline_error);
  CHECK(inv.validation_error < 0.5 * inv.baseline_error);

  const double a_max = f.world.params().max_action;
  const Context c = heldout_contexts(f.world, f.config.data, 1).front();
  const std::vector<double> ctx = f.world.encode_context(c);
  Rng rng(3);
  int still = 0, rightward = 0, probes = 0;
  while (probes < 200) {
    const AgentState s = f.world.sample_free_state(c, rng);
    const Vec2 target = s.position + Vec2{a_max, 0.0};
    if (!f.world.segment_free(c, s.position, target)) continue;
    // Blocked moves near walls also leave the observation unchanged, so the
    // zero-displacement probe only uses states whose every move is free.
    bool open = true;
    for (double dx : {-a_max, a_max}) {
      for (double dy : {-a_max, a_max}) open = open && f.world.segment_free(c, s.position, s.position + Vec2{dx, dy});
    }
    if (!open) continue;
    const Observation o = f.world.observe(c, s);
    const Action zero = infer_action(inv.model, o.data, o.data, ctx);
    still += std::hypot(zero.dx, zero.dy) < 0.2 * a_max;
    const Action right = infer_action(inv.model, o.data, f.world.observe_position(target).data, ctx);
    rightward += right.dx > 0.0;
    ++probes;
  }
  MESSAGE("zero-displacement probes " << still << "/" << probes << ", rightward " << rightward << "/" << probes);
  CHECK(still == probes);
  CHECK(rightward >= 0.9 * probes);
}

TEST_CASE("free-space tasks succeed with the inverse model alone") {
  const Fixture& f = fx();
  const auto held = heldout_contexts(f.world, f.config.data, 20);
  ExecutionConfig cfg = f.config.execution;
  cfg.use_planner = false;
  int successes = 0, tasks = 0;
  for (std::uint64_t seed = 0; tasks < 20; ++seed) {
    const Context& c = held[seed % held.size()];
    const Task t = f.world.make_task(c, seed, TaskDifficulty::Any, cfg.tau);
    if (!f.world.segment_free(c, t.start.position, t.goal.position)) continue;
    if (distance(t.start.position, t.goal.position) <= t.tau) continue;
    const ExecutionResult r = execute(f.world, t, Models{nullptr, nullptr, &f.models.inverse.model}, cfg, seed);
    successes += r.success;
    ++tasks;
  }
  MESSAGE("free-space successes " << successes << "/" << tasks);
  CHECK(successes >= 19);
}
