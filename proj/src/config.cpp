#include "htm/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "htm/errors.hpp"

namespace htm {

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported by their dotted path.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where() + ": expected an object", path_);
  }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    const auto it = j_->find(key);
    if (it == j_->end()) return;
    try {
      out = it->template get<T>();
    } catch (const Json::exception&) {
      throw ConfigError(key_path(key) + ": wrong type", key_path(key));
    }
  }

  template <class E, class Parse, class Print>
  void get_enum(const char* key, E& out, Parse parse, Print print) {
    std::string s = print(out);
    get(key, s);
    try {
      out = parse(s);
    } catch (const std::exception&) {
      throw ConfigError(key_path(key) + ": unknown value '" + s + "'", key_path(key));
    }
  }

  void get_range(const char* key, double& lo, double& hi) {
    std::vector<double> v{lo, hi};
    get(key, v);
    if (v.size() != 2) throw ConfigError(key_path(key) + ": expected [min, max]", key_path(key));
    lo = v[0];
    hi = v[1];
  }

  Section sub(const char* key) {
    used_.insert(key);
    const auto it = j_->find(key);
    return Section(it == j_->end() ? empty() : *it, key_path(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_->items()) {
      if (!used_.count(k)) throw ConfigError(key_path(k) + ": unknown key", key_path(k));
    }
  }

 private:
  static const Json& empty() {
    static const Json e = Json::object();
    return e;
  }
  std::string where() const { return path_.empty() ? "config" : path_; }
  std::string key_path(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const Json* j_;
  std::string path_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& key, const std::string& why) {
  if (!ok) throw ConfigError(key + ": " + why, key);
}

}  // namespace

RunConfig config_from_json(const Json& j) {
  RunConfig c;
  Section root(j, "");
  std::uint64_t seed = 0;
  root.get("seed", seed);
  apply_seed(c, seed);

  {
    Section w = root.sub("world");
    WorldParams& p = c.world;
    w.get_enum("mode", p.mode, parse_observation_mode, [](ObservationMode m) { return to_string(m); });
    w.get("arena_size", p.arena_size);
    w.get("agent_radius", p.agent_radius);
    w.get("a_max", p.max_action);
    w.get("raster_size", p.raster_size);
    Section walls = w.sub("walls");
    walls.get("min_walls", p.contexts.min_walls);
    walls.get("max_walls", p.contexts.max_walls);
    walls.get_enum("orientation", p.contexts.orientation, parse_wall_orientation,
                   [](WallOrientation o) { return to_string(o); });
    walls.get_range("half_thickness", p.contexts.half_thickness_min, p.contexts.half_thickness_max);
    walls.get_range("half_length", p.contexts.half_length_min, p.contexts.half_length_max);
    walls.get("cross_margin", p.contexts.cross_margin);
    walls.finish();
    w.finish();
  }
  {
    Section d = root.sub("data");
    d.get("contexts", c.data.num_contexts);
    d.get("trajectories", c.data.trajectories_per_context);
    d.get("T", c.data.horizon);
    d.finish();
  }
  const auto activation = [](Section& s, Activation& a) {
    s.get_enum("activation", a, parse_activation, [](Activation x) { return to_string(x); });
  };
  {
    Section s = root.sub("cvae");
    s.get("latent_dim", c.cvae.latent_dim);
    s.get("hidden", c.cvae.hidden);
    s.get("depth", c.cvae.depth);
    s.get("beta", c.cvae.beta);
    activation(s, c.cvae.activation);
    s.get("lr", c.cvae.adam.learning_rate);
    s.get("epochs", c.cvae.epochs);
    s.get("batch_size", c.cvae.batch_size);
    s.finish();
  }
  {
    Section s = root.sub("cpc");
    s.get("embed_dim", c.cpc.embed_dim);
    s.get("hidden", c.cpc.hidden);
    s.get("depth", c.cpc.depth);
    activation(s, c.cpc.activation);
    s.get("h", c.cpc.horizon);
    s.get("N", c.cpc.candidates);
    s.get("phi", c.cpc.halluc_fraction);
    s.get("neighbors", c.cpc.halluc_neighbors);
    s.get("pool", c.halluc_pool);
    s.get("batch_size", c.cpc.batch_size);
    s.get("epochs", c.cpc.epochs);
    s.get("steps_per_epoch", c.cpc.steps_per_epoch);
    s.get("validation_batches", c.cpc.validation_batches);
    s.get("lr", c.cpc.adam.learning_rate);
    s.finish();
  }
  {
    Section s = root.sub("sptm");
    s.get("embed_dim", c.sptm.embed_dim);
    s.get("hidden", c.sptm.hidden);
    s.get("depth", c.sptm.depth);
    s.get("head_hidden", c.sptm.head_hidden);
    activation(s, c.sptm.activation);
    s.get("h", c.sptm.horizon);
    s.get("l", c.sptm.negative_threshold);
    s.get("batch_size", c.sptm.batch_size);
    s.get("epochs", c.sptm.epochs);
    s.get("steps_per_epoch", c.sptm.steps_per_epoch);
    s.get("validation_batches", c.sptm.validation_batches);
    s.get("lr", c.sptm.adam.learning_rate);
    s.finish();
  }
  {
    Section s = root.sub("inverse");
    s.get("hidden", c.inverse.hidden);
    s.get("depth", c.inverse.depth);
    activation(s, c.inverse.activation);
    s.get("lr", c.inverse.adam.learning_rate);
    s.get("epochs", c.inverse.epochs);
    s.get("batch_size", c.inverse.batch_size);
    s.finish();
  }
  {
    Section s = root.sub("planning");
    PlanningConfig& p = c.execution.planning;
    s.get("M", p.samples);
    s.get_enum("scheme", p.scheme.kind, parse_weight_kind, [](WeightKind k) { return to_string(k); });
    s.get("s_shortcut", p.scheme.s_shortcut);
    s.finish();
  }
  {
    Section s = root.sub("execution");
    ExecutionConfig& e = c.execution;
    s.get("n", e.max_steps);
    s.get("r", e.replan_interval);
    s.get("tau", e.tau);
    s.get("eps_wp", e.waypoint_radius);
    s.get("h", e.waypoint_horizon);
    s.get("lookahead", e.lookahead);
    s.finish();
  }
  {
    Section s = root.sub("eval");
    s.get("heldout_contexts", c.eval.heldout_contexts);
    s.get("ablation_tasks", c.eval.ablation_tasks);
    s.get("ablation_seeds", c.eval.ablation_seeds);
    s.get("feasibility_h", c.eval.feasibility_horizon);
    s.get("fidelity_samples", c.eval.fidelity_samples);
    s.finish();
  }
  {
    Section s = root.sub("paths");
    s.get("data", c.paths.data);
    s.get("checkpoints", c.paths.checkpoints);
    s.get("out", c.paths.out);
    s.finish();
  }
  root.finish();
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config", path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what(), "");
  }
  return config_from_json(j);
}

void apply_seed(RunConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.data.seed = seed;
  c.cvae.seed = derive_seed(seed, seed_stream::kTraining, 1);
  c.cpc.seed = derive_seed(seed, seed_stream::kTraining, 2);
  c.sptm.seed = derive_seed(seed, seed_stream::kTraining, 3);
  c.inverse.seed = derive_seed(seed, seed_stream::kTraining, 4);
}

void validate(const RunConfig& c) {
  World::validate(c.world);
  require(c.data.num_contexts >= 1, "data.contexts", "must be at least 1");
  require(c.data.trajectories_per_context >= 1, "data.trajectories", "must be at least 1");
  require(c.data.horizon >= 1, "data.T", "must be at least 1");

  require(c.cvae.latent_dim >= 1, "cvae.latent_dim", "must be at least 1");
  require(c.cvae.hidden >= 1, "cvae.hidden", "must be at least 1");
  require(c.cvae.depth >= 1, "cvae.depth", "must be at least 1");
  require(c.cvae.beta >= 0.0, "cvae.beta", "must be nonnegative");
  require(c.cvae.adam.learning_rate > 0.0, "cvae.lr", "must be positive");
  require(c.cvae.epochs >= 1, "cvae.epochs", "must be at least 1");
  require(c.cvae.batch_size >= 1, "cvae.batch_size", "must be at least 1");

  require(c.cpc.embed_dim >= 1, "cpc.embed_dim", "must be at least 1");
  require(c.cpc.hidden >= 1, "cpc.hidden", "must be at least 1");
  require(c.cpc.depth >= 1, "cpc.depth", "must be at least 1");
  require(c.cpc.horizon >= 1, "cpc.h", "must be at least 1");
  require(c.cpc.horizon <= c.data.horizon, "cpc.h", "must not exceed data.T");
  require(c.cpc.candidates >= 2, "cpc.N", "must be at least 2");
  require(c.cpc.halluc_fraction >= 0.0 && c.cpc.halluc_fraction <= 1.0, "cpc.phi", "must lie in [0, 1]");
  require(c.cpc.halluc_neighbors >= 0, "cpc.neighbors", "must be nonnegative");
  require(c.halluc_pool >= 0, "cpc.pool", "must be nonnegative");
  require(c.cpc.batch_size >= 1, "cpc.batch_size", "must be at least 1");
  require(c.cpc.epochs >= 1, "cpc.epochs", "must be at least 1");
  require(c.cpc.steps_per_epoch >= 1, "cpc.steps_per_epoch", "must be at least 1");
  require(c.cpc.validation_batches >= 1, "cpc.validation_batches", "must be at least 1");
  require(c.cpc.adam.learning_rate > 0.0, "cpc.lr", "must be positive");

  require(c.sptm.embed_dim >= 1, "sptm.embed_dim", "must be at least 1");
  require(c.sptm.hidden >= 1, "sptm.hidden", "must be at least 1");
  require(c.sptm.depth >= 1, "sptm.depth", "must be at least 1");
  require(c.sptm.head_hidden >= 1, "sptm.head_hidden", "must be at least 1");
  require(c.sptm.horizon >= 1, "sptm.h", "must be at least 1");
  require(c.sptm.negative_threshold > c.sptm.horizon, "sptm.l", "must exceed sptm.h");
  require(c.sptm.batch_size >= 2, "sptm.batch_size", "must be at least 2");
  require(c.sptm.epochs >= 1, "sptm.epochs", "must be at least 1");
  require(c.sptm.steps_per_epoch >= 1, "sptm.steps_per_epoch", "must be at least 1");
  require(c.sptm.validation_batches >= 1, "sptm.validation_batches", "must be at least 1");
  require(c.sptm.adam.learning_rate > 0.0, "sptm.lr", "must be positive");

  require(c.inverse.hidden >= 1, "inverse.hidden", "must be at least 1");
  require(c.inverse.depth >= 1, "inverse.depth", "must be at least 1");
  require(c.inverse.adam.learning_rate > 0.0, "inverse.lr", "must be positive");
  require(c.inverse.epochs >= 1, "inverse.epochs", "must be at least 1");
  require(c.inverse.batch_size >= 1, "inverse.batch_size", "must be at least 1");

  const PlanningConfig& p = c.execution.planning;
  require(p.samples >= 0, "planning.M", "must be nonnegative");
  require(p.scheme.s_shortcut > 0.0 && p.scheme.s_shortcut < 1.0, "planning.s_shortcut", "must lie in (0, 1)");

  const ExecutionConfig& e = c.execution;
  require(e.max_steps >= 0, "execution.n", "must be nonnegative");
  require(e.replan_interval >= 1, "execution.r", "must be at least 1");
  require(e.tau > 0.0, "execution.tau", "must be positive");
  require(e.waypoint_radius >= 0.0, "execution.eps_wp", "must be nonnegative");
  require(e.waypoint_horizon >= 1, "execution.h", "must be at least 1");
  require(e.lookahead >= 0.0, "execution.lookahead", "must be nonnegative");

  require(c.eval.heldout_contexts >= 1, "eval.heldout_contexts", "must be at least 1");
  require(c.eval.ablation_tasks >= 1, "eval.ablation_tasks", "must be at least 1");
  require(c.eval.ablation_tasks <= c.eval.heldout_contexts, "eval.ablation_tasks",
          "must not exceed eval.heldout_contexts");
  require(!c.eval.ablation_seeds.empty(), "eval.ablation_seeds", "must not be empty");
  require(c.eval.feasibility_horizon >= 0, "eval.feasibility_h", "must be nonnegative");
  require(c.eval.fidelity_samples >= 0, "eval.fidelity_samples", "must be nonnegative");
}

Json to_json(const RunConfig& c) {
  const PlanningConfig& p = c.execution.planning;
  const ExecutionConfig& e = c.execution;
  return {{"seed", c.seed},
          {"world", to_json(c.world)},
          {"data", {{"contexts", c.data.num_contexts}, {"trajectories", c.data.trajectories_per_context}, {"T", c.data.horizon}}},
          {"cvae",
           {{"latent_dim", c.cvae.latent_dim},
            {"hidden", c.cvae.hidden},
            {"depth", c.cvae.depth},
            {"beta", c.cvae.beta},
            {"activation", to_string(c.cvae.activation)},
            {"lr", c.cvae.adam.learning_rate},
            {"epochs", c.cvae.epochs},
            {"batch_size", c.cvae.batch_size}}},
          {"cpc",
           {{"embed_dim", c.cpc.embed_dim},
            {"hidden", c.cpc.hidden},
            {"depth", c.cpc.depth},
            {"activation", to_string(c.cpc.activation)},
            {"h", c.cpc.horizon},
            {"N", c.cpc.candidates},
            {"phi", c.cpc.halluc_fraction},
            {"neighbors", c.cpc.halluc_neighbors},
            {"pool", c.halluc_pool},
            {"batch_size", c.cpc.batch_size},
            {"epochs", c.cpc.epochs},
            {"steps_per_epoch", c.cpc.steps_per_epoch},
            {"validation_batches", c.cpc.validation_batches},
            {"lr", c.cpc.adam.learning_rate}}},
          {"sptm",
           {{"embed_dim", c.sptm.embed_dim},
            {"hidden", c.sptm.hidden},
            {"depth", c.sptm.depth},
            {"head_hidden", c.sptm.head_hidden},
            {"activation", to_string(c.sptm.activation)},
            {"h", c.sptm.horizon},
            {"l", c.sptm.negative_threshold},
            {"batch_size", c.sptm.batch_size},
            {"epochs", c.sptm.epochs},
            {"steps_per_epoch", c.sptm.steps_per_epoch},
            {"validation_batches", c.sptm.validation_batches},
            {"lr", c.sptm.adam.learning_rate}}},
          {"inverse",
           {{"hidden", c.inverse.hidden},
            {"depth", c.inverse.depth},
            {"activation", to_string(c.inverse.activation)},
            {"lr", c.inverse.adam.learning_rate},
            {"epochs", c.inverse.epochs},
            {"batch_size", c.inverse.batch_size}}},
          {"planning", {{"M", p.samples}, {"scheme", to_string(p.scheme.kind)}, {"s_shortcut", p.scheme.s_shortcut}}},
          {"execution",
           {{"n", e.max_steps},
            {"r", e.replan_interval},
            {"tau", e.tau},
            {"eps_wp", e.waypoint_radius},
            {"h", e.waypoint_horizon},
            {"lookahead", e.lookahead}}},
          {"eval",
           {{"heldout_contexts", c.eval.heldout_contexts},
            {"ablation_tasks", c.eval.ablation_tasks},
            {"ablation_seeds", c.eval.ablation_seeds},
            {"feasibility_h", c.eval.feasibility_horizon},
            {"fidelity_samples", c.eval.fidelity_samples}}},
          {"paths", {{"data", c.paths.data}, {"checkpoints", c.paths.checkpoints}, {"out", c.paths.out}}}};
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (const char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string config_hash(const RunConfig& config) { return hex64(fnv1a64(to_json(config).dump())); }

Json provenance(const RunConfig& config) {
  return {{"config_hash", config_hash(config)},
          {"seed", config.seed},
          {"version", HTM_VERSION},
          {"config", to_json(config)}};
}

}  // namespace htm
