#include "htm/dataset_io.hpp"

#include <fstream>
#include <map>
#include <string>

#include "htm/errors.hpp"

namespace htm {

Json to_json(const Context& c) {
  Json walls = Json::array();
  for (const Rect& w : c.walls) {
    walls.push_back({{"cx", w.cx}, {"cy", w.cy}, {"half_w", w.half_w}, {"half_h", w.half_h}});
  }
  return {{"id", c.id}, {"arena", c.arena_size}, {"walls", walls}};
}

Context context_from_json(const Json& j) {
  Context c;
  c.id = j.at("id").get<int>();
  c.arena_size = j.at("arena").get<double>();
  for (const auto& w : j.at("walls")) {
    c.walls.push_back(Rect{w.at("cx").get<double>(), w.at("cy").get<double>(),
                           w.at("half_w").get<double>(), w.at("half_h").get<double>()});
  }
  return c;
}

Json to_json(const WorldParams& p) {
  const ContextSpec& c = p.contexts;
  return {{"arena_size", p.arena_size},
          {"agent_radius", p.agent_radius},
          {"a_max", p.max_action},
          {"raster_size", p.raster_size},
          {"mode", to_string(p.mode)},
          {"walls",
           {{"min_walls", c.min_walls},
            {"max_walls", c.max_walls},
            {"orientation", to_string(c.orientation)},
            {"half_thickness", {c.half_thickness_min, c.half_thickness_max}},
            {"half_length", {c.half_length_min, c.half_length_max}},
            {"cross_margin", c.cross_margin}}}};
}

WorldParams world_params_from_json(const Json& j) {
  WorldParams p;
  p.arena_size = j.at("arena_size").get<double>();
  p.agent_radius = j.at("agent_radius").get<double>();
  p.max_action = j.at("a_max").get<double>();
  p.raster_size = j.at("raster_size").get<int>();
  p.mode = parse_observation_mode(j.at("mode").get<std::string>());
  const Json& w = j.at("walls");
  p.contexts.min_walls = w.at("min_walls").get<int>();
  p.contexts.max_walls = w.at("max_walls").get<int>();
  p.contexts.orientation = parse_wall_orientation(w.at("orientation").get<std::string>());
  p.contexts.half_thickness_min = w.at("half_thickness").at(0).get<double>();
  p.contexts.half_thickness_max = w.at("half_thickness").at(1).get<double>();
  p.contexts.half_length_min = w.at("half_length").at(0).get<double>();
  p.contexts.half_length_max = w.at("half_length").at(1).get<double>();
  p.contexts.cross_margin = w.at("cross_margin").get<double>();
  return p;
}

Json to_json(const DataSpec& s) {
  return {{"contexts", s.num_contexts},
          {"trajectories", s.trajectories_per_context},
          {"T", s.horizon},
          {"seed", s.seed},
          {"first_context_id", s.first_context_id}};
}

DataSpec data_spec_from_json(const Json& j) {
  DataSpec s;
  s.num_contexts = j.at("contexts").get<int>();
  s.trajectories_per_context = j.at("trajectories").get<int>();
  s.horizon = j.at("T").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.first_context_id = j.value("first_context_id", 0);
  return s;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading", path.string());
  return in;
}

Json position_json(Vec2 p) { return Json::array({p.x, p.y}); }

}  // namespace

void save_dataset(const TransitionDataset& data, const std::filesystem::path& dir,
                  const Json& provenance) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory", dir.string());

  {
    auto out = open_out(dir / "contexts.jsonl");
    for (const Context& c : data.contexts) out << to_json(c).dump() << '\n';
    if (!out) throw IoError("write failed", (dir / "contexts.jsonl").string());
  }
  {
    auto out = open_out(dir / "transitions.jsonl");
    const std::string mode = to_string(data.world.mode);
    for (const Trajectory& t : data.trajectories) {
      for (std::size_t i = 0; i < t.length(); ++i) {
        Json line = {{"context_id", t.context_id},
                     {"trajectory_id", t.trajectory_id},
                     {"t", i},
                     {"obs", t.observations[i].data},
                     {"action", {t.actions[i].dx, t.actions[i].dy}},
                     {"next_obs", t.observations[i + 1].data},
                     {"mode", mode},
                     {"pos", position_json(t.positions[i])},
                     {"next_pos", position_json(t.positions[i + 1])}};
        out << line.dump() << '\n';
      }
    }
    if (!out) throw IoError("write failed", (dir / "transitions.jsonl").string());
  }
  {
    Json manifest = {{"seed", data.spec.seed},
                     {"spec", {{"data", to_json(data.spec)}, {"world", to_json(data.world)}}},
                     {"counts",
                      {{"contexts", data.contexts.size()},
                       {"trajectories", data.trajectories.size()},
                       {"transitions", data.transition_count()}}},
                     {"provenance", provenance}};
    auto out = open_out(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("write failed", (dir / "manifest.json").string());
  }
}

TransitionDataset load_dataset(const std::filesystem::path& dir) {
  TransitionDataset data;
  Json manifest;
  try {
    auto in = open_in(dir / "manifest.json");
    in >> manifest;
    data.world = world_params_from_json(manifest.at("spec").at("world"));
    data.spec = data_spec_from_json(manifest.at("spec").at("data"));
  } catch (const Json::exception& e) {
    throw IoError(std::string("malformed manifest (") + e.what() + ")", (dir / "manifest.json").string());
  }

  std::string line;
  {
    auto in = open_in(dir / "contexts.jsonl");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        data.contexts.push_back(context_from_json(Json::parse(line)));
      } catch (const Json::exception& e) {
        throw IoError(std::string("malformed context line (") + e.what() + ")",
                      (dir / "contexts.jsonl").string());
      }
    }
  }
  {
    auto in = open_in(dir / "transitions.jsonl");
    const ObservationMode mode = data.world.mode;
    std::map<std::pair<int, int>, std::size_t> index;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const Json j = Json::parse(line);
        const auto key = std::make_pair(j.at("context_id").get<int>(), j.at("trajectory_id").get<int>());
        auto it = index.find(key);
        if (it == index.end()) {
          Trajectory t;
          t.context_id = key.first;
          t.trajectory_id = key.second;
          data.trajectories.push_back(std::move(t));
          it = index.emplace(key, data.trajectories.size() - 1).first;
        }
        Trajectory& t = data.trajectories[it->second];
        const auto step = j.at("t").get<std::size_t>();
        if (step != t.actions.size()) {
          throw IoError("transitions out of order for trajectory " + std::to_string(key.second),
                        (dir / "transitions.jsonl").string());
        }
        if (t.observations.empty()) {
          t.observations.push_back(Observation{mode, j.at("obs").get<std::vector<double>>()});
          const auto p = j.at("pos");
          t.positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        const auto a = j.at("action");
        t.actions.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
        t.observations.push_back(Observation{mode, j.at("next_obs").get<std::vector<double>>()});
        const auto np = j.at("next_pos");
        t.positions.push_back({np.at(0).get<double>(), np.at(1).get<double>()});
      } catch (const Json::exception& e) {
        throw IoError(std::string("malformed transition line (") + e.what() + ")",
                      (dir / "transitions.jsonl").string());
      }
    }
  }
  return data;
}

void write_hallucinations(const std::filesystem::path& path, int context_id,
                          std::span<const Observation> samples) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Json line = {{"context_id", context_id},
                 {"trajectory_id", -1},
                 {"t", i},
                 {"obs", samples[i].data},
                 {"action", nullptr},
                 {"next_obs", nullptr},
                 {"mode", to_string(samples[i].mode)}};
    out << line.dump() << '\n';
  }
  if (!out) throw IoError("write failed", path.string());
}

}  // namespace htm
