#pragma once

#include <filesystem>
#include <span>

#include <nlohmann/json.hpp>

#include "htm/world.hpp"

namespace htm {

using Json = nlohmann::json;

Json to_json(const Context& c);
Context context_from_json(const Json& j);
Json to_json(const WorldParams& p);
WorldParams world_params_from_json(const Json& j);
Json to_json(const DataSpec& s);
DataSpec data_spec_from_json(const Json& j);

/// Writes `contexts.jsonl`, `transitions.jsonl` and `manifest.json` into `dir`.
/// `provenance` is embedded in the manifest verbatim.
void save_dataset(const TransitionDataset& data, const std::filesystem::path& dir,
                  const Json& provenance = Json::object());
TransitionDataset load_dataset(const std::filesystem::path& dir);

/// Hallucinated samples in the transitions line format (trajectory_id = -1,
/// t = sample index, no action or successor).
void write_hallucinations(const std::filesystem::path& path, int context_id,
                          std::span<const Observation> samples);

}  // namespace htm
