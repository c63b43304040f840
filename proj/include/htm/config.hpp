#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "htm/controller.hpp"
#include "htm/dataset_io.hpp"

namespace htm {

struct EvalConfig {
  int heldout_contexts = 20;  // one cross-wall task per held-out context
  int ablation_tasks = 10;
  std::vector<std::uint64_t> ablation_seeds{0, 1, 2};
  int feasibility_horizon = 5;
  int fidelity_samples = 300;
};

struct PathsConfig {
  std::string data = "data";
  std::string checkpoints = "checkpoints";
  std::string out = "out";
};

/// Every tunable of a run. Sub-model seeds are derived from `seed`.
struct RunConfig {
  std::uint64_t seed = 0;
  WorldParams world;
  DataSpec data;
  CvaeConfig cvae;
  CpcConfig cpc;
  int halluc_pool = 300;  // hallucinated negatives generated per training context
  SptmConfig sptm;
  InverseConfig inverse;
  ExecutionConfig execution;  // includes planning
  EvalConfig eval;
  PathsConfig paths;
};

/// Applies defaults for absent keys. Unknown keys and out-of-range values
/// throw ConfigError naming the dotted key path.
RunConfig config_from_json(const Json& j);
/// Throws IoError when the file cannot be read and ConfigError on malformed
/// JSON.
RunConfig load_config(const std::filesystem::path& path);
Json to_json(const RunConfig& config);
void validate(const RunConfig& config);

/// Re-derives every sub-model seed from `seed`.
void apply_seed(RunConfig& config, std::uint64_t seed);

/// FNV-1a 64-bit hash as 16 hex digits.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
std::string config_hash(const RunConfig& config);

/// Effective config, its hash, the master seed and the library version.
Json provenance(const RunConfig& config);

}  // namespace htm
