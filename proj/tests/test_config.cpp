#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "htm/config.hpp"
#include "htm/errors.hpp"

using namespace htm;

namespace {

std::string rejected_key(const Json& j) {
  try {
    config_from_json(j);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<accepted>";
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("empty object gives all defaults") {
  const RunConfig c = config_from_json(Json::object());
  CHECK(c.execution.max_steps == 500);
  CHECK(c.execution.replan_interval == 200);
  CHECK(c.execution.tau == 0.5);
  CHECK(c.execution.planning.samples == 300);
  CHECK(c.execution.planning.scheme.kind == WeightKind::Normalized);
  CHECK(c.execution.planning.scheme.s_shortcut == 0.9);
  CHECK(c.cpc.candidates == 16);
  CHECK(c.cpc.horizon == 5);
  CHECK(c.sptm.horizon == 5);
  CHECK(c.sptm.negative_threshold == 20);
  CHECK(c.data.num_contexts == 40);
  CHECK(c.data.trajectories_per_context == 20);
  CHECK(c.data.horizon == 20);
  CHECK(c.world.arena_size == 2.8);
  CHECK(c.eval.heldout_contexts == 20);
  CHECK(c.eval.ablation_seeds.size() == 3);
}

TEST_CASE("planning hyperparameters from the block-wall domain apply") {
  const RunConfig c = config_from_json(Json::parse(R"({"execution":{"n":500,"r":200}})"));
  CHECK(c.execution.max_steps == 500);
  CHECK(c.execution.replan_interval == 200);
  const RunConfig d = config_from_json(Json::parse(R"({"execution":{"n":80,"r":20},"planning":{"M":50}})"));
  CHECK(d.execution.max_steps == 80);
  CHECK(d.execution.replan_interval == 20);
  CHECK(d.execution.planning.samples == 50);
}

TEST_CASE("invalid values and unknown keys name the key path") {
  CHECK(rejected_key(Json::parse(R"({"world":{"a_max":-1}})")) == "world.a_max");
  CHECK(rejected_key(Json::parse(R"({"cpc":{"N":1}})")) == "cpc.N");
  CHECK(rejected_key(Json::parse(R"({"planning":{"s_shortcut":1.5}})")) == "planning.s_shortcut");
  CHECK(rejected_key(Json::parse(R"({"planning":{"scheme":"shortest"}})")) == "planning.scheme");
  CHECK(rejected_key(Json::parse(R"({"execution":{"bogus":1}})")) == "execution.bogus");
  CHECK(rejected_key(Json::parse(R"({"execution":{"n":"many"}})")) == "execution.n");
  CHECK(rejected_key(Json::parse(R"({"world":{"walls":{"half_length":[0.9,0.5]}}})")) == "world.walls.half_length");
}

TEST_CASE("round trip through JSON and hashing") {
  RunConfig c = config_from_json(Json::parse(R"({"seed":7,"planning":{"scheme":"inverse"}})"));
  const Json j = to_json(c);
  const RunConfig back = config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(config_hash(back) == config_hash(c));
  apply_seed(c, 8);
  CHECK(config_hash(c) != config_hash(back));
  CHECK(c.data.seed == 8);
  CHECK(c.cvae.seed != c.cpc.seed);
  const Json p = provenance(c);
  CHECK(p["seed"] == 8);
  CHECK(p["config_hash"] == config_hash(c));
  CHECK(p["config"] == to_json(c));
}

TEST_CASE("FNV-1a reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("load_config reports missing files and malformed JSON") {
  const auto dir = std::filesystem::temp_directory_path() / "htm_config_test";
  std::filesystem::create_directories(dir);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), IoError);
  {
    std::ofstream(dir / "bad.json") << "{\"seed\": ";
  }
  CHECK_THROWS_AS(load_config(dir / "bad.json"), ConfigError);
  {
    std::ofstream(dir / "ok.json") << R"({"data":{"contexts":3}})";
  }
  CHECK(load_config(dir / "ok.json").data.num_contexts == 3);
  std::filesystem::remove_all(dir);
}

}
