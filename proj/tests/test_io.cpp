#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "htm/checkpoint.hpp"
#include "htm/connectivity.hpp"
#include "htm/controller.hpp"
#include "htm/dataset_io.hpp"
#include "htm/errors.hpp"

using namespace htm;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("htm_io_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("dataset round trip is exact") {
  const World w;
  DataSpec spec;
  spec.num_contexts = 3;
  spec.trajectories_per_context = 4;
  spec.horizon = 7;
  spec.seed = 9;
  const TransitionDataset d = collect_dataset(w, spec);
  const auto dir = scratch("dataset");
  save_dataset(d, dir, Json{{"config_hash", "abc"}});
  const TransitionDataset back = load_dataset(dir);
  REQUIRE(back.trajectories.size() == d.trajectories.size());
  CHECK(back.contexts == d.contexts);
  CHECK(back.spec.seed == 9);
  for (std::size_t i = 0; i < d.trajectories.size(); ++i) {
    CHECK(back.trajectories[i].observations == d.trajectories[i].observations);
    CHECK(back.trajectories[i].actions == d.trajectories[i].actions);
    CHECK(back.trajectories[i].positions == d.trajectories[i].positions);
  }
  CHECK(audit_replay(w, back, 1.0, 1) == 0);

  std::ifstream manifest(dir / "manifest.json");
  const Json m = Json::parse(manifest);
  CHECK(m["provenance"]["config_hash"] == "abc");
  CHECK(m["counts"]["transitions"] == 3 * 4 * 7);
  std::filesystem::remove_all(dir);
}

TEST_CASE("missing dataset files raise IoError") {
  CHECK_THROWS_AS(load_dataset(std::filesystem::temp_directory_path() / "htm_io_test_nothing_here"), IoError);
}

TEST_CASE("checkpoint round trip and corruption") {
  CpcConfig cfg;
  cfg.hidden = 6;
  cfg.embed_dim = 3;
  ConnectivityModel m = make_connectivity(2, 5, cfg);
  m.bilinear = Matrix::Identity(3, 3) * 0.5;
  const auto dir = scratch("ckpt");
  save_checkpoint(dir / "m.htmc", to_checkpoint(m));
  const ConnectivityModel back = connectivity_from_checkpoint(load_checkpoint(dir / "m.htmc", "CPCE"));
  CHECK(back.bilinear == m.bilinear);
  const std::vector<double> a{0.2, 0.3}, b{0.6, 0.1}, c(5, 0.4);
  CHECK(score_pair(back, a, b, c) == score_pair(m, a, b, c));

  CHECK_THROWS_AS(load_checkpoint(dir / "m.htmc", "CVAE"), IoError);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.htmc"), IoError);

  std::ifstream in(dir / "m.htmc", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ofstream(dir / "short.htmc", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.htmc"), IoError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::ofstream(dir / "magic.htmc", std::ios::binary) << bad;
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.htmc"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint layout is little-endian with the documented header") {
  Checkpoint ck;
  ck.kind = "TEST";
  ck.meta = {1.5};
  ck.tensors.push_back(Matrix::Constant(1, 2, 2.0));
  std::ostringstream out;
  write_checkpoint(out, ck);
  const std::string s = out.str();
  CHECK(s.substr(0, 4) == "HTMC");
  CHECK(static_cast<unsigned char>(s[4]) == Checkpoint::kVersion);
  CHECK(s.substr(8, 4) == "TEST");
  // magic, version, kind, n_meta, meta, n_tensors, shape, data
  CHECK(s.size() == 4 + 4 + 4 + 4 + 8 + 4 + 8 + 16);
  std::istringstream in(s);
  const Checkpoint back = read_checkpoint(in);
  CHECK(back.meta == ck.meta);
  CHECK(back.tensors[0] == ck.tensors[0]);
}

TEST_CASE("SPTM and inverse checkpoints round trip") {
  SptmConfig sc;
  sc.hidden = 5;
  sc.head_hidden = 4;
  const SptmClassifier s = make_sptm(2, 5, sc);
  const SptmClassifier s2 = sptm_from_checkpoint(to_checkpoint(s));
  const std::vector<double> a{0.2, 0.3}, b{0.6, 0.1}, c(5, 0.4);
  CHECK(sptm_logit(s, a, b, c) == sptm_logit(s2, a, b, c));

  InverseConfig ic;
  ic.hidden = 5;
  const InverseModel inv = make_inverse(2, 5, 0.1, ic);
  const InverseModel inv2 = inverse_from_checkpoint(to_checkpoint(inv));
  CHECK(infer_action(inv, a, b, c) == infer_action(inv2, a, b, c));
}

}
