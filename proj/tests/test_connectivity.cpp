#include <cmath>
#include <map>

#include "doctest.h"
#include "htm/connectivity.hpp"
#include "htm/errors.hpp"

using namespace htm;

namespace {

const World& world() {
  static const World w;
  return w;
}

const TransitionDataset& data() {
  static const TransitionDataset d = [] {
    DataSpec spec;
    spec.num_contexts = 4;
    spec.trajectories_per_context = 10;
    spec.horizon = 30;
    spec.seed = 2;
    return collect_dataset(world(), spec);
  }();
  return d;
}

CpcConfig small_cpc() {
  CpcConfig c;
  c.embed_dim = 4;
  c.hidden = 8;
  c.depth = 1;
  c.batch_size = 16;
  c.candidates = 8;
  c.epochs = 2;
  c.steps_per_epoch = 5;
  c.validation_batches = 2;
  c.seed = 3;
  return c;
}

SptmConfig small_sptm() {
  SptmConfig c;
  c.embed_dim = 4;
  c.hidden = 8;
  c.head_hidden = 8;
  c.depth = 1;
  c.batch_size = 16;
  c.epochs = 2;
  c.steps_per_epoch = 5;
  c.validation_batches = 2;
  c.seed = 3;
  return c;
}

HallucinationPool uniform_pool(int rows) {
  HallucinationPool pool;
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const Context& c : data().contexts) {
    Matrix m(rows, 2);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
    pool[c.id] = m;
  }
  return pool;
}

}  // namespace

TEST_SUITE("connectivity") {

TEST_CASE("fresh model has zero logits and uniform loss ln N") {
  const ConnectivityModel m = make_connectivity(2, 5, small_cpc());
  CHECK(m.bilinear.isZero(0.0));
  const std::vector<double> a{0.1, 0.2}, b{0.7, 0.4}, c(5, 0.3);
  CHECK(score_pair(m, a, b, c) == 0.0);
  const CpcBatch batch = sample_cpc_batch(world(), data(), nullptr, small_cpc(), 5);
  CHECK(cpc_loss(m, batch) == doctest::Approx(std::log(8.0)).epsilon(1e-14));
}

TEST_CASE("cpc loss from logits: saturation, hand batch and large magnitudes") {
  Matrix sat = Matrix::Zero(1, 8);
  sat(0, 0) = 100.0;
  CHECK(cpc_loss_from_logits(sat) < 1e-40);

  Matrix hand(2, 3);
  hand << 1.0, 2.0, -0.5, 0.3, 0.3, 4.0;
  const double row0 = -std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(-0.5)));
  const double row1 = -std::log(std::exp(0.3) / (std::exp(0.3) + std::exp(0.3) + std::exp(4.0)));
  CHECK(std::abs(cpc_loss_from_logits(hand) - 0.5 * (row0 + row1)) < 1e-12);

  Matrix big(1, 3);
  big << 500.0, -500.0, 499.0;
  const double v = cpc_loss_from_logits(big);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("model loss equals the loss of its explicit pairwise logits") {
  CpcConfig cfg = small_cpc();
  ConnectivityModel m = make_connectivity(2, 5, cfg);
  Rng rng(4);
  std::normal_distribution<double> n;
  for (Eigen::Index k = 0; k < m.bilinear.size(); ++k) m.bilinear.data()[k] = n(rng);
  const CpcBatch batch = sample_cpc_batch(world(), data(), nullptr, cfg, 6);
  Matrix logits(batch.size(), batch.num_candidates);
  for (Eigen::Index b = 0; b < batch.size(); ++b) {
    const Eigen::RowVectorXd anchor = batch.anchors.row(b);
    const Eigen::RowVectorXd ctx = batch.contexts.row(b);
    const Matrix za = embed(m, batch.anchors.row(b), std::vector<double>(ctx.data(), ctx.data() + ctx.size()));
    for (int j = 0; j < batch.num_candidates; ++j) {
      const Eigen::RowVectorXd cand = batch.candidates.row(b * batch.num_candidates + j);
      logits(b, j) = score_pair(m, std::vector<double>(anchor.data(), anchor.data() + 2),
                                std::vector<double>(cand.data(), cand.data() + 2),
                                std::vector<double>(ctx.data(), ctx.data() + ctx.size()));
      // score = g(to)^T W g(from)
      const Matrix zc = embed(m, batch.candidates.row(b * batch.num_candidates + j),
                              std::vector<double>(ctx.data(), ctx.data() + ctx.size()));
      const double direct = (zc * m.bilinear * za.transpose())(0, 0);
      CHECK(std::abs(direct - logits(b, j)) < 1e-12);
    }
  }
  CHECK(std::abs(cpc_loss(m, batch) - cpc_loss_from_logits(logits)) < 1e-12);

  const std::vector<double> a{0.1, 0.2}, b{0.7, 0.4}, c(5, 0.3);
  CHECK(score_pair(m, a, b, c) != score_pair(m, b, a, c));
}

TEST_CASE("h = 1 draws only consecutive positives") {
  CpcConfig cfg = small_cpc();
  cfg.horizon = 1;
  cfg.batch_size = 200;
  const CpcBatch batch = sample_cpc_batch(world(), data(), nullptr, cfg, 8);
  const double step = world().params().max_action * std::sqrt(2.0) / world().params().arena_size;
  for (Eigen::Index b = 0; b < batch.size(); ++b) {
    CHECK(batch.offsets[static_cast<std::size_t>(b)] == 1);
    const double d = (batch.anchors.row(b) - batch.candidates.row(b * cfg.candidates)).norm();
    CHECK(d <= step + 1e-12);
  }
}

TEST_CASE("hallucinated entries follow the fraction") {
  const HallucinationPool pool = uniform_pool(40);
  CpcConfig cfg = small_cpc();
  cfg.halluc_fraction = 0.0;
  const CpcBatch none = sample_cpc_batch(world(), data(), &pool, cfg, 1);
  for (char h : none.hallucinated) CHECK(h == 0);

  cfg.halluc_fraction = 0.5;
  const CpcBatch half = sample_cpc_batch(world(), data(), &pool, cfg, 1);
  for (Eigen::Index b = 0; b < half.size(); ++b) {
    int count = 0;
    for (int j = 0; j < cfg.candidates; ++j) count += half.hallucinated[static_cast<std::size_t>(b * cfg.candidates + j)];
    CHECK(half.hallucinated[static_cast<std::size_t>(b * cfg.candidates)] == 0);
    CHECK(count == 4);  // round(0.5 * 7)
  }
}

TEST_CASE("positive offsets are uniform on 1..h") {
  CpcConfig cfg = small_cpc();
  cfg.batch_size = 10000;
  cfg.candidates = 2;
  const CpcBatch batch = sample_cpc_batch(world(), data(), nullptr, cfg, 11);
  std::map<int, int> hist;
  for (int k : batch.offsets) ++hist[k];
  REQUIRE(hist.size() == 5);
  const double expected = 10000.0 / 5.0;
  double chi2 = 0.0;
  for (const auto& [k, n] : hist) chi2 += (n - expected) * (n - expected) / expected;
  // 99th percentile of chi-square with 4 degrees of freedom.
  CHECK(chi2 < 13.2767);
}

TEST_CASE("SPTM labels and BCE") {
  CHECK(sptm_label(3, 5, 20) == std::optional<bool>(true));
  CHECK(sptm_label(30, 5, 20) == std::optional<bool>(false));
  CHECK_FALSE(sptm_label(10, 5, 20).has_value());
  CHECK(sptm_label(5, 5, 20) == std::optional<bool>(true));
  CHECK(sptm_label(20, 5, 20) == std::optional<bool>(false));

  const std::vector<double> zero(6, 0.0), labels{1, 0, 1, 0, 1, 1};
  CHECK(bce_from_logits(zero, labels) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const std::vector<double> x{2.0, -1.0, 0.5, 3.0}, y{1.0, 0.0, 0.0, 1.0};
  double manual = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x[static_cast<std::size_t>(i)]));
    manual -= y[static_cast<std::size_t>(i)] * std::log(s) + (1.0 - y[static_cast<std::size_t>(i)]) * std::log(1.0 - s);
  }
  CHECK(std::abs(bce_from_logits(x, y) - manual / 4.0) < 1e-12);
}

TEST_CASE("SPTM batch loss equals BCE of per-pair logits") {
  const SptmClassifier m = make_sptm(2, 5, small_sptm());
  const TrajectoryIndex index(world(), data(), TrajectoryIndex::Split::All);
  Rng rng(3);
  const LabeledPairs batch = sample_sptm_batch(index, small_sptm(), rng);
  std::vector<double> logits, labels;
  int positives = 0;
  for (Eigen::Index b = 0; b < batch.size(); ++b) {
    const auto row = [&](const Matrix& mat) {
      return std::vector<double>(mat.row(b).data(), mat.row(b).data() + mat.cols());
    };
    logits.push_back(sptm_logit(m, row(batch.from), row(batch.to), row(batch.contexts)));
    labels.push_back(batch.labels(b, 0));
    positives += batch.labels(b, 0) == 1.0;
  }
  CHECK(std::abs(sptm_bce_loss(m, batch) - bce_from_logits(logits, labels)) < 1e-12);
  CHECK(positives > 0);
  CHECK(positives < batch.size());
}

TEST_CASE("training is deterministic for a fixed seed") {
  const HallucinationPool pool = uniform_pool(40);
  const CpcTrainResult a = train_cpc(world(), data(), &pool, small_cpc());
  const CpcTrainResult b = train_cpc(world(), data(), &pool, small_cpc());
  CHECK(a.curve.validation_loss == b.curve.validation_loss);
  CHECK(a.model.bilinear == b.model.bilinear);

  const SptmTrainResult s1 = train_sptm(world(), data(), small_sptm());
  const SptmTrainResult s2 = train_sptm(world(), data(), small_sptm());
  CHECK(s1.curve.validation_loss == s2.curve.validation_loss);
}

TEST_CASE("scorers fill logit matrices consistently with pairwise logits") {
  CpcConfig cfg = small_cpc();
  ConnectivityModel m = make_connectivity(2, 5, cfg);
  m.bilinear = Matrix::Identity(4, 4);
  const SptmClassifier s = make_sptm(2, 5, small_sptm());
  const CpcScorer cs(m);
  const SptmScorer ss(s);
  Matrix nodes(3, 2);
  nodes << 0.1, 0.2, 0.5, 0.5, 0.9, 0.3;
  const std::vector<double> ctx(5, 0.4);
  for (const PairScorer* scorer : std::initializer_list<const PairScorer*>{&cs, &ss}) {
    const Matrix L = scorer->logit_matrix(nodes, ctx);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const std::vector<double> from(nodes.row(j).data(), nodes.row(j).data() + 2);
        const std::vector<double> to(nodes.row(i).data(), nodes.row(i).data() + 2);
        CHECK(std::abs(L(i, j) - scorer->logit(from, to, ctx)) < 1e-12);
      }
    }
  }
}

TEST_CASE("invalid sampling configs are rejected") {
  CpcConfig cfg = small_cpc();
  cfg.candidates = 1;
  CHECK_THROWS_AS(sample_cpc_batch(world(), data(), nullptr, cfg, 1), ConfigError);
  CHECK_THROWS_AS(cpc_loss_from_logits(Matrix(0, 3)), UsageError);
}

}
