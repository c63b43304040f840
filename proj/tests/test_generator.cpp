#include <cmath>

#include "doctest.h"
#include "htm/errors.hpp"
#include "htm/generator.hpp"

using namespace htm;

namespace {

CvaeConfig tiny_config() {
  CvaeConfig c;
  c.latent_dim = 2;
  c.hidden = 8;
  c.depth = 1;
  c.epochs = 2;
  c.batch_size = 32;
  c.seed = 4;
  return c;
}

TransitionDataset small_data() {
  DataSpec spec;
  spec.num_contexts = 3;
  spec.trajectories_per_context = 10;
  spec.horizon = 10;
  return collect_dataset(World(), spec);
}

double log_normal(double x, double mean, double log_var) {
  return -0.5 * (std::log(2.0 * M_PI) + log_var + (x - mean) * (x - mean) / std::exp(log_var));
}

}  // namespace

TEST_SUITE("generator") {

TEST_CASE("prior-matched posterior has zero KL") {
  CvaeModel m = make_cvae(2, 5, tiny_config());
  DenseLayer& last = m.encoder.layers.back();
  last.weight.setZero();
  last.bias.setZero();
  Matrix obs = Matrix::Constant(4, 2, 0.3);
  Matrix ctx = Matrix::Constant(4, 5, 0.7);
  const ElboTerms t = cvae_elbo(m, obs, ctx, std::uint64_t{1});
  CHECK(t.kl == 0.0);
  for (double kl : gaussian_kl(cvae_posterior(m, obs, ctx))) CHECK(kl == 0.0);
}

TEST_CASE("perfect reconstruction has zero reconstruction term") {
  CvaeModel m = make_cvae(2, 5, tiny_config());
  DenseLayer& last = m.decoder.layers.back();
  last.weight.setZero();
  last.bias(0, 0) = 0.25;
  last.bias(0, 1) = 0.75;
  Matrix obs(3, 2);
  obs << 0.25, 0.75, 0.25, 0.75, 0.25, 0.75;
  const ElboTerms t = cvae_elbo(m, obs, Matrix::Zero(3, 5), std::uint64_t{2});
  CHECK(t.reconstruction == 0.0);
  CHECK(t.total == doctest::Approx(m.beta * t.kl).epsilon(1e-15));
}

TEST_CASE("closed-form KL matches a Monte Carlo estimate") {
  Rng rng(8);
  CvaeConfig cfg = tiny_config();
  cfg.seed = 77;
  CvaeModel m = make_cvae(2, 5, cfg);
  // Spread the posterior away from the prior so the estimate is informative.
  m.encoder.layers.back().bias(0, 0) = 0.8;
  m.encoder.layers.back().bias(0, 3) = -0.7;
  Matrix obs(1, 2);
  obs << 0.4, 0.6;
  const Matrix ctx = Matrix::Constant(1, 5, 0.5);
  const Posterior q = cvae_posterior(m, obs, ctx);
  const double closed = gaussian_kl(q)[0];

  const int n = 100000;
  std::normal_distribution<double> normal;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double log_ratio = 0.0;
    for (int d = 0; d < m.latent_dim; ++d) {
      const double mean = q.mean(0, d);
      const double lv = q.log_var(0, d);
      const double z = mean + std::exp(0.5 * lv) * normal(rng);
      log_ratio += log_normal(z, mean, lv) - log_normal(z, 0.0, 0.0);
    }
    sum += log_ratio;
    sum_sq += log_ratio * log_ratio;
  }
  const double mc = sum / n;
  const double se = std::sqrt((sum_sq / n - mc * mc) / n);
  CHECK(closed > 0.1);
  CHECK(std::abs(mc - closed) < 3.0 * se);
}

TEST_CASE("KL is nonnegative on random posteriors") {
  Rng rng(2);
  std::normal_distribution<double> n(0.0, 2.0);
  Posterior q{Matrix(50, 3), Matrix(50, 3)};
  for (Eigen::Index k = 0; k < q.mean.size(); ++k) {
    q.mean.data()[k] = n(rng);
    q.log_var.data()[k] = n(rng);
  }
  for (double kl : gaussian_kl(q)) CHECK(kl >= 0.0);
}

TEST_CASE("hallucinate: empty request, range, determinism and shape checks") {
  const CvaeModel m = make_cvae(2, 5, tiny_config());
  const std::vector<double> ctx(5, 0.2);
  CHECK(hallucinate(m, ctx, 0, 1).samples.empty());
  const HallucinationSet a = hallucinate(m, ctx, 50, 9);
  const HallucinationSet b = hallucinate(m, ctx, 50, 9);
  REQUIRE(a.samples.size() == 50);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i] == b.samples[i]);
    for (double v : a.samples[i].data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK_FALSE(hallucinate(m, ctx, 50, 10).samples == a.samples);
  CHECK_THROWS_AS(hallucinate(m, ctx, -1, 1), UsageError);
  CHECK_THROWS_AS(hallucinate(m, std::vector<double>(4, 0.0), 3, 1), ShapeError);
}

TEST_CASE("training is deterministic and lowers the validation ELBO") {
  const World w;
  const TransitionDataset d = small_data();
  CvaeConfig cfg = tiny_config();
  cfg.epochs = 5;
  const CvaeTrainResult a = train_cvae(w, d, cfg);
  const CvaeTrainResult b = train_cvae(w, d, cfg);
  CHECK(a.curve.validation_loss == b.curve.validation_loss);
  CHECK(a.curve.best_validation < a.curve.initial_validation);
  for (double v : a.curve.train_loss) CHECK(std::isfinite(v));
}

TEST_CASE("checkpoint round trip preserves the model") {
  const CvaeModel m = make_cvae(2, 5, tiny_config());
  const CvaeModel back = cvae_from_checkpoint(to_checkpoint(m));
  const std::vector<double> ctx(5, 0.1);
  CHECK(hallucinate(m, ctx, 10, 3).samples == hallucinate(back, ctx, 10, 3).samples);
  CHECK(back.beta == m.beta);
}

}
