#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "htm/checkpoint.hpp"
#include "htm/nn.hpp"
#include "htm/optim.hpp"
#include "htm/training.hpp"
#include "htm/world.hpp"

namespace htm {

struct CvaeConfig {
  int latent_dim = 2;
  int hidden = 128;
  int depth = 2;
  double beta = 0.005;
  Activation activation = Activation::Relu;
  AdamConfig adam;
  int epochs = 60;
  int batch_size = 128;
  std::uint64_t seed = 0;
};

/// Conditional VAE over observations given a context encoding. The encoder
/// maps o (+) c to [mu, log sigma^2]; the decoder maps z (+) c to the
/// reconstruction mean.
struct CvaeModel {
  int obs_dim = 0;
  int ctx_dim = 0;
  int latent_dim = 0;
  double beta = 1.0;
  MlpParams encoder;
  MlpParams decoder;

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
};

CvaeModel make_cvae(int obs_dim, int ctx_dim, const CvaeConfig& config);

struct ElboTerms {
  double total = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
};

struct ElboVars {
  ad::Var total;
  ad::Var reconstruction;
  ad::Var kl;
};

/// Batch-mean loss: sum of squared reconstruction error plus beta times the
/// closed-form KL(q(z|o,c) || N(0, I)). `noise` holds the standard-normal
/// draws of the reparameterization (batch x latent).
ElboVars cvae_elbo(const CvaeModel& shape, std::span<const ad::Var> params, const Matrix& obs,
                   const Matrix& ctx, const Matrix& noise);
ElboTerms cvae_elbo(const CvaeModel& model, const Matrix& obs, const Matrix& ctx,
                    std::uint64_t noise_seed);
ElboTerms cvae_elbo(const CvaeModel& model, const Matrix& obs, const Matrix& ctx,
                    const Matrix& noise);

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

struct Posterior {
  Matrix mean;     // batch x latent
  Matrix log_var;  // batch x latent
};
Posterior cvae_posterior(const CvaeModel& model, const Matrix& obs, const Matrix& ctx);

/// Per-sample KL(N(mean, exp(log_var)) || N(0, I)) in closed form.
std::vector<double> gaussian_kl(const Posterior& q);

struct CvaeTrainResult {
  CvaeModel model;  // best-validation parameters
  TrainingCurve curve;
};

CvaeTrainResult train_cvae(const World& world, const TransitionDataset& data,
                           const CvaeConfig& config, const LogFn& log = {});

struct HallucinationSet {
  int context_id = -1;
  std::uint64_t seed = 0;
  std::vector<Observation> samples;
};

/// Decoder means for z ~ N(0, I), clamped to [0, 1].
HallucinationSet hallucinate(const CvaeModel& model, std::span<const double> context_encoding,
                             int count, std::uint64_t seed,
                             ObservationMode mode = ObservationMode::State, int context_id = -1);

Checkpoint to_checkpoint(const CvaeModel& model);
CvaeModel cvae_from_checkpoint(const Checkpoint& ckpt);

}  // namespace htm
