#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "htm/checkpoint.hpp"
#include "htm/nn.hpp"
#include "htm/optim.hpp"
#include "htm/training.hpp"
#include "htm/world.hpp"

namespace htm {

/// Scores directed transitions between observations in one context.
class PairScorer {
 public:
  virtual ~PairScorer() = default;

  /// L(i, j) = logit of the transition from nodes.row(j) to nodes.row(i).
  virtual Matrix logit_matrix(const Matrix& nodes, std::span<const double> context) const = 0;
  virtual double logit(std::span<const double> from, std::span<const double> to,
                       std::span<const double> context) const = 0;
  virtual std::string name() const = 0;
};

struct CpcConfig {
  int embed_dim = 16;
  int hidden = 64;
  int depth = 2;
  Activation activation = Activation::Relu;
  int horizon = 5;            // positives are k in [1, horizon] steps ahead
  int candidates = 16;        // N: one positive and N - 1 negatives
  double halluc_fraction = 0.5;
  /// Hallucinated negatives are drawn from this many pool entries nearest to
  /// the anchor; 0 draws from the whole pool.
  int halluc_neighbors = 8;
  int batch_size = 64;
  int epochs = 30;
  int steps_per_epoch = 100;
  int validation_batches = 20;
  AdamConfig adam{.learning_rate = 1e-2};
  std::uint64_t seed = 0;
};

/// Log-bilinear connectivity energy: logit(from -> to) = g(to)^T W g(from),
/// with g consuming observation and context. No symmetry is imposed.
struct ConnectivityModel {
  int obs_dim = 0;
  int ctx_dim = 0;
  int embed_dim = 0;
  int horizon = 5;
  MlpParams encoder;
  Matrix bilinear;  // embed x embed, zero at initialization

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
};

ConnectivityModel make_connectivity(int obs_dim, int ctx_dim, const CpcConfig& config);

/// Embeddings of each observation row under a shared context.
Matrix embed(const ConnectivityModel& model, const Matrix& obs, std::span<const double> context);
double score_pair(const ConnectivityModel& model, std::span<const double> from,
                  std::span<const double> to, std::span<const double> context);

/// Hallucinated observations per context id (rows are observations).
using HallucinationPool = std::map<int, Matrix>;

struct CpcBatch {
  Matrix anchors;     // B x obs
  Matrix candidates;  // (B * N) x obs; row b * N is the positive of anchor b
  Matrix contexts;    // B x ctx
  int num_candidates = 0;
  std::vector<int> offsets;        // k per anchor
  std::vector<char> hallucinated;  // per candidate row

  Eigen::Index size() const { return anchors.rows(); }
};

/// Precomputed lookup of trajectories and per-context observations for one
/// data split.
class TrajectoryIndex {
 public:
  enum class Split { Train, Validation, All };

  TrajectoryIndex(const World& world, const TransitionDataset& data, Split split);

  struct ObsRef {
    const Trajectory* trajectory;
    std::size_t t;
  };

  const std::vector<const Trajectory*>& trajectories() const { return trajectories_; }
  const std::vector<ObsRef>& observations(int context_id) const;
  const std::vector<double>& encoding(int context_id) const;
  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t ctx_dim() const { return ctx_dim_; }

 private:
  std::vector<const Trajectory*> trajectories_;
  std::map<int, std::vector<ObsRef>> by_context_;
  std::map<int, std::vector<double>> encodings_;
  std::size_t obs_dim_ = 0;
  std::size_t ctx_dim_ = 0;
};

CpcBatch sample_cpc_batch(const TrajectoryIndex& index, const HallucinationPool* pool,
                          const CpcConfig& config, Rng& rng);
CpcBatch sample_cpc_batch(const World& world, const TransitionDataset& data,
                          const HallucinationPool* pool, const CpcConfig& config,
                          std::uint64_t seed);

/// Mean softmax cross-entropy with column 0 as the true class.
double cpc_loss_from_logits(const Matrix& logits);
ad::Var cpc_logits(const ConnectivityModel& shape, std::span<const ad::Var> params,
                   const CpcBatch& batch);
ad::Var cpc_loss(const ConnectivityModel& shape, std::span<const ad::Var> params,
                 const CpcBatch& batch);
double cpc_loss(const ConnectivityModel& model, const CpcBatch& batch);

struct CpcTrainResult {
  ConnectivityModel model;  // best-validation parameters
  TrainingCurve curve;
};

CpcTrainResult train_cpc(const World& world, const TransitionDataset& data,
                         const HallucinationPool* pool, const CpcConfig& config,
                         const LogFn& log = {});

struct RankingReport {
  std::vector<int> ranks;  // 1-based rank of the true successor per anchor
  int candidates = 0;
  int hits = 0;            // anchors ranked within the top fraction
  double hit_rate = 0.0;
};

/// For each anchor the true k-step successor competes with `candidates - 1`
/// other observations from the same trajectories, ranked by logit.
RankingReport rank_successors(const PairScorer& scorer, const World& world,
                              std::span<const Trajectory> trajectories, const Context& context,
                              int anchors, int candidates, int horizon, double top_fraction,
                              std::uint64_t seed);

// SPTM-style binary classifier baseline.

struct SptmConfig {
  int embed_dim = 16;
  int hidden = 64;
  int depth = 2;
  int head_hidden = 64;
  Activation activation = Activation::Relu;
  int horizon = 5;              // h: offsets <= h are positive
  int negative_threshold = 20;  // l: offsets >= l are negative
  int batch_size = 128;
  int epochs = 30;
  int steps_per_epoch = 100;
  int validation_batches = 20;
  AdamConfig adam;
  std::uint64_t seed = 0;
};

struct SptmClassifier {
  int obs_dim = 0;
  int ctx_dim = 0;
  int embed_dim = 0;
  int horizon = 5;
  int negative_threshold = 20;
  MlpParams encoder;
  MlpParams head;  // [g(from), g(to)] -> logit

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
};

SptmClassifier make_sptm(int obs_dim, int ctx_dim, const SptmConfig& config);

/// Labeling rule: positive when offset <= h, negative when offset >= l,
/// excluded in between. Observations from a different trajectory of the same
/// context count as infinitely far apart.
std::optional<bool> sptm_label(int offset, int horizon, int negative_threshold);

struct LabeledPairs {
  Matrix from;
  Matrix to;
  Matrix contexts;
  Matrix labels;  // B x 1, entries 0 or 1

  Eigen::Index size() const { return from.rows(); }
};

LabeledPairs sample_sptm_batch(const TrajectoryIndex& index, const SptmConfig& config, Rng& rng);

ad::Var sptm_logits(const SptmClassifier& shape, std::span<const ad::Var> params,
                    const LabeledPairs& batch);
ad::Var sptm_bce_loss(const SptmClassifier& shape, std::span<const ad::Var> params,
                      const LabeledPairs& batch);
double sptm_bce_loss(const SptmClassifier& model, const LabeledPairs& batch);
/// Mean binary cross-entropy of sigmoid(logit) against 0/1 labels.
double bce_from_logits(std::span<const double> logits, std::span<const double> labels);
double sptm_logit(const SptmClassifier& model, std::span<const double> from,
                  std::span<const double> to, std::span<const double> context);

struct SptmTrainResult {
  SptmClassifier model;
  TrainingCurve curve;
};

SptmTrainResult train_sptm(const World& world, const TransitionDataset& data,
                           const SptmConfig& config, const LogFn& log = {});

class CpcScorer final : public PairScorer {
 public:
  explicit CpcScorer(const ConnectivityModel& model) : model_(&model) {}
  Matrix logit_matrix(const Matrix& nodes, std::span<const double> context) const override;
  double logit(std::span<const double> from, std::span<const double> to,
               std::span<const double> context) const override;
  std::string name() const override { return "CPC"; }

 private:
  const ConnectivityModel* model_;
};

class SptmScorer final : public PairScorer {
 public:
  explicit SptmScorer(const SptmClassifier& model) : model_(&model) {}
  Matrix logit_matrix(const Matrix& nodes, std::span<const double> context) const override;
  double logit(std::span<const double> from, std::span<const double> to,
               std::span<const double> context) const override;
  std::string name() const override { return "SPTM"; }

 private:
  const SptmClassifier* model_;
};

Checkpoint to_checkpoint(const ConnectivityModel& model);
ConnectivityModel connectivity_from_checkpoint(const Checkpoint& ckpt);
Checkpoint to_checkpoint(const SptmClassifier& model);
SptmClassifier sptm_from_checkpoint(const Checkpoint& ckpt);

}  // namespace htm
