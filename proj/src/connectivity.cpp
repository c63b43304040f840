#include "htm/connectivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "htm/errors.hpp"

namespace htm {

namespace {

Matrix with_context(const Matrix& obs, std::span<const double> context) {
  Matrix x(obs.rows(), obs.cols() + static_cast<Eigen::Index>(context.size()));
  x.leftCols(obs.cols()) = obs;
  for (Eigen::Index i = 0; i < obs.rows(); ++i) {
    for (std::size_t j = 0; j < context.size(); ++j) {
      x(i, obs.cols() + static_cast<Eigen::Index>(j)) = context[j];
    }
  }
  return x;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Matrix repeat_rows(const Matrix& m, Eigen::Index times) {
  Matrix out(m.rows() * times, m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < times; ++k) out.row(i * times + k) = m.row(i);
  }
  return out;
}

void copy_row(Matrix& dst, Eigen::Index r, const std::vector<double>& src) {
  for (std::size_t j = 0; j < src.size(); ++j) dst(r, static_cast<Eigen::Index>(j)) = src[j];
}

}  // namespace

std::vector<Matrix*> ConnectivityModel::parameters() {
  auto p = encoder.parameters();
  p.push_back(&bilinear);
  return p;
}

std::vector<const Matrix*> ConnectivityModel::parameters() const {
  auto p = encoder.parameters();
  p.push_back(&bilinear);
  return p;
}

ConnectivityModel make_connectivity(int obs_dim, int ctx_dim, const CpcConfig& config) {
  if (obs_dim <= 0 || ctx_dim < 0 || config.embed_dim <= 0) {
    throw ShapeError("connectivity dimensions must be positive");
  }
  Rng rng(derive_seed(config.seed, seed_stream::kInit));
  ConnectivityModel m;
  m.obs_dim = obs_dim;
  m.ctx_dim = ctx_dim;
  m.embed_dim = config.embed_dim;
  m.horizon = config.horizon;
  m.encoder = make_mlp(mlp_sizes(obs_dim + ctx_dim, config.hidden, config.depth, config.embed_dim),
                       config.activation, Activation::Identity, rng);
  m.bilinear = Matrix::Zero(config.embed_dim, config.embed_dim);
  return m;
}

Matrix embed(const ConnectivityModel& model, const Matrix& obs, std::span<const double> context) {
  if (obs.cols() != model.obs_dim || static_cast<int>(context.size()) != model.ctx_dim) {
    throw ShapeError("embed: observation/context shape does not match the model");
  }
  return mlp_apply(model.encoder, with_context(obs, context));
}

double score_pair(const ConnectivityModel& model, std::span<const double> from,
                  std::span<const double> to, std::span<const double> context) {
  if (from.size() != to.size()) throw ShapeError("score_pair: observation lengths differ");
  Matrix obs(2, static_cast<Eigen::Index>(from.size()));
  obs.row(0) = row_vector(from);
  obs.row(1) = row_vector(to);
  const Matrix z = embed(model, obs, context);
  return (z.row(1) * model.bilinear * z.row(0).transpose())(0, 0);
}

Matrix CpcScorer::logit_matrix(const Matrix& nodes, std::span<const double> context) const {
  const Matrix z = embed(*model_, nodes, context);
  return z * model_->bilinear * z.transpose();
}

double CpcScorer::logit(std::span<const double> from, std::span<const double> to,
                        std::span<const double> context) const {
  return score_pair(*model_, from, to, context);
}

TrajectoryIndex::TrajectoryIndex(const World& world, const TransitionDataset& data, Split split)
    : obs_dim_(world.observation_dim()), ctx_dim_(world.context_dim()) {
  for (const Context& c : data.contexts) encodings_[c.id] = world.encode_context(c);
  for (const Trajectory& t : data.trajectories) {
    if (split != Split::All) {
      const bool val = is_validation_trajectory(t.trajectory_id, data.spec.trajectories_per_context);
      if (val != (split == Split::Validation)) continue;
    }
    if (!encodings_.count(t.context_id)) throw EvaluationError("trajectory references unknown context");
    trajectories_.push_back(&t);
    auto& refs = by_context_[t.context_id];
    for (std::size_t i = 0; i < t.observations.size(); ++i) refs.push_back({&t, i});
  }
}

const std::vector<TrajectoryIndex::ObsRef>& TrajectoryIndex::observations(int context_id) const {
  const auto it = by_context_.find(context_id);
  if (it == by_context_.end() || it->second.empty()) {
    throw EvaluationError("context " + std::to_string(context_id) + " has no data");
  }
  return it->second;
}

const std::vector<double>& TrajectoryIndex::encoding(int context_id) const {
  const auto it = encodings_.find(context_id);
  if (it == encodings_.end()) throw EvaluationError("unknown context " + std::to_string(context_id));
  return it->second;
}

CpcBatch sample_cpc_batch(const TrajectoryIndex& index, const HallucinationPool* pool,
                          const CpcConfig& config, Rng& rng) {
  if (config.candidates < 2) throw ConfigError("cpc.N must be at least 2", "cpc.N");
  if (config.horizon < 1) throw ConfigError("cpc.h must be at least 1", "cpc.h");
  std::vector<const Trajectory*> eligible;
  for (const Trajectory* t : index.trajectories()) {
    if (static_cast<int>(t->length()) >= config.horizon) eligible.push_back(t);
  }
  if (eligible.empty()) throw EvaluationError("no trajectory is longer than the positive horizon");

  const int B = config.batch_size;
  const int N = config.candidates;
  CpcBatch batch;
  batch.num_candidates = N;
  batch.anchors.resize(B, static_cast<Eigen::Index>(index.obs_dim()));
  batch.candidates.resize(static_cast<Eigen::Index>(B) * N, static_cast<Eigen::Index>(index.obs_dim()));
  batch.contexts.resize(B, static_cast<Eigen::Index>(index.ctx_dim()));
  batch.hallucinated.assign(static_cast<std::size_t>(B * N), 0);

  std::uniform_int_distribution<std::size_t> pick_traj(0, eligible.size() - 1);
  std::uniform_int_distribution<int> pick_offset(1, config.horizon);
  for (int b = 0; b < B; ++b) {
    const Trajectory& traj = *eligible[pick_traj(rng)];
    const int k = pick_offset(rng);
    const auto t = std::uniform_int_distribution<std::size_t>(0, traj.length() - static_cast<std::size_t>(k))(rng);
    const std::size_t pos = t + static_cast<std::size_t>(k);
    batch.offsets.push_back(k);
    copy_row(batch.anchors, b, traj.observations[t].data);
    copy_row(batch.contexts, b, index.encoding(traj.context_id));
    const Eigen::Index base = static_cast<Eigen::Index>(b) * N;
    copy_row(batch.candidates, base, traj.observations[pos].data);

    int n_halluc = 0;
    const Matrix* halluc = nullptr;
    if (pool) {
      const auto it = pool->find(traj.context_id);
      if (it != pool->end() && it->second.rows() > 0) {
        halluc = &it->second;
        n_halluc = static_cast<int>(std::lround(config.halluc_fraction * (N - 1)));
        n_halluc = std::clamp(n_halluc, 0, N - 1);
      }
    }
    std::vector<Eigen::Index> near;
    if (n_halluc > 0 && config.halluc_neighbors > 0 && config.halluc_neighbors < halluc->rows()) {
      const Eigen::VectorXd d2 = (halluc->rowwise() - batch.anchors.row(b)).rowwise().squaredNorm();
      near.resize(static_cast<std::size_t>(halluc->rows()));
      std::iota(near.begin(), near.end(), Eigen::Index{0});
      const auto k = static_cast<std::ptrdiff_t>(config.halluc_neighbors);
      std::partial_sort(near.begin(), near.begin() + k, near.end(), [&](Eigen::Index x, Eigen::Index y) {
        return d2(x) < d2(y) || (d2(x) == d2(y) && x < y);
      });
      near.resize(static_cast<std::size_t>(k));
    }
    for (int n = 1; n <= n_halluc; ++n) {
      const Eigen::Index r =
          near.empty() ? std::uniform_int_distribution<Eigen::Index>(0, halluc->rows() - 1)(rng)
                       : near[std::uniform_int_distribution<std::size_t>(0, near.size() - 1)(rng)];
      batch.candidates.row(base + n) = halluc->row(r);
      batch.hallucinated[static_cast<std::size_t>(base + n)] = 1;
    }
    const auto& refs = index.observations(traj.context_id);
    std::uniform_int_distribution<std::size_t> pick_obs(0, refs.size() - 1);
    for (int n = n_halluc + 1; n < N; ++n) {
      for (int attempt = 0;; ++attempt) {
        const auto& ref = refs[pick_obs(rng)];
        const bool is_positive = ref.trajectory == &traj && ref.t == pos;
        if (is_positive && refs.size() > 1) continue;
        if (is_positive) throw EvaluationError("context has no observation besides the positive");
        copy_row(batch.candidates, base + n, ref.trajectory->observations[ref.t].data);
        break;
      }
    }
  }
  return batch;
}

CpcBatch sample_cpc_batch(const World& world, const TransitionDataset& data,
                          const HallucinationPool* pool, const CpcConfig& config,
                          std::uint64_t seed) {
  const TrajectoryIndex index(world, data, TrajectoryIndex::Split::All);
  Rng rng(seed);
  return sample_cpc_batch(index, pool, config, rng);
}

double cpc_loss_from_logits(const Matrix& logits) {
  if (logits.rows() == 0 || logits.cols() == 0) throw UsageError("cpc loss of an empty batch");
  double total = 0.0;
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    const Eigen::RowVectorXd row = logits.row(b);
    total += log_sum_exp(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))) -
             row(0);
  }
  return total / static_cast<double>(logits.rows());
}

ad::Var cpc_logits(const ConnectivityModel& shape, std::span<const ad::Var> params,
                   const CpcBatch& batch) {
  if (batch.size() == 0) throw UsageError("cpc loss of an empty batch");
  const std::size_t n_enc = 2 * shape.encoder.layers.size();
  if (params.size() != n_enc + 1) throw ShapeError("cpc: wrong parameter count");
  if (batch.anchors.cols() != shape.obs_dim || batch.contexts.cols() != shape.ctx_dim ||
      batch.candidates.rows() != batch.size() * batch.num_candidates) {
    throw ShapeError("cpc: batch shape does not match the model");
  }
  ad::Tape& tape = *params.front().tape();
  const MlpVars enc = bind(params.subspan(0, n_enc), shape.encoder);
  const ad::Var w = params[n_enc];
  const ad::Var za = mlp_apply(enc, tape.constant(hstack(batch.anchors, batch.contexts)));
  const Matrix cand_ctx = repeat_rows(batch.contexts, batch.num_candidates);
  const ad::Var zc = mlp_apply(enc, tape.constant(hstack(batch.candidates, cand_ctx)));
  // Row b of za * W^T is (W z_b)^T, so each candidate row dotted with it is z_c^T W z_b.
  const ad::Var projected = ad::repeat_rows(ad::matmul_nt(za, w), batch.num_candidates);
  const ad::Var flat = ad::row_sum(ad::mul(zc, projected));
  return ad::reshape(flat, batch.size(), batch.num_candidates);
}

ad::Var cpc_loss(const ConnectivityModel& shape, std::span<const ad::Var> params,
                 const CpcBatch& batch) {
  const ad::Var logits = cpc_logits(shape, params, batch);
  return ad::mean(ad::sub(ad::log_sum_exp_rows(logits), ad::column(logits, 0)));
}

double cpc_loss(const ConnectivityModel& model, const CpcBatch& batch) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Matrix* p : model.parameters()) vars.push_back(tape.constant(*p));
  return cpc_loss(model, vars, batch).scalar();
}

CpcTrainResult train_cpc(const World& world, const TransitionDataset& data,
                         const HallucinationPool* pool, const CpcConfig& config, const LogFn& log) {
  const TrajectoryIndex train_index(world, data, TrajectoryIndex::Split::Train);
  TrajectoryIndex val_index(world, data, TrajectoryIndex::Split::Validation);
  const TrajectoryIndex& val_source = val_index.trajectories().empty() ? train_index : val_index;
  if (train_index.trajectories().empty()) throw EvaluationError("train_cpc: empty dataset");

  ConnectivityModel model =
      make_connectivity(static_cast<int>(world.observation_dim()), static_cast<int>(world.context_dim()), config);
  auto params = model.parameters();
  OptimizerState opt = make_adam(params, config.adam);

  Rng val_rng(derive_seed(config.seed, seed_stream::kValidation));
  std::vector<CpcBatch> val_batches;
  // Held-out loss uses dataset negatives only, so it stays comparable across pools.
  for (int i = 0; i < config.validation_batches; ++i) {
    val_batches.push_back(sample_cpc_batch(val_source, nullptr, config, val_rng));
  }
  const auto validate = [&](const ConnectivityModel& m) {
    double total = 0.0;
    for (const auto& b : val_batches) total += cpc_loss(m, b);
    return val_batches.empty() ? 0.0 : total / static_cast<double>(val_batches.size());
  };

  CpcTrainResult result;
  result.curve.initial_validation = validate(model);
  result.model = model;
  Rng rng(derive_seed(config.seed, seed_stream::kTraining));
  std::vector<Matrix> grads;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int s = 0; s < config.steps_per_epoch; ++s) {
      const CpcBatch batch = sample_cpc_batch(train_index, pool, config, rng);
      const double loss = loss_and_grad(
          [&](ad::Tape&, std::span<const ad::Var> vars) { return cpc_loss(model, vars, batch); }, params,
          grads);
      require_finite(loss, "cpc loss", epoch, step);
      adam_step(params, grads, opt);
      epoch_loss += loss;
      ++step;
    }
    const double val = validate(model);
    require_finite(val, "cpc validation loss", epoch);
    result.curve.train_loss.push_back(epoch_loss / std::max(1, config.steps_per_epoch));
    result.curve.validation_loss.push_back(val);
    if (val < result.curve.best_validation) {
      result.curve.best_validation = val;
      result.curve.best_epoch = epoch;
      result.model = model;
    }
    if (log) {
      log("cpc epoch " + std::to_string(epoch) + " train " + std::to_string(result.curve.train_loss.back()) +
          " val " + std::to_string(val));
    }
  }
  return result;
}

RankingReport rank_successors(const PairScorer& scorer, const World& world,
                              std::span<const Trajectory> trajectories, const Context& context,
                              int anchors, int candidates, int horizon, double top_fraction,
                              std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> refs;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].context_id != context.id) continue;
    for (std::size_t t = 0; t < trajectories[i].observations.size(); ++t) refs.emplace_back(i, t);
    if (static_cast<int>(trajectories[i].length()) >= horizon) eligible.push_back(i);
  }
  if (eligible.empty() || static_cast<int>(refs.size()) < candidates) {
    throw EvaluationError("not enough held-out data for successor ranking");
  }
  const std::vector<double> enc = world.encode_context(context);
  Rng rng(seed);
  RankingReport report;
  report.candidates = candidates;
  const int top = std::max(1, static_cast<int>(std::floor(top_fraction * candidates)));
  for (int a = 0; a < anchors; ++a) {
    const std::size_t ti = eligible[std::uniform_int_distribution<std::size_t>(0, eligible.size() - 1)(rng)];
    const Trajectory& traj = trajectories[ti];
    const int k = std::uniform_int_distribution<int>(1, horizon)(rng);
    const auto t = std::uniform_int_distribution<std::size_t>(0, traj.length() - static_cast<std::size_t>(k))(rng);
    const std::size_t pos = t + static_cast<std::size_t>(k);
    std::vector<std::pair<std::size_t, std::size_t>> pool = refs;
    pool.erase(std::remove(pool.begin(), pool.end(), std::make_pair(ti, pos)), pool.end());
    std::shuffle(pool.begin(), pool.end(), rng);

    const auto& anchor = traj.observations[t].data;
    const double positive = scorer.logit(anchor, traj.observations[pos].data, enc);
    int rank = 1;
    for (int c = 0; c < candidates - 1; ++c) {
      const auto& [i, s] = pool[static_cast<std::size_t>(c)];
      if (scorer.logit(anchor, trajectories[i].observations[s].data, enc) > positive) ++rank;
    }
    report.ranks.push_back(rank);
    if (rank <= top) ++report.hits;
  }
  report.hit_rate = anchors > 0 ? static_cast<double>(report.hits) / anchors : 0.0;
  return report;
}

// SPTM classifier.

std::vector<Matrix*> SptmClassifier::parameters() {
  auto p = encoder.parameters();
  for (Matrix* m : head.parameters()) p.push_back(m);
  return p;
}

std::vector<const Matrix*> SptmClassifier::parameters() const {
  auto p = encoder.parameters();
  for (const Matrix* m : head.parameters()) p.push_back(m);
  return p;
}

SptmClassifier make_sptm(int obs_dim, int ctx_dim, const SptmConfig& config) {
  if (config.negative_threshold <= config.horizon) {
    throw ConfigError("sptm.l must exceed sptm.h", "sptm.l");
  }
  Rng rng(derive_seed(config.seed, seed_stream::kInit));
  SptmClassifier m;
  m.obs_dim = obs_dim;
  m.ctx_dim = ctx_dim;
  m.embed_dim = config.embed_dim;
  m.horizon = config.horizon;
  m.negative_threshold = config.negative_threshold;
  m.encoder = make_mlp(mlp_sizes(obs_dim + ctx_dim, config.hidden, config.depth, config.embed_dim),
                       config.activation, Activation::Identity, rng);
  m.head = make_mlp(mlp_sizes(2 * config.embed_dim, config.head_hidden, 1, 1), config.activation,
                    Activation::Identity, rng);
  return m;
}

std::optional<bool> sptm_label(int offset, int horizon, int negative_threshold) {
  const int d = std::abs(offset);
  if (d <= horizon) return true;
  if (d >= negative_threshold) return false;
  return std::nullopt;
}

LabeledPairs sample_sptm_batch(const TrajectoryIndex& index, const SptmConfig& config, Rng& rng) {
  std::vector<const Trajectory*> eligible;
  for (const Trajectory* t : index.trajectories()) {
    if (t->length() >= 1) eligible.push_back(t);
  }
  if (eligible.empty()) throw EvaluationError("no trajectories to sample classifier pairs from");
  const int B = config.batch_size;
  LabeledPairs batch;
  batch.from.resize(B, static_cast<Eigen::Index>(index.obs_dim()));
  batch.to.resize(B, static_cast<Eigen::Index>(index.obs_dim()));
  batch.contexts.resize(B, static_cast<Eigen::Index>(index.ctx_dim()));
  batch.labels.resize(B, 1);
  std::uniform_int_distribution<std::size_t> pick_traj(0, eligible.size() - 1);
  for (int b = 0; b < B; ++b) {
    const Trajectory& traj = *eligible[pick_traj(rng)];
    copy_row(batch.contexts, b, index.encoding(traj.context_id));
    const bool positive = b % 2 == 0;
    if (positive) {
      const int kmax = std::min<int>(config.horizon, static_cast<int>(traj.length()));
      const int k = std::uniform_int_distribution<int>(1, kmax)(rng);
      const auto t = std::uniform_int_distribution<std::size_t>(0, traj.length() - static_cast<std::size_t>(k))(rng);
      copy_row(batch.from, b, traj.observations[t].data);
      copy_row(batch.to, b, traj.observations[t + static_cast<std::size_t>(k)].data);
      batch.labels(b, 0) = 1.0;
      continue;
    }
    const auto& refs = index.observations(traj.context_id);
    std::uniform_int_distribution<std::size_t> pick_t(0, traj.length());
    std::uniform_int_distribution<std::size_t> pick_obs(0, refs.size() - 1);
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw EvaluationError("cannot find a negative pair for the classifier");
      // Redraw the anchor too: a mid-trajectory anchor may have no far frame.
      const std::size_t t = pick_t(rng);
      const auto& ref = refs[pick_obs(rng)];
      if (ref.trajectory == &traj) {
        const int offset = static_cast<int>(ref.t) - static_cast<int>(t);
        const auto label = sptm_label(offset, config.horizon, config.negative_threshold);
        if (!label.has_value() || *label) continue;
      }
      copy_row(batch.from, b, traj.observations[t].data);
      copy_row(batch.to, b, ref.trajectory->observations[ref.t].data);
      batch.labels(b, 0) = 0.0;
      break;
    }
  }
  return batch;
}

ad::Var sptm_logits(const SptmClassifier& shape, std::span<const ad::Var> params,
                    const LabeledPairs& batch) {
  if (batch.size() == 0) throw UsageError("classifier loss of an empty batch");
  const std::size_t n_enc = 2 * shape.encoder.layers.size();
  if (params.size() != n_enc + 2 * shape.head.layers.size()) {
    throw ShapeError("sptm: wrong parameter count");
  }
  if (batch.from.cols() != shape.obs_dim || batch.contexts.cols() != shape.ctx_dim) {
    throw ShapeError("sptm: batch shape does not match the model");
  }
  ad::Tape& tape = *params.front().tape();
  const MlpVars enc = bind(params.subspan(0, n_enc), shape.encoder);
  const MlpVars head = bind(params.subspan(n_enc), shape.head);
  const ad::Var zf = mlp_apply(enc, tape.constant(hstack(batch.from, batch.contexts)));
  const ad::Var zt = mlp_apply(enc, tape.constant(hstack(batch.to, batch.contexts)));
  return mlp_apply(head, ad::concat_cols(zf, zt));
}

ad::Var sptm_bce_loss(const SptmClassifier& shape, std::span<const ad::Var> params,
                      const LabeledPairs& batch) {
  const ad::Var logits = sptm_logits(shape, params, batch);
  ad::Tape& tape = *logits.tape();
  const ad::Var y = tape.constant(batch.labels);
  // -[y log s(x) + (1 - y) log(1 - s(x))] = softplus(x) - y x
  return ad::mean(ad::sub(ad::softplus(logits), ad::mul(y, logits)));
}

double sptm_bce_loss(const SptmClassifier& model, const LabeledPairs& batch) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Matrix* p : model.parameters()) vars.push_back(tape.constant(*p));
  return sptm_bce_loss(model, vars, batch).scalar();
}

double bce_from_logits(std::span<const double> logits, std::span<const double> labels) {
  if (logits.empty()) throw UsageError("classifier loss of an empty batch");
  if (logits.size() != labels.size()) throw ShapeError("bce: logits and labels differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    const double softplus = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    total += softplus - labels[i] * x;
  }
  return total / static_cast<double>(logits.size());
}

double sptm_logit(const SptmClassifier& model, std::span<const double> from,
                  std::span<const double> to, std::span<const double> context) {
  if (from.size() != to.size() || static_cast<int>(from.size()) != model.obs_dim ||
      static_cast<int>(context.size()) != model.ctx_dim) {
    throw ShapeError("sptm_logit: shape does not match the model");
  }
  Matrix obs(2, model.obs_dim);
  obs.row(0) = row_vector(from);
  obs.row(1) = row_vector(to);
  const Matrix z = mlp_apply(model.encoder, with_context(obs, context));
  Matrix pair(1, 2 * model.embed_dim);
  pair << z.row(0), z.row(1);
  return mlp_apply(model.head, pair)(0, 0);
}

Matrix SptmScorer::logit_matrix(const Matrix& nodes, std::span<const double> context) const {
  const SptmClassifier& m = *model_;
  if (nodes.cols() != m.obs_dim) throw ShapeError("sptm: node shape does not match the model");
  const Matrix z = mlp_apply(m.encoder, with_context(nodes, context));
  const Eigen::Index n = nodes.rows();
  Matrix logits(n, n);
  Matrix pairs(n, 2 * m.embed_dim);
  pairs.leftCols(m.embed_dim) = z;  // from = every node j
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) pairs.row(j).tail(m.embed_dim) = z.row(i);
    logits.row(i) = mlp_apply(m.head, pairs).col(0).transpose();
  }
  return logits;
}

double SptmScorer::logit(std::span<const double> from, std::span<const double> to,
                         std::span<const double> context) const {
  return sptm_logit(*model_, from, to, context);
}

SptmTrainResult train_sptm(const World& world, const TransitionDataset& data,
                           const SptmConfig& config, const LogFn& log) {
  const TrajectoryIndex train_index(world, data, TrajectoryIndex::Split::Train);
  const TrajectoryIndex val_index(world, data, TrajectoryIndex::Split::Validation);
  const TrajectoryIndex& val_source = val_index.trajectories().empty() ? train_index : val_index;
  if (train_index.trajectories().empty()) throw EvaluationError("train_sptm: empty dataset");

  SptmClassifier model =
      make_sptm(static_cast<int>(world.observation_dim()), static_cast<int>(world.context_dim()), config);
  auto params = model.parameters();
  OptimizerState opt = make_adam(params, config.adam);
  Rng val_rng(derive_seed(config.seed, seed_stream::kValidation));
  std::vector<LabeledPairs> val_batches;
  for (int i = 0; i < config.validation_batches; ++i) {
    val_batches.push_back(sample_sptm_batch(val_source, config, val_rng));
  }
  const auto validate = [&](const SptmClassifier& m) {
    double total = 0.0;
    for (const auto& b : val_batches) total += sptm_bce_loss(m, b);
    return val_batches.empty() ? 0.0 : total / static_cast<double>(val_batches.size());
  };

  SptmTrainResult result;
  result.curve.initial_validation = validate(model);
  result.model = model;
  Rng rng(derive_seed(config.seed, seed_stream::kTraining));
  std::vector<Matrix> grads;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int s = 0; s < config.steps_per_epoch; ++s) {
      const LabeledPairs batch = sample_sptm_batch(train_index, config, rng);
      const double loss = loss_and_grad(
          [&](ad::Tape&, std::span<const ad::Var> vars) { return sptm_bce_loss(model, vars, batch); },
          params, grads);
      require_finite(loss, "sptm loss", epoch, step);
      adam_step(params, grads, opt);
      epoch_loss += loss;
      ++step;
    }
    const double val = validate(model);
    require_finite(val, "sptm validation loss", epoch);
    result.curve.train_loss.push_back(epoch_loss / std::max(1, config.steps_per_epoch));
    result.curve.validation_loss.push_back(val);
    if (val < result.curve.best_validation) {
      result.curve.best_validation = val;
      result.curve.best_epoch = epoch;
      result.model = model;
    }
    if (log) {
      log("sptm epoch " + std::to_string(epoch) + " train " + std::to_string(result.curve.train_loss.back()) +
          " val " + std::to_string(val));
    }
  }
  return result;
}

Checkpoint to_checkpoint(const ConnectivityModel& model) {
  Checkpoint ckpt;
  ckpt.kind = "CPCE";
  ckpt.meta = {static_cast<double>(model.obs_dim), static_cast<double>(model.ctx_dim),
               static_cast<double>(model.embed_dim), static_cast<double>(model.horizon)};
  append_mlp(ckpt, model.encoder);
  ckpt.tensors.push_back(model.bilinear);
  return ckpt;
}

ConnectivityModel connectivity_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "CPCE") throw IoError("not a CPCE checkpoint", ckpt.kind);
  if (ckpt.meta.size() < 4) throw IoError("CPCE checkpoint metadata truncated", "<checkpoint>");
  ConnectivityModel m;
  m.obs_dim = static_cast<int>(ckpt.meta[0]);
  m.ctx_dim = static_cast<int>(ckpt.meta[1]);
  m.embed_dim = static_cast<int>(ckpt.meta[2]);
  m.horizon = static_cast<int>(ckpt.meta[3]);
  std::size_t meta = 4;
  std::size_t tensor = 0;
  m.encoder = read_mlp(ckpt, meta, tensor);
  if (tensor >= ckpt.tensors.size()) throw IoError("CPCE checkpoint is missing W", "<checkpoint>");
  m.bilinear = ckpt.tensors[tensor];
  if (m.encoder.input_dim() != m.obs_dim + m.ctx_dim || m.encoder.output_dim() != m.embed_dim ||
      m.bilinear.rows() != m.embed_dim || m.bilinear.cols() != m.embed_dim) {
    throw IoError("CPCE checkpoint dimensions are inconsistent", "<checkpoint>");
  }
  return m;
}

Checkpoint to_checkpoint(const SptmClassifier& model) {
  Checkpoint ckpt;
  ckpt.kind = "SPTM";
  ckpt.meta = {static_cast<double>(model.obs_dim), static_cast<double>(model.ctx_dim),
               static_cast<double>(model.embed_dim), static_cast<double>(model.horizon),
               static_cast<double>(model.negative_threshold)};
  append_mlp(ckpt, model.encoder);
  append_mlp(ckpt, model.head);
  return ckpt;
}

SptmClassifier sptm_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "SPTM") throw IoError("not an SPTM checkpoint", ckpt.kind);
  if (ckpt.meta.size() < 5) throw IoError("SPTM checkpoint metadata truncated", "<checkpoint>");
  SptmClassifier m;
  m.obs_dim = static_cast<int>(ckpt.meta[0]);
  m.ctx_dim = static_cast<int>(ckpt.meta[1]);
  m.embed_dim = static_cast<int>(ckpt.meta[2]);
  m.horizon = static_cast<int>(ckpt.meta[3]);
  m.negative_threshold = static_cast<int>(ckpt.meta[4]);
  std::size_t meta = 5;
  std::size_t tensor = 0;
  m.encoder = read_mlp(ckpt, meta, tensor);
  m.head = read_mlp(ckpt, meta, tensor);
  if (m.encoder.input_dim() != m.obs_dim + m.ctx_dim || m.encoder.output_dim() != m.embed_dim ||
      m.head.input_dim() != 2 * m.embed_dim || m.head.output_dim() != 1) {
    throw IoError("SPTM checkpoint dimensions are inconsistent", "<checkpoint>");
  }
  return m;
}

}  // namespace htm
