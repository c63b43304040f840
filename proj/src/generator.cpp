#include "htm/generator.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "htm/errors.hpp"

namespace htm {

std::vector<Matrix*> CvaeModel::parameters() {
  auto p = encoder.parameters();
  for (Matrix* m : decoder.parameters()) p.push_back(m);
  return p;
}

std::vector<const Matrix*> CvaeModel::parameters() const {
  auto p = encoder.parameters();
  for (const Matrix* m : decoder.parameters()) p.push_back(m);
  return p;
}

CvaeModel make_cvae(int obs_dim, int ctx_dim, const CvaeConfig& config) {
  if (obs_dim <= 0 || ctx_dim < 0 || config.latent_dim <= 0) {
    throw ShapeError("cvae dimensions must be positive");
  }
  Rng rng(derive_seed(config.seed, seed_stream::kInit));
  CvaeModel m;
  m.obs_dim = obs_dim;
  m.ctx_dim = ctx_dim;
  m.latent_dim = config.latent_dim;
  m.beta = config.beta;
  const auto enc = mlp_sizes(obs_dim + ctx_dim, config.hidden, config.depth, 2 * config.latent_dim);
  const auto dec = mlp_sizes(config.latent_dim + ctx_dim, config.hidden, config.depth, obs_dim);
  m.encoder = make_mlp(enc, config.activation, Activation::Identity, rng);
  m.decoder = make_mlp(dec, config.activation, Activation::Identity, rng);
  return m;
}

namespace {

void check_batch(const CvaeModel& m, const Matrix& obs, const Matrix& ctx) {
  if (obs.rows() == 0) throw ShapeError("cvae_elbo: empty batch");
  if (obs.cols() != m.obs_dim || ctx.cols() != m.ctx_dim || ctx.rows() != obs.rows()) {
    throw ShapeError("cvae_elbo: batch shape does not match the model");
  }
}

Matrix concat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

ElboVars cvae_elbo(const CvaeModel& shape, std::span<const ad::Var> params, const Matrix& obs,
                   const Matrix& ctx, const Matrix& noise) {
  check_batch(shape, obs, ctx);
  if (noise.rows() != obs.rows() || noise.cols() != shape.latent_dim) {
    throw ShapeError("cvae_elbo: noise shape does not match batch x latent");
  }
  const std::size_t n_enc = 2 * shape.encoder.layers.size();
  if (params.size() != n_enc + 2 * shape.decoder.layers.size()) {
    throw ShapeError("cvae_elbo: wrong parameter count");
  }
  ad::Tape& tape = *params.front().tape();
  const MlpVars enc = bind(params.subspan(0, n_enc), shape.encoder);
  const MlpVars dec = bind(params.subspan(n_enc), shape.decoder);

  const ad::Var x = tape.constant(obs);
  const ad::Var c = tape.constant(ctx);
  const ad::Var stats = mlp_apply(enc, ad::concat_cols(x, c));
  const ad::Var mu = ad::slice_cols(stats, 0, shape.latent_dim);
  const ad::Var log_var = ad::slice_cols(stats, shape.latent_dim, shape.latent_dim);
  const ad::Var sigma = ad::exp(ad::scale(log_var, 0.5));
  const ad::Var z = ad::add(mu, ad::mul(sigma, tape.constant(noise)));
  const ad::Var recon = mlp_apply(dec, ad::concat_cols(z, c));

  const ad::Var sse = ad::row_sum(ad::square(ad::sub(recon, x)));
  const ad::Var kl_rows = ad::scale(
      ad::row_sum(ad::sub(ad::add_scalar(ad::add(ad::square(mu), ad::exp(log_var)), -1.0), log_var)),
      0.5);
  ElboVars out;
  out.reconstruction = ad::mean(sse);
  out.kl = ad::mean(kl_rows);
  out.total = ad::add(out.reconstruction, ad::scale(out.kl, shape.beta));
  return out;
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

ElboTerms cvae_elbo(const CvaeModel& model, const Matrix& obs, const Matrix& ctx,
                    const Matrix& noise) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const Matrix* p : model.parameters()) vars.push_back(tape.constant(*p));
  const ElboVars v = cvae_elbo(model, vars, obs, ctx, noise);
  return {v.total.scalar(), v.reconstruction.scalar(), v.kl.scalar()};
}

ElboTerms cvae_elbo(const CvaeModel& model, const Matrix& obs, const Matrix& ctx,
                    std::uint64_t noise_seed) {
  return cvae_elbo(model, obs, ctx, standard_normal(obs.rows(), model.latent_dim, noise_seed));
}

Posterior cvae_posterior(const CvaeModel& model, const Matrix& obs, const Matrix& ctx) {
  check_batch(model, obs, ctx);
  const Matrix stats = mlp_apply(model.encoder, concat(obs, ctx));
  return {stats.leftCols(model.latent_dim), stats.rightCols(model.latent_dim)};
}

std::vector<double> gaussian_kl(const Posterior& q) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < q.mean.rows(); ++i) {
    double kl = 0.0;
    for (Eigen::Index j = 0; j < q.mean.cols(); ++j) {
      const double m = q.mean(i, j);
      const double lv = q.log_var(i, j);
      kl += 0.5 * (m * m + std::exp(lv) - 1.0 - lv);
    }
    out.push_back(kl);
  }
  return out;
}

namespace {

struct ObsTable {
  Matrix obs;
  Matrix ctx;
};

ObsTable gather(const World& world, const TransitionDataset& data, bool validation) {
  std::vector<const std::vector<double>*> obs_rows;
  std::vector<const std::vector<double>*> ctx_rows;
  std::map<int, std::vector<double>> encodings;
  for (const Context& c : data.contexts) encodings[c.id] = world.encode_context(c);
  for (const Trajectory& t : data.trajectories) {
    if (is_validation_trajectory(t.trajectory_id, data.spec.trajectories_per_context) != validation) {
      continue;
    }
    const auto it = encodings.find(t.context_id);
    if (it == encodings.end()) throw EvaluationError("trajectory references unknown context");
    for (const Observation& o : t.observations) {
      obs_rows.push_back(&o.data);
      ctx_rows.push_back(&it->second);
    }
  }
  ObsTable table;
  table.obs.resize(static_cast<Eigen::Index>(obs_rows.size()), static_cast<Eigen::Index>(world.observation_dim()));
  table.ctx.resize(static_cast<Eigen::Index>(ctx_rows.size()), static_cast<Eigen::Index>(world.context_dim()));
  for (std::size_t i = 0; i < obs_rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    table.obs.row(r) = Eigen::Map<const Eigen::RowVectorXd>(obs_rows[i]->data(), table.obs.cols());
    table.ctx.row(r) = Eigen::Map<const Eigen::RowVectorXd>(ctx_rows[i]->data(), table.ctx.cols());
  }
  return table;
}

Matrix take_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

}  // namespace

CvaeTrainResult train_cvae(const World& world, const TransitionDataset& data,
                           const CvaeConfig& config, const LogFn& log) {
  const ObsTable train = gather(world, data, false);
  ObsTable val = gather(world, data, true);
  if (train.obs.rows() == 0) throw EvaluationError("train_cvae: empty dataset");
  if (val.obs.rows() == 0) val = train;

  CvaeModel model = make_cvae(static_cast<int>(world.observation_dim()),
                              static_cast<int>(world.context_dim()), config);
  auto params = model.parameters();
  OptimizerState opt = make_adam(params, config.adam);
  Rng rng(derive_seed(config.seed, seed_stream::kTraining));
  const Matrix val_noise =
      standard_normal(val.obs.rows(), model.latent_dim, derive_seed(config.seed, seed_stream::kValidation));

  CvaeTrainResult result;
  result.curve.initial_validation = cvae_elbo(model, val.obs, val.ctx, val_noise).total;
  result.model = model;

  std::vector<std::size_t> order(static_cast<std::size_t>(train.obs.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(std::max(1, config.batch_size));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Matrix> grads;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(batch, order.size() - start));
      const Matrix obs = take_rows(train.obs, idx);
      const Matrix ctx = take_rows(train.ctx, idx);
      Matrix noise(obs.rows(), model.latent_dim);
      for (Eigen::Index k = 0; k < noise.size(); ++k) noise.data()[k] = normal(rng);
      const double loss = loss_and_grad(
          [&](ad::Tape&, std::span<const ad::Var> vars) {
            return cvae_elbo(model, vars, obs, ctx, noise).total;
          },
          params, grads);
      require_finite(loss, "cvae loss", epoch, step);
      adam_step(params, grads, opt);
      epoch_loss += loss;
      ++batches;
      ++step;
    }
    const double val_loss = cvae_elbo(model, val.obs, val.ctx, val_noise).total;
    require_finite(val_loss, "cvae validation loss", epoch);
    result.curve.train_loss.push_back(epoch_loss / std::max(1, batches));
    result.curve.validation_loss.push_back(val_loss);
    if (val_loss < result.curve.best_validation) {
      result.curve.best_validation = val_loss;
      result.curve.best_epoch = epoch;
      result.model = model;
    }
    if (log) {
      log("cvae epoch " + std::to_string(epoch) + " train " + std::to_string(result.curve.train_loss.back()) +
          " val " + std::to_string(val_loss));
    }
  }
  return result;
}

HallucinationSet hallucinate(const CvaeModel& model, std::span<const double> context_encoding,
                             int count, std::uint64_t seed, ObservationMode mode, int context_id) {
  if (count < 0) throw UsageError("hallucinate: negative sample count");
  if (static_cast<int>(context_encoding.size()) != model.ctx_dim) {
    throw ShapeError("hallucinate: context encoding length does not match the model");
  }
  HallucinationSet set;
  set.context_id = context_id;
  set.seed = seed;
  if (count == 0) return set;
  const Matrix z = standard_normal(count, model.latent_dim, seed);
  Matrix input(count, model.latent_dim + model.ctx_dim);
  input.leftCols(model.latent_dim) = z;
  const Matrix ctx = row_vector(context_encoding);
  for (Eigen::Index i = 0; i < count; ++i) input.row(i).tail(model.ctx_dim) = ctx.row(0);
  const Matrix out = mlp_apply(model.decoder, input).cwiseMax(0.0).cwiseMin(1.0);
  for (Eigen::Index i = 0; i < count; ++i) {
    Observation o;
    o.mode = mode;
    o.data.assign(out.row(i).data(), out.row(i).data() + out.cols());
    set.samples.push_back(std::move(o));
  }
  return set;
}

Checkpoint to_checkpoint(const CvaeModel& model) {
  Checkpoint ckpt;
  ckpt.kind = "CVAE";
  ckpt.meta = {static_cast<double>(model.obs_dim), static_cast<double>(model.ctx_dim),
               static_cast<double>(model.latent_dim), model.beta};
  append_mlp(ckpt, model.encoder);
  append_mlp(ckpt, model.decoder);
  return ckpt;
}

CvaeModel cvae_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "CVAE") throw IoError("not a CVAE checkpoint", ckpt.kind);
  if (ckpt.meta.size() < 4) throw IoError("CVAE checkpoint metadata truncated", "<checkpoint>");
  CvaeModel m;
  m.obs_dim = static_cast<int>(ckpt.meta[0]);
  m.ctx_dim = static_cast<int>(ckpt.meta[1]);
  m.latent_dim = static_cast<int>(ckpt.meta[2]);
  m.beta = ckpt.meta[3];
  std::size_t meta = 4;
  std::size_t tensor = 0;
  m.encoder = read_mlp(ckpt, meta, tensor);
  m.decoder = read_mlp(ckpt, meta, tensor);
  if (m.encoder.input_dim() != m.obs_dim + m.ctx_dim || m.encoder.output_dim() != 2 * m.latent_dim ||
      m.decoder.input_dim() != m.latent_dim + m.ctx_dim || m.decoder.output_dim() != m.obs_dim) {
    throw IoError("CVAE checkpoint dimensions are inconsistent", "<checkpoint>");
  }
  return m;
}

}  // namespace htm
