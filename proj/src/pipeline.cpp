#include "htm/pipeline.hpp"

#include <memory>

#include "htm/errors.hpp"

namespace htm {

HallucinationPool build_pool(const World& world, const TransitionDataset& data, const CvaeModel& cvae,
                             int count, std::uint64_t seed) {
  HallucinationPool pool;
  if (count <= 0) return pool;
  const auto dim = static_cast<Eigen::Index>(world.observation_dim());
  for (const Context& c : data.contexts) {
    const HallucinationSet set = hallucinate(cvae, world.encode_context(c), count,
                                             derive_seed(seed, seed_stream::kHallucination, static_cast<std::uint64_t>(c.id)),
                                             world.mode(), c.id);
    Matrix rows(count, dim);
    for (int k = 0; k < count; ++k) rows.row(k) = row_vector(set.samples[static_cast<std::size_t>(k)].data);
    pool.emplace(c.id, std::move(rows));
  }
  return pool;
}

std::vector<Task> benchmark_tasks(const World& world, const DataSpec& spec, int count, double tau,
                                  std::uint64_t seed) {
  std::vector<Task> tasks;
  const std::vector<Context> held = heldout_contexts(world, spec, count);
  for (int k = 0; k < count; ++k) {
    tasks.push_back(world.make_task(held[static_cast<std::size_t>(k)], derive_seed(seed, seed_stream::kTask, static_cast<std::uint64_t>(k)),
                                    TaskDifficulty::CrossWall, tau, k));
  }
  return tasks;
}

CpcTrainResult train_cpc_stage(const RunConfig& config, const World& world, const TransitionDataset& data,
                               const CvaeModel* cvae, const LogFn& log) {
  if (!cvae || config.halluc_pool == 0 || config.cpc.halluc_fraction == 0.0) {
    return train_cpc(world, data, nullptr, config.cpc, log);
  }
  const HallucinationPool pool = build_pool(world, data, *cvae, config.halluc_pool, config.cpc.seed);
  return train_cpc(world, data, &pool, config.cpc, log);
}

TrainedModels train_all(const RunConfig& config, const World& world, const TransitionDataset& data,
                        const LogFn& log) {
  TrainedModels m;
  m.cvae = train_cvae(world, data, config.cvae, log);
  m.cpc = train_cpc_stage(config, world, data, &m.cvae.model, log);
  m.sptm = train_sptm(world, data, config.sptm, log);
  m.inverse = train_inverse(world, data, config.inverse, log);
  return m;
}

std::vector<BenchmarkMethod> default_methods(const RunConfig& config, const PairScorer& cpc,
                                             const PairScorer* sptm) {
  std::vector<BenchmarkMethod> methods;
  methods.push_back({"HTM", &cpc, config.execution.planning.scheme, true});
  if (sptm) {
    methods.push_back({"SPTM-BCE", sptm, WeightScheme::threshold(config.execution.planning.scheme.s_shortcut), true});
  }
  methods.push_back({"inverse-only", nullptr, WeightScheme{}, false});
  return methods;
}

MetricsReport evaluate(const RunConfig& config, const World& world, const CvaeModel& cvae,
                       const InverseModel& inverse, const PairScorer& cpc, const PairScorer* sptm) {
  const std::vector<Task> tasks =
      benchmark_tasks(world, config.data, config.eval.heldout_contexts, config.execution.tau, config.seed);
  const std::vector<BenchmarkMethod> methods = default_methods(config, cpc, sptm);
  MetricsReport report = run_benchmark(world, tasks, cvae, inverse, methods, config.execution, config.seed,
                                       config.eval.feasibility_horizon);
  report.provenance = provenance(config);
  return report;
}

AblationGrid ablate(const RunConfig& config, const World& world, const TransitionDataset& data,
                    const CvaeModel& cvae, const InverseModel& inverse, const LogFn& log) {
  std::vector<Task> tasks =
      benchmark_tasks(world, config.data, config.eval.ablation_tasks, config.execution.tau, config.seed);
  std::vector<std::unique_ptr<ConnectivityModel>> cpcs;
  std::vector<std::unique_ptr<SptmClassifier>> sptms;
  std::vector<std::unique_ptr<PairScorer>> scorers;
  std::vector<AblationModels> models;
  for (const std::uint64_t s : config.eval.ablation_seeds) {
    RunConfig run = config;
    run.cpc.seed = derive_seed(s, seed_stream::kTraining, 2);
    run.sptm.seed = derive_seed(s, seed_stream::kTraining, 3);
    if (log) log("ablation seed " + std::to_string(s));
    cpcs.push_back(std::make_unique<ConnectivityModel>(train_cpc_stage(run, world, data, &cvae, log).model));
    sptms.push_back(std::make_unique<SptmClassifier>(train_sptm(world, data, run.sptm, log).model));
    scorers.push_back(std::make_unique<CpcScorer>(*cpcs.back()));
    scorers.push_back(std::make_unique<SptmScorer>(*sptms.back()));
    models.push_back({s, scorers[scorers.size() - 2].get(), scorers.back().get()});
  }
  return run_ablation(world, tasks, cvae, inverse, models, config.execution,
                      config.execution.planning.scheme.s_shortcut, config.seed);
}

}  // namespace htm
