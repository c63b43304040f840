#pragma once

#include <cstdint>
#include <vector>

#include "htm/config.hpp"
#include "htm/eval.hpp"

namespace htm {

/// Hallucinated negatives for every context of `data`, `count` per context.
HallucinationPool build_pool(const World& world, const TransitionDataset& data, const CvaeModel& cvae,
                             int count, std::uint64_t seed);

/// One cross-wall task per held-out context of `spec`, ids 0..count-1.
std::vector<Task> benchmark_tasks(const World& world, const DataSpec& spec, int count, double tau,
                                  std::uint64_t seed);

/// Trains the CPC model, drawing hallucinated negatives from `cvae` when given.
CpcTrainResult train_cpc_stage(const RunConfig& config, const World& world, const TransitionDataset& data,
                               const CvaeModel* cvae, const LogFn& log = {});

struct TrainedModels {
  CvaeTrainResult cvae;
  CpcTrainResult cpc;
  SptmTrainResult sptm;
  InverseTrainResult inverse;
};

TrainedModels train_all(const RunConfig& config, const World& world, const TransitionDataset& data,
                        const LogFn& log = {});

/// HTM (CPC + configured scheme), SPTM-BCE (thresholded edges) when a
/// classifier is given, and the inverse-model-only baseline.
std::vector<BenchmarkMethod> default_methods(const RunConfig& config, const PairScorer& cpc,
                                             const PairScorer* sptm);

MetricsReport evaluate(const RunConfig& config, const World& world, const CvaeModel& cvae,
                       const InverseModel& inverse, const PairScorer& cpc, const PairScorer* sptm);

/// Retrains both score models for every ablation seed (generator and
/// inverse model shared) and fills the 2x3 grid.
AblationGrid ablate(const RunConfig& config, const World& world, const TransitionDataset& data,
                    const CvaeModel& cvae, const InverseModel& inverse, const LogFn& log = {});

}  // namespace htm
