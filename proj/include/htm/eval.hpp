#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "htm/controller.hpp"

namespace htm {

struct Proportion {
  int successes = 0;
  int trials = 0;
  double value = 1.0;
  double lower = 0.0;  // Wilson score interval
  double upper = 1.0;
};

Proportion wilson_interval(int successes, int trials, double z = 1.959963984540054);

/// Fraction of samples decoding to valid agent states in `c`. An empty set
/// scores 1.0.
double fidelity(const World& world, const HallucinationSet& samples, const Context& c);
Proportion fidelity_interval(const World& world, const HallucinationSet& samples, const Context& c);

/// Fraction of consecutive plan nodes that are oracle-reachable within `h`
/// steps. A single-node plan scores 1.0.
double feasibility(const World& world, const Plan& plan, const Context& c, int h);

/// Whether the goal is oracle-reachable within `h` steps from the last node.
bool completeness(const World& world, const Plan& plan, const Task& task, int h);

/// ln N - loss, reported as-is (negative early in training).
double mi_lower_bound(double cpc_validation_loss, int candidates);

struct TaskRow {
  int task_id = 0;
  std::string method;
  std::string scheme;
  bool success = false;
  int steps = 0;
  double final_distance = 0.0;
  std::optional<double> feasibility;  // of the first plan; absent without a planner
  std::optional<bool> completeness;
  std::optional<double> fidelity;
  std::uint64_t seed = 0;
  bool planless = false;
};

struct MethodSummary {
  std::string method;
  std::string scheme;
  int tasks = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_final_distance = 0.0;
  double std_final_distance = 0.0;  // population standard deviation
  std::optional<double> mean_feasibility;
  std::optional<double> completeness_rate;
  std::optional<double> mean_fidelity;
};

/// Aggregates the rows of one method; every figure is recomputed from rows.
MethodSummary summarize(std::span<const TaskRow> rows, const std::string& method);

struct MetricsReport {
  std::vector<TaskRow> rows;
  Json provenance = Json::object();

  std::vector<std::string> methods() const;  // in first-appearance order
  MethodSummary summary(const std::string& method) const;
  std::string to_csv() const;
  Json to_json() const;
};

extern const char* const kReportCsvHeader;

/// One benchmark entry. Without a planner the inverse model pursues the goal
/// directly.
struct BenchmarkMethod {
  std::string name;
  const PairScorer* scorer = nullptr;
  WeightScheme scheme;
  bool use_planner = true;
};

/// Executes every task under every method. Task `k` runs with seed
/// derive_seed(seed, kTask, task id) for all methods.
MetricsReport run_benchmark(const World& world, std::span<const Task> tasks, const CvaeModel& cvae,
                            const InverseModel& inverse, std::span<const BenchmarkMethod> methods,
                            const ExecutionConfig& base, std::uint64_t seed, int feasibility_horizon);

/// Score models of one training seed.
struct AblationModels {
  std::uint64_t seed = 0;
  const PairScorer* cpc = nullptr;
  const PairScorer* sptm = nullptr;
};

/// Score model {CPC, SPTM-BCE} x weight scheme {SPTM_THRESHOLD, INVERSE,
/// NORMALIZED}; each cell is the mean final distance over the task set.
struct AblationGrid {
  static constexpr int kRows = 2;
  static constexpr int kCols = 3;
  std::vector<std::string> score_models;
  std::vector<WeightScheme> schemes;
  std::vector<std::uint64_t> seeds;
  std::vector<int> task_ids;
  std::vector<Matrix> per_seed;  // kRows x kCols per training seed
  Matrix mean;                   // average over seeds

  /// CPC <= SPTM in every column and CPC + NORMALIZED is the smallest cell.
  bool ordering_holds(const Matrix& cells) const;
  int seeds_with_ordering() const;
  std::string to_csv() const;
  std::string to_text() const;
  Json to_json() const;
};

AblationGrid run_ablation(const World& world, std::span<const Task> tasks, const CvaeModel& cvae,
                          const InverseModel& inverse, std::span<const AblationModels> models,
                          const ExecutionConfig& base, double s_shortcut, std::uint64_t seed);

}  // namespace htm
