#include "htm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "htm/errors.hpp"

namespace htm {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

template <class T, class F>
std::string opt_field(const std::optional<T>& v, F f) {
  return v ? f(*v) : std::string();
}

template <class T>
Json opt_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::string scheme_label(const WeightScheme& s) {
  if (s.kind == WeightKind::SptmThreshold) return to_string(s.kind) + "(" + num(s.s_shortcut) + ")";
  return to_string(s.kind);
}

}  // namespace

const char* const kReportCsvHeader =
    "task_id,method,scheme,success,steps,final_distance,feasibility,completeness,fidelity,seed";

Proportion wilson_interval(int successes, int trials, double z) {
  if (trials < 0 || successes < 0 || successes > trials) {
    throw UsageError("wilson_interval: need 0 <= successes <= trials");
  }
  Proportion p;
  p.successes = successes;
  p.trials = trials;
  if (trials == 0) return p;
  const double n = trials;
  const double phat = successes / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (phat + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
  p.value = phat;
  p.lower = std::max(0.0, center - half);
  p.upper = std::min(1.0, center + half);
  return p;
}

Proportion fidelity_interval(const World& world, const HallucinationSet& samples, const Context& c) {
  int valid = 0;
  for (const Observation& o : samples.samples) valid += world.is_valid(c, world.decode(o));
  return wilson_interval(valid, static_cast<int>(samples.samples.size()));
}

double fidelity(const World& world, const HallucinationSet& samples, const Context& c) {
  return fidelity_interval(world, samples, c).value;
}

double feasibility(const World& world, const Plan& plan, const Context& c, int h) {
  const Eigen::Index n = plan.observations.rows();
  if (n < 2) return 1.0;
  const auto dim = static_cast<std::size_t>(plan.observations.cols());
  int ok = 0;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const Vec2 a = world.decode(std::span<const double>(plan.observations.row(k).data(), dim));
    const Vec2 b = world.decode(std::span<const double>(plan.observations.row(k + 1).data(), dim));
    ok += world.oracle_reachable(c, a, b, h);
  }
  return static_cast<double>(ok) / static_cast<double>(n - 1);
}

bool completeness(const World& world, const Plan& plan, const Task& task, int h) {
  if (plan.observations.rows() == 0) throw UsageError("completeness: empty plan");
  const auto dim = static_cast<std::size_t>(plan.observations.cols());
  const Eigen::Index last = plan.observations.rows() - 1;
  const Vec2 a = world.decode(std::span<const double>(plan.observations.row(last).data(), dim));
  return world.oracle_reachable(task.context, a, task.goal.position, h);
}

double mi_lower_bound(double cpc_validation_loss, int candidates) {
  if (candidates < 2) throw UsageError("mi_lower_bound: need at least two candidates");
  if (!(cpc_validation_loss >= 0.0)) throw UsageError("mi_lower_bound: loss must be nonnegative");
  return std::log(static_cast<double>(candidates)) - cpc_validation_loss;
}

MethodSummary summarize(std::span<const TaskRow> rows, const std::string& method) {
  MethodSummary s;
  s.method = method;
  double dist = 0.0;
  double feas = 0.0;
  double fid = 0.0;
  int n_feas = 0;
  int n_comp = 0;
  int complete = 0;
  int n_fid = 0;
  for (const TaskRow& r : rows) {
    if (r.method != method) continue;
    if (s.tasks == 0) s.scheme = r.scheme;
    ++s.tasks;
    s.successes += r.success;
    dist += r.final_distance;
    if (r.feasibility) feas += *r.feasibility, ++n_feas;
    if (r.completeness) complete += *r.completeness, ++n_comp;
    if (r.fidelity) fid += *r.fidelity, ++n_fid;
  }
  if (s.tasks == 0) throw UsageError("summarize: no rows for method " + method);
  s.success_rate = static_cast<double>(s.successes) / s.tasks;
  s.mean_final_distance = dist / s.tasks;
  double var = 0.0;
  for (const TaskRow& r : rows) {
    if (r.method == method) var += (r.final_distance - s.mean_final_distance) * (r.final_distance - s.mean_final_distance);
  }
  s.std_final_distance = std::sqrt(var / s.tasks);
  if (n_feas) s.mean_feasibility = feas / n_feas;
  if (n_comp) s.completeness_rate = static_cast<double>(complete) / n_comp;
  if (n_fid) s.mean_fidelity = fid / n_fid;
  return s;
}

std::vector<std::string> MetricsReport::methods() const {
  std::vector<std::string> out;
  for (const TaskRow& r : rows) {
    if (std::find(out.begin(), out.end(), r.method) == out.end()) out.push_back(r.method);
  }
  return out;
}

MethodSummary MetricsReport::summary(const std::string& method) const { return summarize(rows, method); }

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << kReportCsvHeader << '\n';
  for (const TaskRow& r : rows) {
    out << r.task_id << ',' << r.method << ',' << r.scheme << ',' << (r.success ? 1 : 0) << ',' << r.steps << ','
        << num(r.final_distance) << ',' << opt_field(r.feasibility, num) << ','
        << opt_field(r.completeness, [](bool b) { return std::string(b ? "1" : "0"); }) << ','
        << opt_field(r.fidelity, num) << ',' << r.seed << '\n';
  }
  return out.str();
}

Json MetricsReport::to_json() const {
  Json j;
  Json rs = Json::array();
  for (const TaskRow& r : rows) {
    rs.push_back({{"task_id", r.task_id},
                  {"method", r.method},
                  {"scheme", r.scheme},
                  {"success", r.success},
                  {"steps", r.steps},
                  {"final_distance", r.final_distance},
                  {"feasibility", opt_json(r.feasibility)},
                  {"completeness", opt_json(r.completeness)},
                  {"fidelity", opt_json(r.fidelity)},
                  {"seed", r.seed},
                  {"planless", r.planless}});
  }
  Json agg = Json::array();
  for (const std::string& m : methods()) {
    const MethodSummary s = summary(m);
    agg.push_back({{"method", s.method},
                   {"scheme", s.scheme},
                   {"tasks", s.tasks},
                   {"successes", s.successes},
                   {"success_rate", s.success_rate},
                   {"mean_final_distance", s.mean_final_distance},
                   {"std_final_distance", s.std_final_distance},
                   {"mean_feasibility", opt_json(s.mean_feasibility)},
                   {"completeness_rate", opt_json(s.completeness_rate)},
                   {"mean_fidelity", opt_json(s.mean_fidelity)}});
  }
  j["rows"] = std::move(rs);
  j["aggregates"] = std::move(agg);
  j["provenance"] = provenance;
  return j;
}

MetricsReport run_benchmark(const World& world, std::span<const Task> tasks, const CvaeModel& cvae,
                            const InverseModel& inverse, std::span<const BenchmarkMethod> methods,
                            const ExecutionConfig& base, std::uint64_t seed, int feasibility_horizon) {
  if (feasibility_horizon < 0) throw ConfigError("eval.feasibility_h must be nonnegative", "eval.feasibility_h");
  MetricsReport report;
  for (const BenchmarkMethod& m : methods) {
    if (m.use_planner && !m.scorer) throw UsageError("run_benchmark: method " + m.name + " needs a scorer");
    ExecutionConfig cfg = base;
    cfg.use_planner = m.use_planner;
    cfg.planning.scheme = m.scheme;
    const Models models{&cvae, m.scorer, &inverse};
    for (const Task& task : tasks) {
      const std::uint64_t task_seed = derive_seed(seed, seed_stream::kTask, static_cast<std::uint64_t>(task.id));
      const ExecutionResult r = execute(world, task, models, cfg, task_seed);
      TaskRow row;
      row.task_id = task.id;
      row.method = m.name;
      row.scheme = m.use_planner ? scheme_label(m.scheme) : "none";
      row.success = r.success;
      row.steps = r.steps;
      row.final_distance = r.final_distance;
      row.seed = task_seed;
      row.planless = r.planless;
      if (m.use_planner) {
        Plan first;
        if (!r.plans.empty()) {
          first = r.plans.front();
        } else {
          // No path: the executor pursued the goal directly.
          first.observations = Matrix(2, static_cast<Eigen::Index>(task.o_start.data.size()));
          first.observations.row(0) = row_vector(task.o_start.data);
          first.observations.row(1) = row_vector(task.o_goal.data);
          first.found = false;
        }
        row.feasibility = feasibility(world, first, task.context, feasibility_horizon);
        row.completeness = completeness(world, first, task, feasibility_horizon);
        const HallucinationSet set =
            hallucinate(cvae, world.encode_context(task.context), cfg.planning.samples,
                        derive_seed(task_seed, seed_stream::kHallucination, 0), world.mode(), task.context.id);
        row.fidelity = fidelity(world, set, task.context);
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

bool AblationGrid::ordering_holds(const Matrix& cells) const {
  if (cells.rows() != kRows || cells.cols() != kCols) throw ShapeError("ablation grid must be 2x3");
  for (Eigen::Index c = 0; c < kCols; ++c) {
    if (cells(0, c) > cells(1, c)) return false;
  }
  const double best = cells(0, 2);
  return best <= cells.minCoeff();
}

int AblationGrid::seeds_with_ordering() const {
  int n = 0;
  for (const Matrix& m : per_seed) n += ordering_holds(m);
  return n;
}

std::string AblationGrid::to_csv() const {
  std::ostringstream out;
  out << "seed,score_model,scheme,mean_final_distance\n";
  for (std::size_t k = 0; k < per_seed.size(); ++k) {
    for (int r = 0; r < kRows; ++r) {
      for (int c = 0; c < kCols; ++c) {
        out << seeds[k] << ',' << score_models[static_cast<std::size_t>(r)] << ','
            << scheme_label(schemes[static_cast<std::size_t>(c)]) << ',' << num(per_seed[k](r, c)) << '\n';
      }
    }
  }
  for (int r = 0; r < kRows; ++r) {
    for (int c = 0; c < kCols; ++c) {
      out << "mean," << score_models[static_cast<std::size_t>(r)] << ','
          << scheme_label(schemes[static_cast<std::size_t>(c)]) << ',' << num(mean(r, c)) << '\n';
    }
  }
  return out.str();
}

std::string AblationGrid::to_text() const {
  std::ostringstream out;
  constexpr int kWidth = 22;
  out << std::left << std::setw(12) << "score";
  for (const WeightScheme& s : schemes) out << std::right << std::setw(kWidth) << scheme_label(s);
  out << '\n';
  for (int r = 0; r < kRows; ++r) {
    out << std::left << std::setw(12) << score_models[static_cast<std::size_t>(r)];
    for (int c = 0; c < kCols; ++c) out << std::right << std::setw(kWidth) << num(mean(r, c));
    out << '\n';
  }
  out << "mean final distance over " << task_ids.size() << " tasks and " << seeds.size()
      << " training seeds; ordering holds for " << seeds_with_ordering() << " of " << per_seed.size()
      << " seeds\n";
  return out.str();
}

Json AblationGrid::to_json() const {
  const auto grid = [](const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      rows.push_back(std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()));
    }
    return rows;
  };
  Json j;
  j["score_models"] = score_models;
  Json sj = Json::array();
  for (const WeightScheme& s : schemes) sj.push_back(scheme_label(s));
  j["schemes"] = std::move(sj);
  j["seeds"] = seeds;
  j["task_ids"] = task_ids;
  Json ps = Json::array();
  for (const Matrix& m : per_seed) ps.push_back(grid(m));
  j["per_seed"] = std::move(ps);
  j["mean"] = grid(mean);
  j["seeds_with_ordering"] = seeds_with_ordering();
  return j;
}

AblationGrid run_ablation(const World& world, std::span<const Task> tasks, const CvaeModel& cvae,
                          const InverseModel& inverse, std::span<const AblationModels> models,
                          const ExecutionConfig& base, double s_shortcut, std::uint64_t seed) {
  if (models.empty()) throw UsageError("run_ablation: no trained score models");
  AblationGrid grid;
  grid.score_models = {"CPC", "SPTM-BCE"};
  grid.schemes = {WeightScheme::threshold(s_shortcut), WeightScheme::inverse(), WeightScheme::normalized()};
  for (const Task& t : tasks) grid.task_ids.push_back(t.id);
  grid.mean = Matrix::Zero(AblationGrid::kRows, AblationGrid::kCols);
  for (const AblationModels& m : models) {
    if (!m.cpc || !m.sptm) throw UsageError("run_ablation: both score models are required");
    grid.seeds.push_back(m.seed);
    Matrix cells(AblationGrid::kRows, AblationGrid::kCols);
    const PairScorer* scorers[AblationGrid::kRows] = {m.cpc, m.sptm};
    for (int r = 0; r < AblationGrid::kRows; ++r) {
      for (int c = 0; c < AblationGrid::kCols; ++c) {
        ExecutionConfig cfg = base;
        cfg.use_planner = true;
        cfg.planning.scheme = grid.schemes[static_cast<std::size_t>(c)];
        const Models ms{&cvae, scorers[r], &inverse};
        double total = 0.0;
        for (const Task& task : tasks) {
          const std::uint64_t task_seed =
              derive_seed(seed, seed_stream::kTask, static_cast<std::uint64_t>(task.id));
          total += execute(world, task, ms, cfg, task_seed).final_distance;
        }
        cells(r, c) = tasks.empty() ? 0.0 : total / static_cast<double>(tasks.size());
      }
    }
    grid.per_seed.push_back(cells);
    grid.mean += cells;
  }
  grid.mean /= static_cast<double>(models.size());
  return grid;
}

}  // namespace htm
