#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "htm/errors.hpp"
#include "htm/pipeline.hpp"
#include "htm/render.hpp"
#include "htm/selftest.hpp"

namespace fs = std::filesystem;
using namespace htm;

namespace {

struct Options {
  std::string config;
  std::string data;
  std::string out;
  std::string cvae;
  std::string cpc;
  std::string sptm;
  std::string inverse;
  std::string plan;
  std::string scorer = "cpc";
  int task = 0;
  int panel = 64;
  bool no_hallucinations = false;
  bool quiet = false;
};

RunConfig effective_config(const Options& o) {
  RunConfig c = o.config.empty() ? config_from_json(Json::object()) : load_config(o.config);
  // The only environment override: the master seed.
  if (const char* s = std::getenv("HTM_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0') throw ConfigError("HTM_SEED must be an unsigned integer", "seed");
    apply_seed(c, v);
  }
  return c;
}

std::string or_default(const std::string& value, const fs::path& fallback) {
  return value.empty() ? fallback.string() : value;
}

fs::path checkpoint_path(const RunConfig& c, const std::string& flag, const char* name) {
  return or_default(flag, fs::path(c.paths.checkpoints) / name);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_text(const fs::path& p, const std::string& text) {
  ensure_parent(p);
  write_file(p, text);
}

void write_provenance(const fs::path& artifact, const RunConfig& c) {
  write_text(artifact.string() + ".provenance.json", provenance(c).dump(2) + "\n");
}

void save_model(const fs::path& p, const Checkpoint& ckpt, const RunConfig& c) {
  ensure_parent(p);
  save_checkpoint(p, ckpt);
  write_provenance(p, c);
}

LogFn logger(const Options& o) {
  if (o.quiet) return {};
  return [](const std::string& line) { std::cerr << line << '\n'; };
}

Json task_json(const Task& t) {
  return {{"id", t.id},
          {"context", to_json(t.context)},
          {"start", {t.start.position.x, t.start.position.y}},
          {"goal", {t.goal.position.x, t.goal.position.y}},
          {"tau", t.tau}};
}

Task pick_task(const RunConfig& c, const World& world, int index) {
  if (index < 0) throw ConfigError("--task must be nonnegative", "task");
  return benchmark_tasks(world, c.data, index + 1, c.execution.tau, c.seed).back();
}

// Owns whichever score model the command loaded.
struct LoadedScorer {
  std::unique_ptr<ConnectivityModel> cpc;
  std::unique_ptr<SptmClassifier> sptm;
  std::unique_ptr<PairScorer> scorer;
};

LoadedScorer load_scorer(const RunConfig& c, const Options& o) {
  LoadedScorer s;
  if (o.scorer == "cpc") {
    s.cpc = std::make_unique<ConnectivityModel>(
        connectivity_from_checkpoint(load_checkpoint(checkpoint_path(c, o.cpc, "cpc.htmc"), "CPCE")));
    s.scorer = std::make_unique<CpcScorer>(*s.cpc);
  } else if (o.scorer == "sptm") {
    s.sptm = std::make_unique<SptmClassifier>(
        sptm_from_checkpoint(load_checkpoint(checkpoint_path(c, o.sptm, "sptm.htmc"), "SPTM")));
    s.scorer = std::make_unique<SptmScorer>(*s.sptm);
  } else {
    throw ConfigError("--scorer must be cpc or sptm", "scorer");
  }
  return s;
}

CvaeModel load_cvae(const RunConfig& c, const Options& o) {
  return cvae_from_checkpoint(load_checkpoint(checkpoint_path(c, o.cvae, "cvae.htmc"), "CVAE"));
}

InverseModel load_inverse(const RunConfig& c, const Options& o) {
  return inverse_from_checkpoint(load_checkpoint(checkpoint_path(c, o.inverse, "inverse.htmc"), "INVM"));
}

TransitionDataset load_data(const RunConfig& c, const Options& o) { return load_dataset(or_default(o.data, c.paths.data)); }

int cmd_collect(const Options& o) {
  const RunConfig c = effective_config(o);
  const World world(c.world);
  const TransitionDataset data = collect_dataset(world, c.data);
  const fs::path dir = or_default(o.out, c.paths.data);
  save_dataset(data, dir, provenance(c));
  std::cout << "collected " << data.transition_count() << " transitions into " << dir.string() << '\n';
  return 0;
}

int cmd_train_cvae(const Options& o) {
  const RunConfig c = effective_config(o);
  const World world(c.world);
  const CvaeTrainResult r = train_cvae(world, load_data(c, o), c.cvae, logger(o));
  const fs::path out = checkpoint_path(c, o.out, "cvae.htmc");
  save_model(out, to_checkpoint(r.model), c);
  std::cout << "cvae best validation " << r.curve.best_validation << " at epoch " << r.curve.best_epoch << '\n';
  return 0;
}

int cmd_train_cpc(const Options& o) {
  const RunConfig c = effective_config(o);
  const World world(c.world);
  const TransitionDataset data = load_data(c, o);
  std::optional<CvaeModel> cvae;
  if (!o.no_hallucinations) cvae = load_cvae(c, o);
  const CpcTrainResult r = train_cpc_stage(c, world, data, cvae ? &*cvae : nullptr, logger(o));
  save_model(checkpoint_path(c, o.out, "cpc.htmc"), to_checkpoint(r.model), c);
  std::cout << "cpc best validation " << r.curve.best_validation << " (MI bound "
            << mi_lower_bound(r.curve.best_validation, c.cpc.candidates) << " nats)\n";
  return 0;
}

int cmd_train_sptm(const Options& o) {
  const RunConfig c = effective_config(o);
  const World world(c.world);
  const SptmTrainResult r = train_sptm(world, load_data(c, o), c.sptm, logger(o));
  save_model(checkpoint_path(c, o.out, "sptm.htmc"), to_checkpoint(r.model), c);
  std::cout << "sptm best validation " << r.curve.best_validation << '\n';
  return 0;
}

int cmd_train_inverse(const Options& o) {
  const RunConfig c = effective_config(o);
  const World world(c.world);
  const InverseTrainResult r = train_inverse(world, load_data(c, o), c.inverse, logger(o));
  save_model(checkpoint_path(c, o.out, "inverse.htmc"), to_checkpoint(r.model), c);
  std::cout << "inverse validation error " << r.validation_error << " (mean-action baseline "
            << r.baseline_error << ")\n";
  return 0;
}

int cmd_plan(const Options& o) {
  const RunConfig c = effective_config(o);
  const World world(c.world);
  const CvaeModel cvae = load_cvae(c, o);
  const LoadedScorer s = load_scorer(c, o);
  const Task task = pick_task(c, world, o.task);
  const std::uint64_t seed = derive_seed(c.seed, seed_stream::kHallucination, static_cast<std::uint64_t>(task.id));
  Json j;
  j["task"] = task_json(task);
  try {
    const Plan plan =
        plan_end_to_end(task.context, world, task.o_start, task.o_goal, cvae, *s.scorer, c.execution.planning, seed);
    j["plan"] = to_json(plan);
    j["feasibility"] = feasibility(world, plan, task.context, c.eval.feasibility_horizon);
    j["completeness"] = completeness(world, plan, task, c.eval.feasibility_horizon);
  } catch (const NoPathError& e) {
    j["plan"] = nullptr;
    j["error"] = e.what();
  }
  j["provenance"] = provenance(c);
  const fs::path out = or_default(o.out, fs::path(c.paths.out) / "plan.json");
  write_text(out, j.dump(2) + "\n");
  std::cout << "plan written to " << out.string() << '\n';
  return j["plan"].is_null() ? 1 : 0;
}

int cmd_execute(const Options& o) {
  const RunConfig c = effective_config(o);
  const World world(c.world);
  const CvaeModel cvae = load_cvae(c, o);
  const InverseModel inverse = load_inverse(c, o);
  const LoadedScorer s = load_scorer(c, o);
  const Task task = pick_task(c, world, o.task);
  const ExecutionResult r = execute(world, task, Models{&cvae, s.scorer.get(), &inverse}, c.execution,
                                    derive_seed(c.seed, seed_stream::kTask, static_cast<std::uint64_t>(task.id)));
  const Json j = {{"task", task_json(task)}, {"result", to_json(r)}, {"provenance", provenance(c)}};
  const fs::path out = or_default(o.out, fs::path(c.paths.out) / "execution.json");
  write_text(out, j.dump(2) + "\n");
  std::cout << (r.success ? "success" : "failure") << " after " << r.steps << " steps, final distance "
            << r.final_distance << '\n';
  return 0;
}

int cmd_evaluate(const Options& o) {
  const RunConfig c = effective_config(o);
  const World world(c.world);
  const CvaeModel cvae = load_cvae(c, o);
  const InverseModel inverse = load_inverse(c, o);
  const ConnectivityModel cpc =
      connectivity_from_checkpoint(load_checkpoint(checkpoint_path(c, o.cpc, "cpc.htmc"), "CPCE"));
  const CpcScorer cpc_scorer(cpc);
  std::optional<SptmClassifier> sptm;
  const fs::path sptm_path = checkpoint_path(c, o.sptm, "sptm.htmc");
  if (fs::exists(sptm_path)) sptm = sptm_from_checkpoint(load_checkpoint(sptm_path, "SPTM"));
  std::optional<SptmScorer> sptm_scorer;
  if (sptm) sptm_scorer.emplace(*sptm);
  const MetricsReport report = evaluate(c, world, cvae, inverse, cpc_scorer, sptm_scorer ? &*sptm_scorer : nullptr);
  const fs::path out = or_default(o.out, fs::path(c.paths.out) / "report.csv");
  write_text(out, report.to_csv());
  fs::path json = out;
  json.replace_extension(".json");
  write_text(json, report.to_json().dump(2) + "\n");
  write_provenance(out, c);
  for (const std::string& m : report.methods()) {
    const MethodSummary s = report.summary(m);
    std::cout << m << ": success " << s.successes << "/" << s.tasks << ", mean final distance "
              << s.mean_final_distance << '\n';
  }
  return 0;
}

int cmd_ablate(const Options& o) {
  const RunConfig c = effective_config(o);
  const World world(c.world);
  const TransitionDataset data = load_data(c, o);
  const AblationGrid grid = ablate(c, world, data, load_cvae(c, o), load_inverse(c, o), logger(o));
  const fs::path out = or_default(o.out, fs::path(c.paths.out) / "ablation.csv");
  write_text(out, grid.to_csv());
  fs::path text = out;
  text.replace_extension(".txt");
  write_text(text, grid.to_text());
  fs::path json = out;
  json.replace_extension(".json");
  Json j = grid.to_json();
  j["provenance"] = provenance(c);
  write_text(json, j.dump(2) + "\n");
  write_provenance(out, c);
  std::cout << grid.to_text();
  return 0;
}

int cmd_render(const Options& o) {
  const RunConfig c = effective_config(o);
  const World world(c.world);
  if (o.plan.empty()) throw ConfigError("--plan is required", "plan");
  std::ifstream in(o.plan);
  if (!in) throw IoError("cannot open plan", o.plan);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw IoError(std::string("malformed plan JSON (") + e.what() + ")", o.plan);
  }
  if (!j.contains("plan") || j["plan"].is_null()) throw EvaluationError("plan file holds no plan");
  const Context context = context_from_json(j.at("task").at("context"));
  const Vec2 goal{j.at("task").at("goal").at(0).get<double>(), j.at("task").at("goal").at(1).get<double>()};
  const auto rows = j.at("plan").at("observations").get<std::vector<std::vector<double>>>();
  Matrix obs(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(world.observation_dim()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != world.observation_dim()) throw ShapeError("plan observation length does not match world");
    obs.row(static_cast<Eigen::Index>(r)) = row_vector(rows[r]);
  }
  const fs::path out = or_default(o.out, fs::path(c.paths.out) / "plan.ppm");
  ensure_parent(out);
  write_file(out, render_plan(world, obs, context, goal, RenderOptions{o.panel}));
  write_provenance(out, c);
  std::cout << "rendered " << rows.size() << " panels to " << out.string() << '\n';
  return 0;
}

int cmd_selftest(const Options& o) {
  const RunConfig c = effective_config(o);
  bool ok = true;
  for (const SuiteResult& r : run_selftest(c.seed)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.instances - r.failures << "/"
              << r.instances << " (worst error " << r.worst << ")\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot planning with hallucinated topological memory"};
  app.name("htm");
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("-c,--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_flag("-q,--quiet", o.quiet, "Suppress per-epoch logging");

  const auto add = [&](const char* name, const char* help) { return app.add_subcommand(name, help); };
  const auto data_opt = [&](CLI::App* s) { s->add_option("--data", o.data, "Dataset directory"); };
  const auto out_opt = [&](CLI::App* s, const char* what) { s->add_option("-o,--out", o.out, what); };
  const auto model_opts = [&](CLI::App* s) {
    s->add_option("--cvae", o.cvae, "CVAE checkpoint");
    s->add_option("--cpc", o.cpc, "CPC checkpoint");
    s->add_option("--sptm", o.sptm, "SPTM checkpoint");
  };

  CLI::App* collect = add("collect", "Collect random-exploration data");
  out_opt(collect, "Output directory");
  CLI::App* train_cvae_cmd = add("train-cvae", "Train the conditional generator");
  data_opt(train_cvae_cmd);
  out_opt(train_cvae_cmd, "Checkpoint path");
  CLI::App* train_cpc_cmd = add("train-cpc", "Train the contrastive connectivity model");
  data_opt(train_cpc_cmd);
  out_opt(train_cpc_cmd, "Checkpoint path");
  train_cpc_cmd->add_option("--cvae", o.cvae, "CVAE checkpoint for hallucinated negatives");
  train_cpc_cmd->add_flag("--no-hallucinations", o.no_hallucinations, "Use dataset negatives only");
  CLI::App* train_sptm_cmd = add("train-sptm", "Train the binary reachability classifier");
  data_opt(train_sptm_cmd);
  out_opt(train_sptm_cmd, "Checkpoint path");
  CLI::App* train_inverse_cmd = add("train-inverse", "Train the inverse-dynamics policy");
  data_opt(train_inverse_cmd);
  out_opt(train_inverse_cmd, "Checkpoint path");
  CLI::App* plan = add("plan", "Plan one benchmark task and write the plan as JSON");
  model_opts(plan);
  plan->add_option("--scorer", o.scorer, "cpc or sptm")->check(CLI::IsMember({"cpc", "sptm"}));
  plan->add_option("--task", o.task, "Benchmark task index");
  out_opt(plan, "Plan JSON path");
  CLI::App* exec = add("execute", "Execute one benchmark task in closed loop");
  model_opts(exec);
  exec->add_option("--inverse", o.inverse, "Inverse-model checkpoint");
  exec->add_option("--scorer", o.scorer, "cpc or sptm")->check(CLI::IsMember({"cpc", "sptm"}));
  exec->add_option("--task", o.task, "Benchmark task index");
  out_opt(exec, "Result JSON path");
  CLI::App* evaluate_cmd = add("evaluate", "Run the benchmark and write the metrics report");
  model_opts(evaluate_cmd);
  evaluate_cmd->add_option("--inverse", o.inverse, "Inverse-model checkpoint");
  out_opt(evaluate_cmd, "Report CSV path (JSON written alongside)");
  CLI::App* ablate_cmd = add("ablate", "Score-model by weight-scheme ablation");
  data_opt(ablate_cmd);
  ablate_cmd->add_option("--cvae", o.cvae, "CVAE checkpoint");
  ablate_cmd->add_option("--inverse", o.inverse, "Inverse-model checkpoint");
  out_opt(ablate_cmd, "Ablation CSV path (text and JSON written alongside)");
  CLI::App* render = add("render", "Render a plan JSON as a PPM strip");
  render->add_option("--plan", o.plan, "Plan JSON from the plan command")->required();
  render->add_option("--panel", o.panel, "Panel size in pixels");
  out_opt(render, "PPM path");
  CLI::App* selftest = add("selftest", "Gradient, shortest-path and Jensen oracles");

  if (argc <= 1) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*collect) return cmd_collect(o);
    if (*train_cvae_cmd) return cmd_train_cvae(o);
    if (*train_cpc_cmd) return cmd_train_cpc(o);
    if (*train_sptm_cmd) return cmd_train_sptm(o);
    if (*train_inverse_cmd) return cmd_train_inverse(o);
    if (*plan) return cmd_plan(o);
    if (*exec) return cmd_execute(o);
    if (*evaluate_cmd) return cmd_evaluate(o);
    if (*ablate_cmd) return cmd_ablate(o);
    if (*render) return cmd_render(o);
    if (*selftest) return cmd_selftest(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error";
    if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
    std::cerr << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
