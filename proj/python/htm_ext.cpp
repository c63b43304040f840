#include <optional>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "htm/errors.hpp"
#include "htm/pipeline.hpp"
#include "htm/render.hpp"

namespace py = pybind11;
using namespace htm;

namespace {

RunConfig parse_config(const std::string& json) {
  return config_from_json(json.empty() ? Json::object() : Json::parse(json));
}

WeightScheme scheme_of(const std::string& name, double s_shortcut) {
  return WeightScheme{parse_weight_kind(name), s_shortcut};
}

Observation obs_of(const World& world, const std::vector<double>& data) {
  if (data.size() != world.observation_dim()) throw ShapeError("observation length does not match the world");
  return Observation{world.mode(), data};
}

}  // namespace

PYBIND11_MODULE(_htm, m) {
  m.doc() = "Zero-shot planning with hallucinated topological memory";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<NoPathError>(m, "NoPathError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<Context>(m, "Context")
      .def_readonly("id", &Context::id)
      .def_readonly("arena_size", &Context::arena_size)
      .def_property_readonly("walls", [](const Context& c) {
        std::vector<std::tuple<double, double, double, double>> out;
        for (const Rect& w : c.walls) out.emplace_back(w.cx, w.cy, w.half_w, w.half_h);
        return out;
      });

  py::class_<Task>(m, "Task")
      .def_readonly("id", &Task::id)
      .def_readonly("context", &Task::context)
      .def_property_readonly("start", [](const Task& t) { return std::make_pair(t.start.position.x, t.start.position.y); })
      .def_property_readonly("goal", [](const Task& t) { return std::make_pair(t.goal.position.x, t.goal.position.y); })
      .def_property_readonly("o_start", [](const Task& t) { return t.o_start.data; })
      .def_property_readonly("o_goal", [](const Task& t) { return t.o_goal.data; })
      .def_readonly("tau", &Task::tau);

  py::class_<World>(m, "World")
      .def(py::init([](const std::string& config) { return World(parse_config(config).world); }),
           py::arg("config") = "")
      .def("generate_context", &World::generate_context, py::arg("seed"), py::arg("id") = 0)
      .def("observe", [](const World& w, double x, double y) { return w.observe_position({x, y}).data; })
      .def("decode", [](const World& w, const std::vector<double>& o) {
        const Vec2 p = w.decode(std::span<const double>(o));
        return std::make_pair(p.x, p.y);
      })
      .def("is_valid", [](const World& w, const Context& c, double x, double y) { return w.is_valid(c, {x, y}); })
      .def("step", [](const World& w, const Context& c, double x, double y, double dx, double dy) {
        const AgentState s = w.step(c, w.state(x, y), Action{dx, dy});
        return std::make_pair(s.position.x, s.position.y);
      })
      .def("encode_context", &World::encode_context)
      .def("make_cross_wall_task", [](const World& w, const Context& c, std::uint64_t seed) {
        return w.make_task(c, seed, TaskDifficulty::CrossWall);
      })
      .def_property_readonly("observation_dim", &World::observation_dim)
      .def_property_readonly("context_dim", &World::context_dim);

  py::class_<TransitionDataset>(m, "TransitionDataset")
      .def_property_readonly("transition_count", &TransitionDataset::transition_count)
      .def_property_readonly("trajectory_count", [](const TransitionDataset& d) { return d.trajectories.size(); })
      .def_readonly("contexts", &TransitionDataset::contexts)
      .def("save", [](const TransitionDataset& d, const std::string& dir) { save_dataset(d, dir); });

  py::class_<CvaeModel>(m, "CvaeModel")
      .def_readonly("latent_dim", &CvaeModel::latent_dim)
      .def("save", [](const CvaeModel& c, const std::string& p) { save_checkpoint(p, to_checkpoint(c)); });
  py::class_<ConnectivityModel>(m, "ConnectivityModel")
      .def_readonly("embed_dim", &ConnectivityModel::embed_dim)
      .def_readonly("bilinear", &ConnectivityModel::bilinear)
      .def("score", [](const ConnectivityModel& c, const std::vector<double>& from, const std::vector<double>& to,
                       const std::vector<double>& ctx) { return score_pair(c, from, to, ctx); })
      .def("save", [](const ConnectivityModel& c, const std::string& p) { save_checkpoint(p, to_checkpoint(c)); });
  py::class_<SptmClassifier>(m, "SptmClassifier")
      .def("save", [](const SptmClassifier& c, const std::string& p) { save_checkpoint(p, to_checkpoint(c)); });
  py::class_<InverseModel>(m, "InverseModel")
      .def("act", [](const InverseModel& im, const std::vector<double>& cur, const std::vector<double>& target,
                     const std::vector<double>& ctx) {
        const Action a = infer_action(im, cur, target, ctx);
        return std::make_pair(a.dx, a.dy);
      })
      .def("save", [](const InverseModel& c, const std::string& p) { save_checkpoint(p, to_checkpoint(c)); });

  m.def("load_cvae", [](const std::string& p) { return cvae_from_checkpoint(load_checkpoint(p, "CVAE")); });
  m.def("load_cpc", [](const std::string& p) { return connectivity_from_checkpoint(load_checkpoint(p, "CPCE")); });
  m.def("load_sptm", [](const std::string& p) { return sptm_from_checkpoint(load_checkpoint(p, "SPTM")); });
  m.def("load_inverse", [](const std::string& p) { return inverse_from_checkpoint(load_checkpoint(p, "INVM")); });

  m.def("effective_config", [](const std::string& config) { return to_json(parse_config(config)).dump(); },
        py::arg("config") = "");
  m.def("collect_dataset", [](const std::string& config) {
    const RunConfig c = parse_config(config);
    return collect_dataset(World(c.world), c.data);
  }, py::arg("config") = "");
  m.def("load_dataset", [](const std::string& dir) { return load_dataset(dir); });

  m.def("train_cvae", [](const std::string& config, const TransitionDataset& d) {
    const RunConfig c = parse_config(config);
    py::gil_scoped_release release;
    const CvaeTrainResult r = train_cvae(World(c.world), d, c.cvae);
    return std::make_pair(r.model, r.curve.validation_loss);
  });
  m.def("train_cpc", [](const std::string& config, const TransitionDataset& d, const CvaeModel* cvae) {
    const RunConfig c = parse_config(config);
    py::gil_scoped_release release;
    const CpcTrainResult r = train_cpc_stage(c, World(c.world), d, cvae);
    return std::make_pair(r.model, r.curve.validation_loss);
  }, py::arg("config"), py::arg("dataset"), py::arg("cvae") = nullptr);
  m.def("train_sptm", [](const std::string& config, const TransitionDataset& d) {
    const RunConfig c = parse_config(config);
    py::gil_scoped_release release;
    const SptmTrainResult r = train_sptm(World(c.world), d, c.sptm);
    return std::make_pair(r.model, r.curve.validation_loss);
  });
  m.def("train_inverse", [](const std::string& config, const TransitionDataset& d) {
    const RunConfig c = parse_config(config);
    py::gil_scoped_release release;
    const InverseTrainResult r = train_inverse(World(c.world), d, c.inverse);
    return std::make_pair(r.model, r.validation_error);
  });

  m.def("hallucinate", [](const CvaeModel& cvae, const World& world, const Context& c, int count, std::uint64_t seed) {
    const HallucinationSet set = hallucinate(cvae, world.encode_context(c), count, seed, world.mode(), c.id);
    Matrix out(count, static_cast<Eigen::Index>(world.observation_dim()));
    for (int k = 0; k < count; ++k) out.row(k) = row_vector(set.samples[static_cast<std::size_t>(k)].data);
    return out;
  });
  m.def("cpc_loss_from_logits", &cpc_loss_from_logits);
  m.def("mi_lower_bound", &mi_lower_bound);
  m.def("edge_weights", [](const Matrix& logits, const std::string& scheme, double s) {
    return edge_weights(logits, scheme_of(scheme, s));
  }, py::arg("logits"), py::arg("scheme") = "normalized", py::arg("s_shortcut") = 0.9);
  m.def("shortest_path", [](const Matrix& logits, int start, int goal, const std::string& scheme, double s) {
    const Plan p = shortest_path(graph_from_logits(logits, scheme_of(scheme, s)), start, goal);
    return std::make_pair(p.path, p.total);
  }, py::arg("logits"), py::arg("start"), py::arg("goal"), py::arg("scheme") = "normalized",
        py::arg("s_shortcut") = 0.9);
  m.def("jensen_bound_check", [](const Matrix& logits, const std::vector<int>& path) {
    const PlanGraph g = graph_from_logits(logits, WeightScheme::normalized());
    Plan p;
    p.path = path;
    const JensenCheck c = jensen_bound_check(g, p);
    return std::make_tuple(c.lhs, c.rhs, c.holds);
  });

  m.def("benchmark_tasks", [](const std::string& config, int count) {
    const RunConfig c = parse_config(config);
    return benchmark_tasks(World(c.world), c.data, count, c.execution.tau, c.seed);
  });
  m.def("plan", [](const std::string& config, const Task& task, const CvaeModel& cvae, const ConnectivityModel& cpc,
                   std::uint64_t seed) {
    const RunConfig c = parse_config(config);
    const World world(c.world);
    const CpcScorer scorer(cpc);
    return to_json(plan_end_to_end(task.context, world, obs_of(world, task.o_start.data),
                                   obs_of(world, task.o_goal.data), cvae, scorer, c.execution.planning, seed))
        .dump();
  });
  m.def("execute", [](const std::string& config, const Task& task, const CvaeModel* cvae,
                      const ConnectivityModel* cpc, const InverseModel& inverse, std::uint64_t seed) {
    RunConfig c = parse_config(config);
    const World world(c.world);
    std::optional<CpcScorer> scorer;
    if (cpc) scorer.emplace(*cpc);
    c.execution.use_planner = cvae && cpc;
    const ExecutionResult r =
        execute(world, task, Models{cvae, scorer ? &*scorer : nullptr, &inverse}, c.execution, seed);
    return to_json(r).dump();
  }, py::arg("config"), py::arg("task"), py::arg("cvae"), py::arg("cpc"), py::arg("inverse"), py::arg("seed"));
  m.def("evaluate", [](const std::string& config, const CvaeModel& cvae, const InverseModel& inverse,
                       const ConnectivityModel& cpc, const SptmClassifier* sptm) {
    const RunConfig c = parse_config(config);
    const CpcScorer cpc_scorer(cpc);
    std::optional<SptmScorer> sptm_scorer;
    if (sptm) sptm_scorer.emplace(*sptm);
    py::gil_scoped_release release;
    const MetricsReport r =
        evaluate(c, World(c.world), cvae, inverse, cpc_scorer, sptm_scorer ? &*sptm_scorer : nullptr);
    return std::make_pair(r.to_csv(), r.to_json().dump());
  }, py::arg("config"), py::arg("cvae"), py::arg("inverse"), py::arg("cpc"), py::arg("sptm") = nullptr);
  m.def("render_plan", [](const std::string& config, const Matrix& observations, const Task& task, int panel) {
    const World world(parse_config(config).world);
    return py::bytes(render_plan(world, observations, task.context, task.goal.position, RenderOptions{panel}));
  }, py::arg("config"), py::arg("observations"), py::arg("task"), py::arg("panel") = 64);

  m.attr("__version__") = HTM_VERSION;
}
