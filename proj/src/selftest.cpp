#include "htm/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "htm/controller.hpp"
#include "htm/errors.hpp"

namespace htm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
  return m;
}

// Small random instances use tanh so finite differences never straddle a kink.
constexpr int kObs = 2;
constexpr int kCtx = 3;

GradCheckReport check_cpc(Rng& rng, double tol) {
  CpcConfig cfg;
  cfg.embed_dim = 3;
  cfg.hidden = 5;
  cfg.depth = 2;
  cfg.activation = Activation::Tanh;
  cfg.seed = rng();
  ConnectivityModel model = make_connectivity(kObs, kCtx, cfg);
  model.bilinear = uniform(3, 3, -1.0, 1.0, rng);
  CpcBatch batch;
  const int B = 3;
  batch.num_candidates = 4;
  batch.anchors = uniform(B, kObs, 0.0, 1.0, rng);
  batch.candidates = uniform(B * batch.num_candidates, kObs, 0.0, 1.0, rng);
  batch.contexts = uniform(B, kCtx, 0.0, 1.0, rng);
  batch.offsets.assign(B, 1);
  batch.hallucinated.assign(static_cast<std::size_t>(B * batch.num_candidates), 0);
  auto params = model.parameters();
  return grad_check([&](ad::Tape&, std::span<const ad::Var> v) { return cpc_loss(model, v, batch); }, params,
                    1e-5, tol);
}

GradCheckReport check_sptm(Rng& rng, double tol) {
  SptmConfig cfg;
  cfg.embed_dim = 3;
  cfg.hidden = 5;
  cfg.head_hidden = 4;
  cfg.depth = 2;
  cfg.activation = Activation::Tanh;
  cfg.seed = rng();
  SptmClassifier model = make_sptm(kObs, kCtx, cfg);
  LabeledPairs batch;
  const int B = 4;
  batch.from = uniform(B, kObs, 0.0, 1.0, rng);
  batch.to = uniform(B, kObs, 0.0, 1.0, rng);
  batch.contexts = uniform(B, kCtx, 0.0, 1.0, rng);
  batch.labels = Matrix(B, 1);
  for (int b = 0; b < B; ++b) batch.labels(b, 0) = static_cast<double>(rng() % 2);
  auto params = model.parameters();
  return grad_check([&](ad::Tape&, std::span<const ad::Var> v) { return sptm_bce_loss(model, v, batch); },
                    params, 1e-5, tol);
}

GradCheckReport check_cvae(Rng& rng, double tol) {
  CvaeConfig cfg;
  cfg.latent_dim = 2;
  cfg.hidden = 5;
  cfg.depth = 2;
  cfg.beta = 0.5;
  cfg.activation = Activation::Tanh;
  cfg.seed = rng();
  CvaeModel model = make_cvae(kObs, kCtx, cfg);
  const int B = 4;
  const Matrix obs = uniform(B, kObs, 0.0, 1.0, rng);
  const Matrix ctx = uniform(B, kCtx, 0.0, 1.0, rng);
  const Matrix noise = standard_normal(B, cfg.latent_dim, rng());
  auto params = model.parameters();
  return grad_check(
      [&](ad::Tape&, std::span<const ad::Var> v) { return cvae_elbo(model, v, obs, ctx, noise).total; }, params,
      1e-5, tol);
}

GradCheckReport check_inverse(Rng& rng, double tol) {
  InverseConfig cfg;
  cfg.hidden = 5;
  cfg.depth = 2;
  cfg.activation = Activation::Tanh;
  cfg.seed = rng();
  InverseModel model = make_inverse(kObs, kCtx, 0.1, cfg);
  const int B = 4;
  TransitionBatch batch{uniform(B, kObs, 0.0, 1.0, rng), uniform(B, kObs, 0.0, 1.0, rng),
                        uniform(B, kCtx, 0.0, 1.0, rng), uniform(B, 2, -0.1, 0.1, rng)};
  auto params = model.parameters();
  return grad_check([&](ad::Tape&, std::span<const ad::Var> v) { return inverse_loss(model, v, batch); },
                    params, 1e-5, tol);
}

SuiteResult finish(SuiteResult r) {
  r.passed = r.failures == 0;
  return r;
}

}  // namespace

std::string to_string(GradLoss l) {
  switch (l) {
    case GradLoss::Cpc: return "cpc_loss";
    case GradLoss::SptmBce: return "sptm_bce_loss";
    case GradLoss::CvaeElbo: return "cvae_elbo";
    case GradLoss::Inverse: return "inverse_loss";
  }
  return "unknown";
}

SuiteResult gradient_suite(GradLoss loss, int instances, std::uint64_t seed, double tol) {
  SuiteResult r;
  r.name = "gradient " + to_string(loss);
  Rng rng(seed);
  for (int k = 0; k < instances; ++k) {
    GradCheckReport rep;
    switch (loss) {
      case GradLoss::Cpc: rep = check_cpc(rng, tol); break;
      case GradLoss::SptmBce: rep = check_sptm(rng, tol); break;
      case GradLoss::CvaeElbo: rep = check_cvae(rng, tol); break;
      case GradLoss::Inverse: rep = check_inverse(rng, tol); break;
    }
    ++r.instances;
    r.failures += !rep.passed;
    r.worst = std::max(r.worst, rep.worst);
  }
  return finish(r);
}

double brute_force_shortest(const PlanGraph& g, int start, int goal) {
  const auto n = static_cast<int>(g.size());
  if (start == goal) return 0.0;
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  double best = kInf;
  std::function<void(int, double)> dfs = [&](int u, double acc) {
    if (u == goal) {
      best = std::min(best, acc);
      return;
    }
    used[static_cast<std::size_t>(u)] = 1;
    for (int v = 0; v < n; ++v) {
      if (used[static_cast<std::size_t>(v)] || !g.has_edge(u, v)) continue;
      dfs(v, acc + g.weight(u, v));
    }
    used[static_cast<std::size_t>(u)] = 0;
  };
  dfs(start, 0.0);
  return best;
}

double bellman_ford_shortest(const PlanGraph& g, int start, int goal) {
  const auto n = static_cast<int>(g.size());
  std::vector<double> d(static_cast<std::size_t>(n), kInf);
  d[static_cast<std::size_t>(start)] = 0.0;
  for (int round = 0; round + 1 < n; ++round) {
    bool changed = false;
    for (int u = 0; u < n; ++u) {
      if (!std::isfinite(d[static_cast<std::size_t>(u)])) continue;
      for (int v = 0; v < n; ++v) {
        if (!g.has_edge(u, v)) continue;
        const double cand = d[static_cast<std::size_t>(u)] + g.weight(u, v);
        if (cand < d[static_cast<std::size_t>(v)]) {
          d[static_cast<std::size_t>(v)] = cand;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  return d[static_cast<std::size_t>(goal)];
}

PlanGraph random_graph(int nodes, const WeightScheme& scheme, double scale, std::uint64_t seed) {
  Rng rng(seed);
  return graph_from_logits(uniform(nodes, nodes, -scale, scale, rng), scheme);
}

namespace {

WeightScheme pick_scheme(Rng& rng) {
  switch (rng() % 4) {
    case 0: return WeightScheme::inverse();
    case 1: return WeightScheme::normalized();
    case 2: return WeightScheme::threshold(0.3);
    default: return WeightScheme::exp();
  }
}

SuiteResult dijkstra_suite(const std::string& name, int graphs, int max_nodes, std::uint64_t seed,
                           double (*oracle)(const PlanGraph&, int, int)) {
  SuiteResult r;
  r.name = name;
  Rng rng(seed);
  for (int k = 0; k < graphs; ++k) {
    const int n = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_nodes - 1));
    const WeightScheme scheme = pick_scheme(rng);
    const PlanGraph g = random_graph(n, scheme, 3.0, rng());
    const int start = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    const int goal = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    const double expected = oracle(g, start, goal);
    double got = kInf;
    try {
      got = shortest_path(g, start, goal).total;
    } catch (const NoPathError&) {
    }
    const bool both_inf = !std::isfinite(expected) && !std::isfinite(got);
    const double err = both_inf ? 0.0 : std::abs(got - expected) / std::max(1.0, std::abs(expected));
    ++r.instances;
    r.worst = std::max(r.worst, std::isnan(err) ? kInf : err);
    if (!(err <= 1e-9)) ++r.failures;
  }
  return finish(r);
}

}  // namespace

SuiteResult dijkstra_brute_force_suite(int graphs, int max_nodes, std::uint64_t seed) {
  return dijkstra_suite("dijkstra vs brute force", graphs, max_nodes, seed, brute_force_shortest);
}

SuiteResult dijkstra_bellman_ford_suite(int graphs, int max_nodes, std::uint64_t seed) {
  return dijkstra_suite("dijkstra vs bellman-ford", graphs, max_nodes, seed, bellman_ford_shortest);
}

SuiteResult weight_identity_suite(int graphs, std::uint64_t seed) {
  SuiteResult r;
  r.name = "weight identities";
  Rng rng(seed);
  for (int k = 0; k < graphs; ++k) {
    const int n = 2 + static_cast<int>(rng() % 30);
    ++r.instances;
    bool ok = true;
    const Matrix zero = Matrix::Zero(n, n);
    const Matrix wn = edge_weights(zero, WeightScheme::normalized());
    const Matrix wi = edge_weights(zero, WeightScheme::inverse());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        ok = ok && wn(i, j) == static_cast<double>(n) && wi(i, j) == 1.0;
      }
    }
    // Shifting every logit out of node j leaves its NORMALIZED weights intact.
    const Matrix logits = uniform(n, n, -20.0, 20.0, rng);
    Matrix shifted = logits;
    std::uniform_real_distribution<double> shift(-100.0, 100.0);
    for (int j = 0; j < n; ++j) shifted.col(j).array() += shift(rng);
    const Matrix a = edge_weights(logits, WeightScheme::normalized());
    const Matrix b = edge_weights(shifted, WeightScheme::normalized());
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double err = std::abs(a(i, j) - b(i, j)) / a(i, j);
        r.worst = std::max(r.worst, err);
        ok = ok && err <= 1e-9;
      }
    }
    r.failures += !ok;
  }
  return finish(r);
}

SuiteResult jensen_suite(int trials, std::uint64_t seed) {
  SuiteResult r;
  r.name = "jensen bound";
  Rng rng(seed);
  for (int k = 0; k < trials; ++k) {
    const int n = 2 + static_cast<int>(rng() % 40);
    const double scale = std::uniform_real_distribution<double>(0.1, 50.0)(rng);
    const PlanGraph g = random_graph(n, WeightScheme::normalized(), scale, rng());
    // Random walk without immediate self-loops.
    const int len = 1 + static_cast<int>(rng() % 12);
    Plan plan;
    plan.scheme = g.scheme;
    plan.path.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(n)));
    for (int s = 0; s < len; ++s) {
      int next = static_cast<int>(rng() % static_cast<std::uint64_t>(n - 1));
      if (next >= plan.path.back()) ++next;
      plan.path.push_back(next);
    }
    const JensenCheck c = jensen_bound_check(g, plan);
    ++r.instances;
    r.worst = std::max(r.worst, std::max(0.0, c.rhs - c.lhs));
    r.failures += !c.holds;
  }
  return finish(r);
}

std::vector<SuiteResult> run_selftest(std::uint64_t seed) {
  std::vector<SuiteResult> out;
  for (GradLoss l : {GradLoss::Cpc, GradLoss::SptmBce, GradLoss::CvaeElbo, GradLoss::Inverse}) {
    out.push_back(gradient_suite(l, 20, derive_seed(seed, 1, static_cast<std::uint64_t>(l))));
  }
  out.push_back(dijkstra_brute_force_suite(100, 8, derive_seed(seed, 2)));
  out.push_back(dijkstra_bellman_ford_suite(100, 64, derive_seed(seed, 3)));
  out.push_back(weight_identity_suite(100, derive_seed(seed, 4)));
  out.push_back(jensen_suite(1000, derive_seed(seed, 5)));
  return out;
}

}  // namespace htm
