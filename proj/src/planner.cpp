#include "htm/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "htm/errors.hpp"

namespace htm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

struct GoalTree {
  std::vector<double> dist;  // shortest distance to the goal
  std::vector<int> order;    // settle order, -1 when unreachable
  std::vector<int> via;      // next node on one shortest path
};

// Dijkstra along reversed edges, rooted at `goal`.
GoalTree distances_to(const PlanGraph& g, int goal) {
  const auto n = static_cast<int>(g.size());
  GoalTree tree;
  tree.dist.assign(static_cast<std::size_t>(n), kInf);
  tree.order.assign(static_cast<std::size_t>(n), -1);
  tree.via.assign(static_cast<std::size_t>(n), -1);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  tree.dist[static_cast<std::size_t>(goal)] = 0.0;
  queue.emplace(0.0, goal);
  int settled = 0;
  while (!queue.empty()) {
    const auto [d, v] = queue.top();
    queue.pop();
    if (tree.order[static_cast<std::size_t>(v)] >= 0) continue;
    tree.order[static_cast<std::size_t>(v)] = settled++;
    for (int u = 0; u < n; ++u) {
      if (u == v || tree.order[static_cast<std::size_t>(u)] >= 0) continue;
      const double w = g.weight(u, v);
      if (!std::isfinite(w)) continue;
      if (d + w < tree.dist[static_cast<std::size_t>(u)]) {
        tree.dist[static_cast<std::size_t>(u)] = d + w;
        tree.via[static_cast<std::size_t>(u)] = v;
        queue.emplace(d + w, u);
      }
    }
  }
  return tree;
}

}  // namespace

std::string to_string(WeightKind k) {
  switch (k) {
    case WeightKind::Inverse: return "inverse";
    case WeightKind::Normalized: return "normalized";
    case WeightKind::SptmThreshold: return "sptm_threshold";
    case WeightKind::SptmExp: return "sptm_exp";
  }
  return "unknown";
}

WeightKind parse_weight_kind(const std::string& s) {
  if (s == "inverse") return WeightKind::Inverse;
  if (s == "normalized") return WeightKind::Normalized;
  if (s == "sptm_threshold") return WeightKind::SptmThreshold;
  if (s == "sptm_exp") return WeightKind::SptmExp;
  throw ConfigError("unknown weight scheme '" + s + "'", "planning.scheme");
}

Matrix edge_weights(const Matrix& logits, const WeightScheme& scheme) {
  if (logits.rows() != logits.cols()) throw ShapeError("logit matrix must be square");
  if (scheme.kind == WeightKind::SptmThreshold &&
      !(scheme.s_shortcut > 0.0 && scheme.s_shortcut < 1.0)) {
    throw ConfigError("s_shortcut must lie in (0, 1)", "planning.s_shortcut");
  }
  const Eigen::Index n = logits.rows();
  Matrix w(n, n);
  // NORMALIZED weights are sum_s exp(L(s,j) - m_j) / exp(L(i,j) - m_j) with
  // m_j the column maximum; the sum lies in [1, n]. Uniform logits give
  // exactly n. Ratios whose denominator would underflow go through logs.
  std::vector<double> column_max(static_cast<std::size_t>(n), 0.0);
  std::vector<double> column_sum(static_cast<std::size_t>(n), 0.0);
  if (scheme.kind == WeightKind::Normalized) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double m = logits.col(j).maxCoeff();
      if (!std::isfinite(m)) throw EvaluationError("edge_weights: non-finite logit");
      double sum = 0.0;
      for (Eigen::Index s = 0; s < n; ++s) sum += std::exp(logits(s, j) - m);
      column_max[static_cast<std::size_t>(j)] = m;
      column_sum[static_cast<std::size_t>(j)] = sum;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) {
        w(i, j) = kInf;
        continue;
      }
      const double x = logits(i, j);
      switch (scheme.kind) {
        case WeightKind::Inverse: w(i, j) = std::exp(-x); break;
        case WeightKind::Normalized:
{
          const double shifted = x - column_max[static_cast<std::size_t>(j)];
          const double sum = column_sum[static_cast<std::size_t>(j)];
          w(i, j) = shifted > -700.0 ? sum / std::exp(shifted) : std::exp(std::log(sum) - shifted);
          break;
        }
        case WeightKind::SptmThreshold: w(i, j) = sigmoid(x) >= scheme.s_shortcut ? 1.0 : kInf; break;
        // 1 / sigmoid(x): the inverse of the classifier probability.
        case WeightKind::SptmExp: w(i, j) = 1.0 + std::exp(-x); break;
      }
    }
  }
  return w;
}

bool PlanGraph::has_edge(Eigen::Index from, Eigen::Index to) const {
  return from != to && std::isfinite(weights(to, from));
}

PlanGraph graph_from_logits(Matrix logits, const WeightScheme& scheme) {
  if (logits.rows() < 2) throw ShapeError("a plan graph needs at least two nodes");
  PlanGraph g;
  g.weights = edge_weights(logits, scheme);
  g.logits = std::move(logits);
  g.scheme = scheme;
  return g;
}

PlanGraph build_graph(const Matrix& nodes, const PairScorer& scorer, std::span<const double> context,
                      const WeightScheme& scheme) {
  if (nodes.rows() < 2) throw ShapeError("a plan graph needs at least two nodes");
  PlanGraph g = graph_from_logits(scorer.logit_matrix(nodes, context), scheme);
  g.nodes = nodes;
  return g;
}

Plan shortest_path(const PlanGraph& g, int start, int goal) {
  const auto n = static_cast<int>(g.size());
  if (start < 0 || start >= n || goal < 0 || goal >= n) {
    throw UsageError("shortest_path: node index out of range");
  }
  Plan plan;
  plan.scheme = g.scheme;
  const GoalTree tree = distances_to(g, goal);
  const auto& dist = tree.dist;
  if (!std::isfinite(dist[static_cast<std::size_t>(start)])) {
    throw NoPathError("goal node " + std::to_string(goal) + " is unreachable from node " +
                      std::to_string(start));
  }
  plan.path.push_back(start);
  int u = start;
  while (u != goal) {
    // Smallest index that continues some shortest path. Only nodes settled
    // before u qualify, which rules out cycles when weights are tiny next to
    // the distances.
    const double du = dist[static_cast<std::size_t>(u)];
    const double slack = 1e-12 * std::max(1.0, du);
    const int order_u = tree.order[static_cast<std::size_t>(u)];
    int next = tree.via[static_cast<std::size_t>(u)];
    for (int v = 0; v < next; ++v) {
      const int order_v = tree.order[static_cast<std::size_t>(v)];
      if (!g.has_edge(u, v) || order_v < 0 || order_v >= order_u) continue;
      if (std::abs(g.weight(u, v) + dist[static_cast<std::size_t>(v)] - du) <= slack) {
        next = v;
        break;
      }
    }
    plan.edge_weights.push_back(g.weight(u, next));
    plan.total += plan.edge_weights.back();
    plan.path.push_back(next);
    u = next;
  }
  if (g.nodes.rows() == n) {
    plan.observations.resize(static_cast<Eigen::Index>(plan.path.size()), g.nodes.cols());
    for (std::size_t k = 0; k < plan.path.size(); ++k) {
      plan.observations.row(static_cast<Eigen::Index>(k)) = g.nodes.row(plan.path[k]);
    }
  }
  return plan;
}

Plan plan_end_to_end(const Context& context, const World& world, const Observation& start,
                     const Observation& goal, const CvaeModel& cvae, const PairScorer& scorer,
                     const PlanningConfig& config, std::uint64_t seed) {
  if (config.samples < 0) throw ConfigError("planning.M must be nonnegative", "planning.M");
  const std::vector<double> enc = world.encode_context(context);
  const HallucinationSet set = hallucinate(cvae, enc, config.samples, seed, world.mode(), context.id);
  const auto dim = static_cast<Eigen::Index>(world.observation_dim());
  if (static_cast<Eigen::Index>(start.data.size()) != dim ||
      static_cast<Eigen::Index>(goal.data.size()) != dim) {
    throw ShapeError("plan: start/goal observation length does not match the world");
  }
  Matrix nodes(config.samples + 2, dim);
  nodes.row(0) = row_vector(start.data);
  for (int m = 0; m < config.samples; ++m) nodes.row(m + 1) = row_vector(set.samples[static_cast<std::size_t>(m)].data);
  nodes.row(config.samples + 1) = row_vector(goal.data);
  const PlanGraph g = build_graph(nodes, scorer, enc, config.scheme);
  Plan plan = shortest_path(g, 0, config.samples + 1);
  plan.seed = seed;
  return plan;
}

JensenCheck jensen_bound_check(const PlanGraph& g, const Plan& plan) {
  if (g.scheme.kind != WeightKind::Normalized) {
    throw UsageError("the Jensen bound is defined for NORMALIZED weights only");
  }
  JensenCheck check;
  const std::size_t T = plan.path.size() < 2 ? 0 : plan.path.size() - 1;
  if (T == 0) return check;
  std::vector<double> logs;
  for (std::size_t k = 0; k < T; ++k) {
    const int from = plan.path[k];
    const int to = plan.path[k + 1];
    if (!g.has_edge(from, to)) throw UsageError("plan uses an edge that is not in the graph");
    logs.push_back(std::log(g.weight(from, to)));
  }
  // Both sides are taken relative to the largest log-weight, so equal weights
  // give lhs == rhs exactly.
  const double top = *std::max_element(logs.begin(), logs.end());
  double mean_ratio = 0.0;
  double mean_shift = 0.0;
  for (double l : logs) {
    mean_ratio += std::exp(l - top);
    mean_shift += l - top;
  }
  check.lhs = top + std::log(mean_ratio / static_cast<double>(T));
  check.rhs = top + mean_shift / static_cast<double>(T);
  check.holds = check.lhs >= check.rhs - 1e-12;
  return check;
}

}  // namespace htm
