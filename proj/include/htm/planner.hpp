#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "htm/connectivity.hpp"
#include "htm/generator.hpp"

namespace htm {

enum class WeightKind { Inverse, Normalized, SptmThreshold, SptmExp };

struct WeightScheme {
  WeightKind kind = WeightKind::Normalized;
  double s_shortcut = 0.9;  // only used by SptmThreshold

  static WeightScheme inverse() { return {WeightKind::Inverse, 0.9}; }
  static WeightScheme normalized() { return {WeightKind::Normalized, 0.9}; }
  static WeightScheme threshold(double s) { return {WeightKind::SptmThreshold, s}; }
  static WeightScheme exp() { return {WeightKind::SptmExp, 0.9}; }
};

std::string to_string(WeightKind k);
WeightKind parse_weight_kind(const std::string& s);

/// Edge weights from a logit matrix. L(i, j) is the logit of moving from j to
/// i; W(i, j) is the weight of that edge. The diagonal and absent edges are
/// +infinity.
Matrix edge_weights(const Matrix& logits, const WeightScheme& scheme);

struct PlanGraph {
  Matrix nodes;    // one observation per row
  Matrix logits;   // L(i, j): from j to i
  Matrix weights;  // W(i, j): from j to i, +inf when not traversable
  WeightScheme scheme;

  Eigen::Index size() const { return weights.rows(); }
  bool has_edge(Eigen::Index from, Eigen::Index to) const;
  double weight(Eigen::Index from, Eigen::Index to) const { return weights(to, from); }
};

/// Throws ShapeError with fewer than two nodes.
PlanGraph build_graph(const Matrix& nodes, const PairScorer& scorer, std::span<const double> context,
                      const WeightScheme& scheme);
PlanGraph graph_from_logits(Matrix logits, const WeightScheme& scheme);

struct Plan {
  std::vector<int> path;  // node indices, start first
  Matrix observations;    // one row per path node
  std::vector<double> edge_weights;
  double total = 0.0;
  bool found = true;
  WeightScheme scheme;
  std::uint64_t seed = 0;
};

/// Dijkstra on the dense graph. Among minimum-total paths the lexicographically
/// smallest index sequence is returned. Throws NoPathError when the goal is not
/// reachable.
Plan shortest_path(const PlanGraph& g, int start, int goal);

struct PlanningConfig {
  int samples = 300;  // M
  WeightScheme scheme;
};

/// Node layout of end-to-end plans: start = 0, hallucinations 1..M, goal = M + 1.
Plan plan_end_to_end(const Context& context, const World& world, const Observation& start,
                     const Observation& goal, const CvaeModel& cvae, const PairScorer& scorer,
                     const PlanningConfig& config, std::uint64_t seed);

struct JensenCheck {
  double lhs = 0.0;  // log of the mean edge weight
  double rhs = 0.0;  // mean of the log edge weights
  bool holds = true;
};

/// Throws UsageError unless the graph uses NORMALIZED weights.
JensenCheck jensen_bound_check(const PlanGraph& g, const Plan& plan);

}  // namespace htm
