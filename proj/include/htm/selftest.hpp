#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "htm/planner.hpp"

namespace htm {

struct SuiteResult {
  std::string name;
  int instances = 0;
  int failures = 0;
  double worst = 0.0;  // largest error observed
  bool passed = true;
};

enum class GradLoss { Cpc, SptmBce, CvaeElbo, Inverse };
std::string to_string(GradLoss l);

/// Finite-difference checks of one training loss on `instances` random small
/// models and batches.
SuiteResult gradient_suite(GradLoss loss, int instances, std::uint64_t seed, double tol = 1e-4);

/// Minimum path total by exhaustive enumeration of simple paths; +inf when
/// the goal is unreachable.
double brute_force_shortest(const PlanGraph& g, int start, int goal);
/// Independent Bellman-Ford relaxation.
double bellman_ford_shortest(const PlanGraph& g, int start, int goal);

/// Random dense graph with logits uniform in [-scale, scale]. Thresholded
/// schemes may leave edges absent.
PlanGraph random_graph(int nodes, const WeightScheme& scheme, double scale, std::uint64_t seed);

/// Dijkstra against brute force (graphs with at most `max_nodes` nodes).
SuiteResult dijkstra_brute_force_suite(int graphs, int max_nodes, std::uint64_t seed);
/// Dijkstra against Bellman-Ford.
SuiteResult dijkstra_bellman_ford_suite(int graphs, int max_nodes, std::uint64_t seed);
/// Zero logits and column-shift identities of the weight schemes.
SuiteResult weight_identity_suite(int graphs, std::uint64_t seed);
/// Random paths on random NORMALIZED graphs; counts Jensen violations.
SuiteResult jensen_suite(int trials, std::uint64_t seed);

std::vector<SuiteResult> run_selftest(std::uint64_t seed);

}  // namespace htm
