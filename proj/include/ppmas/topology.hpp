#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ppmas/errors.hpp"

namespace ppmas::topology {

// Agents are 1-based. Undirected graphs store each edge once as (min,max) and
// reject self-loops; directed graphs keep ordered pairs and allow self-loops
// (a self-loop in the task graph is not a cycle).
struct Graph {
  int n = 0;
  bool directed = false;
  std::set<std::pair<int, int>> edges;

  static Graph undirected(int n) { return Graph{n, false, {}}; }
  static Graph directed_graph(int n) { return Graph{n, true, {}}; }

  void add_edge(int i, int j);
  bool has_edge(int i, int j) const;
  std::vector<std::vector<int>> adjacency() const;  // undirected neighborhoods
};

// 1-hop communication neighborhood including the agent itself.
std::set<int> closed_neighbors(const Graph& gc, int i);

// Exact shortest-path hop counts from `source`; unreachable agents are absent.
std::map<int, int> bfs_distances(const Graph& g, int source);

// Agents at shortest-path distance in [2, k] from i. Requires k >= 2.
std::set<int> k_hop_neighbors(const Graph& g, int i, int k);

// Direction-agnostic intersection of the communication and task graphs;
// self-loops are dropped.
Graph intersect_graphs(const Graph& gc, const Graph& gt);

struct Clustering {
  std::vector<std::vector<int>> clusters;  // sorted members, sorted by min id
  std::vector<std::set<std::pair<int, int>>> cluster_edges;
  std::map<int, int> membership;  // agent -> cluster index (0-based)
};

// Connected components of intersect_graphs(gc, gt); singletons count.
Clustering compute_clusters(const Graph& gc, const Graph& gt);

struct ClusterDag {
  int n = 0;
  std::set<std::pair<int, int>> edges;  // 0-based cluster indices
};

// Edge C_l -> C_j iff some task owned inside C_l reads a state inside C_j.
// Throws Error("cycle") listing the offending cycle.
ClusterDag cluster_induced_dag(const Clustering& clustering, const Graph& gt);

// Observer depth: max communication distance over task-without-communication
// pairs; 0 when the task graph needs no estimation. Throws
// Error("assumption2") when such a pair is unreachable in gc.
int required_k(const Graph& gc, const Graph& gt);

// Leaves first: every DAG edge points from later to earlier in the result.
std::vector<int> topological_order(const ClusterDag& dag);

struct AssumptionCheck {
  std::string name;
  bool pass = false;
  std::string witness;  // empty on pass
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  bool all_pass() const;
  const AssumptionCheck* find(const std::string& name) const;
};

// Checks: communication connectivity, task-graph acyclicity (self-loops
// exempt), and intra-cluster task/communication containment.
AssumptionReport validate_assumptions(const Graph& gc, const Graph& gt,
                                      const Clustering& clustering);

}  // namespace ppmas::topology
