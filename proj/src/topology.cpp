#include "ppmas/topology.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>

namespace ppmas::topology {

namespace {

void check_id(const Graph& g, int i) {
  if (i < 1 || i > g.n) {
    throw Error("graph", "agent id " + std::to_string(i) +
                             " outside [1.." + std::to_string(g.n) + "]");
  }
}

}  // namespace

void Graph::add_edge(int i, int j) {
  check_id(*this, i);
  check_id(*this, j);
  if (!directed) {
    if (i == j) {
      throw Error("graph", "self-loop in an undirected graph");
    }
    edges.insert({std::min(i, j), std::max(i, j)});
  } else {
    edges.insert({i, j});
  }
}

bool Graph::has_edge(int i, int j) const {
  if (!directed) {
    return edges.count({std::min(i, j), std::max(i, j)}) > 0;
  }
  return edges.count({i, j}) > 0;
}

std::vector<std::vector<int>> Graph::adjacency() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n) + 1);
  for (const auto& [i, j] : edges) {
    if (i == j) continue;
    adj[static_cast<std::size_t>(i)].push_back(j);
    if (!directed) adj[static_cast<std::size_t>(j)].push_back(i);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

std::set<int> closed_neighbors(const Graph& gc, int i) {
  check_id(gc, i);
  std::set<int> out{i};
  for (const auto& [a, b] : gc.edges) {
    if (a == i) out.insert(b);
    if (b == i) out.insert(a);
  }
  return out;
}

std::map<int, int> bfs_distances(const Graph& g, int source) {
  check_id(g, source);
  const auto adj = g.adjacency();
  std::map<int, int> dist;
  dist[source] = 0;
  std::deque<int> queue{source};
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (dist.count(v) == 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

std::set<int> k_hop_neighbors(const Graph& g, int i, int k) {
  if (k < 2) {
    throw Error("k_hop", "k-hop neighborhoods are defined for k >= 2");
  }
  std::set<int> out;
  for (const auto& [j, d] : bfs_distances(g, i)) {
    if (d >= 2 && d <= k) out.insert(j);
  }
  return out;
}

Graph intersect_graphs(const Graph& gc, const Graph& gt) {
  if (gc.n != gt.n) {
    throw Error("graph", "vertex-count mismatch between graphs");
  }
  Graph out = Graph::undirected(gc.n);
  for (const auto& [i, j] : gc.edges) {
    if (gt.has_edge(i, j) || gt.has_edge(j, i)) {
      out.add_edge(i, j);
    }
  }
  return out;
}

Clustering compute_clusters(const Graph& gc, const Graph& gt) {
  const Graph inter = intersect_graphs(gc, gt);
  const auto adj = inter.adjacency();
  Clustering out;
  std::vector<bool> seen(static_cast<std::size_t>(inter.n) + 1, false);
  for (int start = 1; start <= inter.n; ++start) {
    if (seen[static_cast<std::size_t>(start)]) continue;
    std::vector<int> members;
    std::deque<int> queue{start};
    seen[static_cast<std::size_t>(start)] = true;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      members.push_back(u);
      for (int v : adj[static_cast<std::size_t>(u)]) {
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = true;
          queue.push_back(v);
        }
      }
    }
    std::sort(members.begin(), members.end());
    const int index = static_cast<int>(out.clusters.size());
    std::set<std::pair<int, int>> internal;
    for (const auto& e : inter.edges) {
      if (std::binary_search(members.begin(), members.end(), e.first) &&
          std::binary_search(members.begin(), members.end(), e.second)) {
        internal.insert(e);
      }
    }
    for (int m : members) out.membership[m] = index;
    out.clusters.push_back(std::move(members));
    out.cluster_edges.push_back(std::move(internal));
  }
  return out;
}

namespace {

// Kahn on the given edge orientation; returns empty when a cycle remains.
std::vector<int> kahn(int n, const std::set<std::pair<int, int>>& edges) {
  std::vector<int> indeg(static_cast<std::size_t>(n), 0);
  for (const auto& [u, v] : edges) indeg[static_cast<std::size_t>(v)]++;
  std::vector<int> order;
  std::set<int> ready;
  for (int u = 0; u < n; ++u) {
    if (indeg[static_cast<std::size_t>(u)] == 0) ready.insert(u);
  }
  auto remaining = edges;
  while (!ready.empty()) {
    const int u = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(u);
    for (auto it = remaining.begin(); it != remaining.end();) {
      if (it->first == u) {
        if (--indeg[static_cast<std::size_t>(it->second)] == 0) {
          ready.insert(it->second);
        }
        it = remaining.erase(it);
      } else {
        ++it;
      }
    }
  }
  if (order.size() != static_cast<std::size_t>(n)) return {};
  return order;
}

std::string describe_cycle(const std::set<std::pair<int, int>>& edges,
                           int offset) {
  // Three-color DFS; the stack slice from the back edge's head is the
  // witness cycle.
  std::map<int, std::vector<int>> adj;
  std::map<int, int> color;  // 0 new, 1 on stack, 2 finished
  for (const auto& [u, v] : edges) {
    adj[u].push_back(v);
    color.emplace(u, 0);
    color.emplace(v, 0);
  }
  std::vector<int> stack;
  const std::function<std::string(int)> dfs = [&](int u) -> std::string {
    color[u] = 1;
    stack.push_back(u);
    for (int v : adj[u]) {
      if (color[v] == 1) {
        std::ostringstream os;
        for (auto p = std::find(stack.begin(), stack.end(), v);
             p != stack.end(); ++p) {
          os << (*p + offset) << "->";
        }
        os << (v + offset);
        return os.str();
      }
      if (color[v] == 0) {
        const std::string found = dfs(v);
        if (!found.empty()) return found;
      }
    }
    stack.pop_back();
    color[u] = 2;
    return "";
  };
  for (const auto& [node, c] : color) {
    if (c == 0) {
      const std::string found = dfs(node);
      if (!found.empty()) return found;
    }
  }
  return "cycle";
}

}  // namespace

ClusterDag cluster_induced_dag(const Clustering& clustering, const Graph& gt) {
  ClusterDag dag;
  dag.n = static_cast<int>(clustering.clusters.size());
  for (const auto& [i, j] : gt.edges) {
    if (i == j) continue;
    const int ci = clustering.membership.at(i);
    const int cj = clustering.membership.at(j);
    if (ci != cj) dag.edges.insert({ci, cj});
  }
  if (kahn(dag.n, dag.edges).empty() && dag.n > 0) {
    throw Error("cycle", "cluster-induced graph contains cycle " +
                             describe_cycle(dag.edges, 1));
  }
  return dag;
}

int required_k(const Graph& gc, const Graph& gt) {
  if (gc.n != gt.n) {
    throw Error("graph", "vertex-count mismatch between graphs");
  }
  int k = 0;
  for (int i = 1; i <= gc.n; ++i) {
    const std::set<int> comm = closed_neighbors(gc, i);
    std::set<int> mismatched;
    for (const auto& [a, b] : gt.edges) {
      if (a == i && comm.count(b) == 0) mismatched.insert(b);
    }
    if (mismatched.empty()) continue;
    const auto dist = bfs_distances(gc, i);
    for (int j : mismatched) {
      auto it = dist.find(j);
      if (it == dist.end()) {
        throw Error("assumption2",
                    "agents " + std::to_string(i) + " and " +
                        std::to_string(j) +
                        " share a task but are disconnected in the "
                        "communication graph");
      }
      k = std::max(k, it->second);
    }
  }
  return k;
}

std::vector<int> topological_order(const ClusterDag& dag) {
  // Leaves first == topological order of the reversed DAG.
  std::set<std::pair<int, int>> reversed;
  for (const auto& [u, v] : dag.edges) reversed.insert({v, u});
  auto order = kahn(dag.n, reversed);
  if (order.empty() && dag.n > 0) {
    throw Error("cycle", "cluster DAG contains a cycle");
  }
  return order;
}

bool AssumptionReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const AssumptionCheck& c) { return c.pass; });
}

const AssumptionCheck* AssumptionReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

AssumptionReport validate_assumptions(const Graph& gc, const Graph& gt,
                                      const Clustering& clustering) {
  AssumptionReport report;

  // Communication graph: connected and undirected.
  {
    AssumptionCheck c{"communication_connected", true, ""};
    if (gc.directed) {
      c.pass = false;
      c.witness = "communication graph must be undirected";
    } else if (gc.n > 0) {
      const auto dist = bfs_distances(gc, 1);
      for (int i = 1; i <= gc.n; ++i) {
        if (dist.count(i) == 0) {
          c.pass = false;
          c.witness = "agent " + std::to_string(i) + " unreachable from 1";
          break;
        }
      }
    }
    report.checks.push_back(std::move(c));
  }

  // Task graph: acyclic, self-loops exempt.
  {
    AssumptionCheck c{"task_graph_acyclic", true, ""};
    std::set<std::pair<int, int>> loopless;
    for (const auto& e : gt.edges) {
      if (e.first != e.second) loopless.insert({e.first - 1, e.second - 1});
    }
    if (kahn(gt.n, loopless).empty() && gt.n > 0) {
      c.pass = false;
      c.witness = "cycle " + describe_cycle(loopless, 1);
    }
    report.checks.push_back(std::move(c));
  }

  // Intra-cluster task dependencies must be communication links.
  {
    AssumptionCheck c{"intra_cluster_communication", true, ""};
    for (const auto& [i, j] : gt.edges) {
      if (i == j) continue;
      if (clustering.membership.at(i) != clustering.membership.at(j)) continue;
      if (closed_neighbors(gc, i).count(j) == 0) {
        c.pass = false;
        c.witness = "task edge (" + std::to_string(i) + "," +
                    std::to_string(j) + ") lies inside a cluster without a "
                    "communication link";
        break;
      }
    }
    report.checks.push_back(std::move(c));
  }

  return report;
}

}  // namespace ppmas::topology
