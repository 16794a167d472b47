// Acceptance gate: one line per criterion, nonzero exit when any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>

#include "ppmas/scenario.hpp"

using namespace ppmas;
using nlohmann::json;

namespace {

constexpr const char* kScenario = "scenarios/paper_sec5.json";

int failures = 0;

void report(int index, const std::string& label, bool pass,
            const std::string& detail = "") {
  std::cout << "criterion " << index << " (" << label << "): "
            << (pass ? "PASS" : "FAIL");
  if (!detail.empty()) std::cout << " [" << detail << "]";
  std::cout << "\n";
  if (!pass) ++failures;
}

bool guarded(int index, const std::string& label,
             const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool pass = false;
  try {
    pass = body(detail);
  } catch (const std::exception& ex) {
    detail = ex.what();
  }
  report(index, label, pass, detail);
  return pass;
}

double seconds_since(
    const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

json load_doc() {
  std::ifstream in(kScenario);
  json doc;
  in >> doc;
  return doc;
}

json& task_named(json& doc, const std::string& name) {
  for (auto& t : doc["tasks"]) {
    if (t["name"] == name) return t;
  }
  throw std::runtime_error("task " + name + " not found");
}

std::string rejection(const json& doc) {
  try {
    scenario::parse_scenario(doc);
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

struct CaseStudy {
  scenario::Scenario sc;
  sim::RunResult result;
  scenario::Report rep;
  double runtime = 0.0;
};

CaseStudy run_case_study(std::optional<std::uint64_t> seed = {}) {
  scenario::Overrides ov;
  ov.seed = seed;
  CaseStudy cs{scenario::load_scenario(kScenario, ov), {}, {}, 0.0};
  const auto start = std::chrono::steady_clock::now();
  cs.result = sim::run(cs.sc.model);
  cs.runtime = seconds_since(start);
  cs.rep = scenario::verify_trace(cs.sc, cs.result.trace, &cs.result.faults);
  return cs;
}

// Terminal plant and estimate coordinates, for the integration-order study.
Eigen::VectorXd terminal_state(const sim::Trace& trace) {
  std::vector<double> values;
  const auto& last = trace.rows.back();
  for (std::size_t c = 0; c < trace.columns.size(); ++c) {
    const std::string& name = trace.columns[c];
    if (name.rfind("x_", 0) == 0 || name.rfind("xhat_", 0) == 0) {
      values.push_back(last[c]);
    }
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(),
                                     static_cast<Eigen::Index>(values.size()));
}

std::vector<int> component_oracle(const topology::Graph& gc,
                                  const topology::Graph& gt) {
  std::vector<int> parent(static_cast<std::size_t>(gc.n) + 1);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    return parent[static_cast<std::size_t>(a)] == a
               ? a
               : parent[static_cast<std::size_t>(a)] = find(
                     parent[static_cast<std::size_t>(a)]);
  };
  for (const auto& [i, j] : gt.edges) {
    if (i != j && gc.has_edge(i, j)) parent[static_cast<std::size_t>(find(i))] = find(j);
  }
  std::vector<int> label(static_cast<std::size_t>(gc.n) + 1);
  for (int a = 1; a <= gc.n; ++a) label[static_cast<std::size_t>(a)] = find(a);
  return label;
}

}  // namespace

int main() {
  // Criteria 1-3 all read off the same case-study run.
  CaseStudy base;
  bool have_base = guarded(1, "case-study temporal robustness", [&](std::string& d) {
    base = run_case_study();
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& task : base.rep.tasks) worst = std::min(worst, task.robustness);
    char buf[96];
    std::snprintf(buf, sizeof buf, "min robustness %.3f, %.2f s", worst,
                  base.runtime);
    d = buf;
    return base.rep.tasks.size() == 5 && worst > 0.0 && base.runtime < 30.0;
  });

  guarded(2, "observer error under its envelope", [&](std::string& d) {
    if (!have_base) return false;
    long violations = 0;
    for (const auto& s : base.rep.observer_bounds) violations += s.violations;
    d = std::to_string(base.rep.observer_bounds.size()) + " pairs, " +
        std::to_string(violations) + " violations";
    return base.rep.observer_bounds.size() == 10 && violations == 0;
  });

  guarded(3, "funnel containment without clamps", [&](std::string& d) {
    if (!have_base) return false;
    long violations = 0;
    for (const auto& s : base.rep.funnel_containment) violations += s.violations;
    d = std::to_string(violations) + " violations, " +
        std::to_string(base.result.faults.events.size()) + " faults";
    return violations == 0 && base.result.faults.empty() && base.rep.pass;
  });

  guarded(4, "ten-seed robustness", [&](std::string& d) {
    int passed = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto cs = run_case_study(seed);
      bool ok = cs.rep.pass && cs.result.faults.empty();
      for (const auto& task : cs.rep.tasks) ok = ok && task.robustness > 0.0;
      for (const auto& s : cs.rep.observer_bounds) ok = ok && s.violations == 0;
      for (const auto& s : cs.rep.funnel_containment) ok = ok && s.violations == 0;
      if (ok) ++passed;
    }
    d = std::to_string(passed) + "/10 seeds";
    return passed == 10;
  });

  guarded(5, "robustness gradients vs finite differences", [&](std::string& d) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::uniform_int_distribution<int> conj(1, 3);
    std::uniform_int_distribution<int> coin(0, 1);
    const stl::SmoothMinConfig cfg{10.0};
    bool ok = true;
    for (int trial = 0; trial < 100; ++trial) {
      stl::PredicateTable t;
      stl::Body body;
      const int n = conj(rng);
      for (int j = 0; j < n; ++j) {
        stl::Predicate p;
        p.agents = {1, 2};
        if (coin(rng)) {
          p.kind = stl::PredicateKind::Norm2Le;
          Eigen::MatrixXd c1(2, 2), c2(2, 2);
          c1 << u(rng), u(rng), u(rng), u(rng);
          c2 << u(rng), u(rng), u(rng), u(rng);
          p.coeffs = {c1, c2};
          p.offset = Eigen::Vector2d(u(rng), u(rng));
          p.radius_sq = 5.0 + std::abs(u(rng));
        } else {
          p.kind = stl::PredicateKind::Linear;
          p.coeffs = {Eigen::Vector2d(u(rng), u(rng)),
                      Eigen::Vector2d(u(rng), u(rng))};
          p.bias = u(rng);
        }
        const std::string name = "q" + std::to_string(j);
        t[name] = p;
        body.literals.push_back({name, coin(rng) == 1, false});
      }
      stl::AgentStates x;
      x[1] = Eigen::Vector2d(u(rng), u(rng));
      x[2] = Eigen::Vector2d(u(rng), u(rng));
      const Eigen::VectorXd grad = stl::grad_robustness(body, x, t, 1, cfg);
      const double h = 1e-6;
      for (int c = 0; c < 2; ++c) {
        stl::AgentStates hi = x, lo = x;
        hi[1][c] += h;
        lo[1][c] -= h;
        const double fd = (stl::eval_robustness(body, hi, t, cfg) -
                           stl::eval_robustness(body, lo, t, cfg)) /
                          (2 * h);
        ok = ok && std::abs(grad[c] - fd) <=
                       1e-5 * std::max(1.0, std::abs(grad[c]));
      }
    }
    const double elapsed = seconds_since(start);
    char buf[64];
    std::snprintf(buf, sizeof buf, "100 instances, %.3f s", elapsed);
    d = buf;
    return ok && elapsed < 5.0;
  });

  guarded(6, "smooth-min under-approximation bounds", [&](std::string& d) {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    std::uniform_int_distribution<int> len(1, 8);
    std::uniform_real_distribution<double> etas(0.5, 40.0);
    bool ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = len(rng);
      Eigen::VectorXd v(n);
      for (int i = 0; i < n; ++i) v[i] = u(rng);
      const double eta = etas(rng);
      const auto r = stl::smooth_min(v, eta);
      const double exact = v.minCoeff();
      ok = ok && r.value <= exact &&
           exact - r.value <= std::log(double(n)) / eta;
    }
    d = "1000 vectors";
    return ok;
  });

  guarded(7, "topology against brute-force oracles", [&](std::string& d) {
    const auto sc = scenario::load_scenario(kScenario);
    bool ok = sc.k == 3 && sc.clustering.clusters.size() == 2 &&
              sc.clustering.clusters[0] == std::vector<int>{1, 2, 3} &&
              sc.clustering.clusters[1] == std::vector<int>{4, 5};

    std::mt19937 rng(17);
    for (int trial = 0; trial < 100 && ok; ++trial) {
      std::uniform_int_distribution<int> size(3, 12);
      const int n = size(rng);
      std::uniform_int_distribution<int> v(1, n);
      auto gc = topology::Graph::undirected(n);
      for (int a = 2; a <= n; ++a) gc.add_edge(a - 1, a);
      auto gt = topology::Graph::directed_graph(n);
      for (int e = 0; e < 2 * n; ++e) {
        const int a = v(rng), b = v(rng);
        if (a != b && !gc.has_edge(a, b)) gc.add_edge(a, b);
        const int c = v(rng), f = v(rng);
        if (!gt.has_edge(c, f)) gt.add_edge(c, f);
      }

      const auto clustering = topology::compute_clusters(gc, gt);
      const auto labels = component_oracle(gc, gt);
      std::set<int> distinct;
      std::size_t covered = 0;
      for (const auto& cluster : clustering.clusters) {
        covered += cluster.size();
        for (int a : cluster) ok = ok && labels[static_cast<std::size_t>(a)] ==
                                         labels[static_cast<std::size_t>(cluster.front())];
      }
      for (int a = 1; a <= n; ++a) distinct.insert(labels[static_cast<std::size_t>(a)]);
      ok = ok && covered == std::size_t(n) &&
           clustering.clusters.size() == distinct.size();

      // Depth: all-pairs BFS over task edges without a matching link.
      int want_k = 0;
      for (const auto& [i, j] : gt.edges) {
        if (i == j || gc.has_edge(i, j)) continue;
        want_k = std::max(want_k, topology::bfs_distances(gc, i).at(j));
      }
      ok = ok && topology::required_k(gc, gt) == want_k;

      // Cluster DAG edges recomputed straight from the memberships.
      try {
        const auto dag = topology::cluster_induced_dag(clustering, gt);
        std::set<std::pair<int, int>> want;
        for (const auto& [i, j] : gt.edges) {
          const int ci = clustering.membership.at(i);
          const int cj = clustering.membership.at(j);
          if (ci != cj) want.insert({ci, cj});
        }
        ok = ok && dag.edges == want;
        for (const auto& [a, b] : want) ok = ok && want.count({b, a}) == 0;
      } catch (const Error& e) {
        // A rejected DAG must contain an actual two-way cluster dependency.
        bool mutual = false;
        std::set<std::pair<int, int>> want;
        for (const auto& [i, j] : gt.edges) {
          const int ci = clustering.membership.at(i);
          const int cj = clustering.membership.at(j);
          if (ci != cj) {
            if (want.count({cj, ci})) mutual = true;
            want.insert({ci, cj});
          }
        }
        ok = ok && std::string(e.code()) == "cycle" && mutual;
      }
    }
    d = "100 random graphs";
    return ok;
  });

  guarded(8, "estimation margin soundness grid", [&](std::string& d) {
    // r and Delta sit on the 1/64 lattice; scaling y = (r-Delta)i/200 and
    // e = Delta*j/200 by 64*200 decides margin >= (y+e)^2 - y^2 exactly:
    // 40000*(2DR - D^2) >= E*(2Y + E) in 64-bit integers.
    std::mt19937 rng(29);
    std::uniform_int_distribution<std::int64_t> radii(32, 640);
    std::uniform_real_distribution<double> fractions(0.05, 0.95);
    bool ok = true;
    for (int pair = 0; pair < 50; ++pair) {
      const std::int64_t R = radii(rng);
      const std::int64_t D = std::max<std::int64_t>(
          1, std::llround(fractions(rng) * double(R)));
      for (std::int64_t i = 0; i <= 200; ++i) {
        const std::int64_t y = (R - D) * i;
        for (std::int64_t j = 0; j <= 200; ++j) {
          const std::int64_t e = D * j;
          ok = ok && 40000 * (2 * D * R - D * D) >= e * (2 * y + e);
        }
      }
    }
    d = "50 pairs x 200x200 grid";
    return ok;
  });

  guarded(9, "validator names every broken assumption", [&](std::string& d) {
    auto split = load_doc();
    json edges = json::array();
    for (const auto& e : split["communication_edges"]) {
      if (!(e[0] == 4 && e[1] == 5)) edges.push_back(e);
    }
    split["communication_edges"] = edges;

    auto cyclic = load_doc();
    task_named(cyclic, "phi4")["formula"] = "G[1,2](p2_24)";

    auto gap = load_doc();
    json kept = json::array();
    for (const auto& e : gap["communication_edges"]) {
      if (!(e[0] == 2 && e[1] == 3)) kept.push_back(e);
    }
    gap["communication_edges"] = kept;

    auto sunk = load_doc();
    task_named(sunk, "phi2")["gamma"] = {
        {"v0", 48.0}, {"v_inf", 0.5}, {"decay", 2.0}};

    auto wide = load_doc();
    task_named(wide, "phi1")["gamma"] = {
        {"v0", 5.0}, {"v_inf", 4.0}, {"decay", 1.0}};

    auto narrow = load_doc();
    task_named(narrow, "phi1")["gamma"] = {
        {"v0", 0.25}, {"v_inf", 0.1}, {"decay", 1.0}};

    const std::vector<std::pair<json, std::string>> cases = {
        {split, "assumption2"},  {cyclic, "assumption3"},
        {gap, "assumption4"},    {sunk, "assumption6"},
        {wide, "feasibility"},   {narrow, "initialization"}};
    int matched = 0;
    for (const auto& [doc, want] : cases) {
      if (rejection(doc) == want) ++matched;
    }
    d = std::to_string(matched) + "/6 named rejections";
    return matched == 6;
  });

  guarded(10, "byte-identical reruns", [&](std::string& d) {
    const auto sc = scenario::load_scenario(kScenario);
    const std::string a = sim::run(sc.model).trace.emit_csv();
    const std::string b = sim::run(sc.model).trace.emit_csv();
    d = std::to_string(a.size()) + " bytes";
    return !a.empty() && a == b;
  });

  guarded(11, "fourth-order step-halving contraction", [&](std::string& d) {
    auto sc = scenario::load_scenario(kScenario);
    sc.model.disturbance.bound = 0.0;
    sc.model.horizon = 0.2;

    const auto solve = [&](double dt) {
      sim::Model m = sc.model;
      m.dt = dt;
      const auto r = sim::run(m);
      if (!r.faults.empty()) throw std::runtime_error("faulted at dt");
      return terminal_state(r.trace);
    };
    const Eigen::VectorXd reference = solve(1e-5);
    const double e1 = (solve(1e-3) - reference).norm();
    const double e2 = (solve(5e-4) - reference).norm();
    const double e3 = (solve(2.5e-4) - reference).norm();
    char buf[96];
    std::snprintf(buf, sizeof buf, "ratios %.1f, %.1f", e1 / e2, e2 / e3);
    d = buf;
    return e2 > 0.0 && e3 > 0.0 && e1 / e2 >= 8.0 && e2 / e3 >= 8.0;
  });

  if (failures > 0) {
    std::cout << failures << " criteria failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
