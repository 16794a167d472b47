#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ppmas/simulator.hpp"
#include "ppmas/topology.hpp"

namespace ppmas::scenario {

struct TaskSpec {
  std::string name;
  int agent = 0;
  stl::Formula formula;
  double rho_max = 0.0;
  double r_target = 0.0;
  double rho_opt = 0.0;          // estimated supremum of the body robustness
  double eventually_frac = 0.5;  // satisfaction instant for F windows
  bool explicit_gamma = false;
  funnels::Ppf gamma;
};

// Command-line overrides applied before funnel tuning so derived quantities
// stay coherent with the run.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> eta;
};

struct Scenario {
  std::string name;
  double eta = 10.0;
  sim::Model model;             // fully assembled and tuned
  std::vector<TaskSpec> tasks;  // aligned with model.tasks
  topology::Graph gc;
  topology::Graph gt;  // derived from the task reader sets
  topology::Clustering clustering;
  topology::ClusterDag dag;
  int k = 0;
};

// Parses and validates the whole document. Throws Error with codes:
// "syntax"/"schema" (document), "assumption2"/"assumption3"/"assumption4"
// (topology), "k_hop" (reader outside the estimation range), "rho_opt",
// "feasibility", "assumption6", "initialization" (funnel design),
// "observer_funnels", plus the module-level codes of nested validators.
Scenario parse_scenario(const nlohmann::json& doc, const Overrides& ov = {});
Scenario load_scenario(const std::string& path, const Overrides& ov = {});

struct TaskVerdict {
  std::string name;
  double robustness = 0.0;  // exact temporal robustness from true states
  bool pass = false;
};

struct SeriesVerdict {
  std::string label;
  long violations = 0;
  double first_violation_t = -1.0;
};

struct Report {
  std::vector<TaskVerdict> tasks;
  std::vector<SeriesVerdict> observer_bounds;   // per observer pair
  std::vector<SeriesVerdict> funnel_containment;  // per task, e in (-1, 0)
  long fault_count = 0;
  bool pass = false;

  std::string text() const;
};

// Recomputes every guarantee from the trace alone: temporal robustness from
// the true-state columns, observer bounds from estimate/state columns, and
// funnel containment from re-derived normalized errors. Independent of the
// run-time fault log except for the fault count folded into `pass`.
Report verify_trace(const Scenario& scenario, const sim::Trace& trace,
                    const FaultLog* faults = nullptr);

// Clusters, cluster DAG, topological order, and required estimation depth.
std::string topology_text(const Scenario& scenario);
nlohmann::json topology_json(const Scenario& scenario);

}  // namespace ppmas::scenario
