#include "ppmas/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ppmas::scenario {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& path,
                               const std::string& what) {
  throw Error("schema", path + ": " + what);
}

const json& require(const json& doc, const std::string& key,
                    const std::string& path) {
  auto it = doc.find(key);
  if (it == doc.end()) schema_error(path, "missing key '" + key + "'");
  return *it;
}

double require_number(const json& doc, const std::string& key,
                      const std::string& path) {
  const json& v = require(doc, key, path);
  if (!v.is_number()) schema_error(path + "." + key, "expected a number");
  return v.get<double>();
}

double number_or(const json& doc, const std::string& key, double fallback) {
  auto it = doc.find(key);
  return it == doc.end() ? fallback : it->get<double>();
}

Eigen::VectorXd parse_vector(const json& v, const std::string& path) {
  if (!v.is_array()) schema_error(path, "expected an array of numbers");
  Eigen::VectorXd out(v.size());
  for (std::size_t c = 0; c < v.size(); ++c) {
    if (!v[c].is_number()) schema_error(path, "expected an array of numbers");
    out[static_cast<Eigen::Index>(c)] = v[c].get<double>();
  }
  return out;
}

Eigen::MatrixXd parse_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty() || !v[0].is_array()) {
    schema_error(path, "expected an array of rows");
  }
  const std::size_t cols = v[0].size();
  Eigen::MatrixXd out(v.size(), cols);
  for (std::size_t r = 0; r < v.size(); ++r) {
    if (!v[r].is_array() || v[r].size() != cols) {
      schema_error(path, "ragged matrix");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          v[r][c].get<double>();
    }
  }
  return out;
}

funnels::Ppf parse_ppf(const json& v, const std::string& path) {
  funnels::Ppf p;
  p.v0 = require_number(v, "v0", path);
  p.v_inf = require_number(v, "v_inf", path);
  p.decay = require_number(v, "decay", path);
  funnels::validate_ppf(p);
  return p;
}

sim::AgentDynamics parse_dynamics(const json& a, const std::string& path) {
  sim::AgentDynamics dyn;
  dyn.dim = static_cast<int>(require_number(a, "dim", path));
  if (auto it = a.find("drift"); it != a.end()) {
    const std::string kind = require(*it, "kind", path + ".drift");
    if (kind == "zero") {
      dyn.drift.kind = sim::DriftKind::Zero;
    } else if (kind == "linear") {
      dyn.drift.kind = sim::DriftKind::Linear;
      dyn.drift.linear_a = parse_matrix(require(*it, "a", path + ".drift"),
                                        path + ".drift.a");
      if (it->contains("b")) {
        dyn.drift.linear_b = parse_vector((*it)["b"], path + ".drift.b");
      }
    } else if (kind == "planar_mix") {
      dyn.drift.kind = sim::DriftKind::PlanarMix;
    } else {
      schema_error(path + ".drift.kind", "unknown drift '" + kind + "'");
    }
  }
  if (auto it = a.find("input"); it != a.end()) {
    const std::string kind = require(*it, "kind", path + ".input");
    if (kind == "identity") {
      dyn.input.kind = sim::InputKind::Identity;
    } else if (kind == "rotation") {
      dyn.input.kind = sim::InputKind::Rotation;
      dyn.input.rotation_scale = number_or(*it, "scale", 0.5);
    } else if (kind == "constant") {
      dyn.input.kind = sim::InputKind::Constant;
      dyn.input.constant =
          parse_matrix(require(*it, "g", path + ".input"), path + ".input.g");
    } else {
      schema_error(path + ".input.kind", "unknown input map '" + kind + "'");
    }
  }
  sim::validate_dynamics(dyn);
  return dyn;
}

stl::Predicate parse_predicate(const json& p, const std::string& name,
                               const std::vector<int>& agent_dims) {
  const std::string path = "predicates." + name;
  stl::Predicate pred;
  const std::string kind = require(p, "kind", path);
  if (kind == "norm2_le") {
    pred.kind = stl::PredicateKind::Norm2Le;
  } else if (kind == "linear") {
    pred.kind = stl::PredicateKind::Linear;
  } else {
    schema_error(path + ".kind", "unknown predicate kind '" + kind + "'");
  }
  const json& agents = require(p, "agents", path);
  if (!agents.is_array() || agents.empty()) {
    schema_error(path + ".agents", "expected a non-empty array of agent ids");
  }
  for (const auto& a : agents) pred.agents.push_back(a.get<int>());
  for (int a : pred.agents) {
    if (a < 1 || a > static_cast<int>(agent_dims.size())) {
      throw Error("missing_agent", path + " references unknown agent " +
                                       std::to_string(a));
    }
  }

  Eigen::Index out_dim = 0;
  if (pred.kind == stl::PredicateKind::Norm2Le) {
    pred.offset = parse_vector(require(p, "center", path), path + ".center");
    pred.radius_sq = require_number(p, "radius_sq", path);
    out_dim = pred.offset.size();
  } else {
    pred.bias = number_or(p, "bias", 0.0);
  }

  const json& coeffs = require(p, "coeffs", path);
  if (!coeffs.is_array() || coeffs.size() != pred.agents.size()) {
    schema_error(path + ".coeffs", "expected one entry per agent");
  }
  for (std::size_t j = 0; j < pred.agents.size(); ++j) {
    const int dim = agent_dims[static_cast<std::size_t>(pred.agents[j] - 1)];
    const std::string cpath = path + ".coeffs[" + std::to_string(j) + "]";
    const json& c = coeffs[j];
    if (pred.kind == stl::PredicateKind::Norm2Le) {
      if (c.is_number()) {
        if (out_dim != dim) {
          schema_error(cpath, "scalar coefficient needs matching dimensions");
        }
        pred.coeffs.push_back(c.get<double>() *
                              Eigen::MatrixXd::Identity(out_dim, dim));
      } else {
        Eigen::MatrixXd m = parse_matrix(c, cpath);
        if (m.rows() != out_dim || m.cols() != dim) {
          throw Error("dimension", cpath + " must be " +
                                       std::to_string(out_dim) + "x" +
                                       std::to_string(dim));
        }
        pred.coeffs.push_back(std::move(m));
      }
    } else {
      Eigen::VectorXd a = parse_vector(c, cpath);
      if (a.size() != dim) {
        throw Error("dimension", cpath + " must have length " +
                                     std::to_string(dim));
      }
      pred.coeffs.push_back(a);
    }
  }
  stl::validate_predicate(pred);
  return pred;
}

std::set<int> body_agents(const stl::Body& body,
                          const stl::PredicateTable& table) {
  std::set<int> out;
  for (const stl::Literal& lit : body.literals) {
    if (lit.is_true) continue;
    for (int a : table.at(lit.name).agents) out.insert(a);
  }
  return out;
}

// Worst-case sensitivity of a predicate to one agent's estimation error.
double coefficient_weight(const stl::Predicate& pred, std::size_t slot) {
  if (pred.kind == stl::PredicateKind::Norm2Le) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(pred.coeffs[slot]);
    return svd.singularValues()[0];
  }
  return pred.coeffs[slot].col(0).lpNorm<1>();
}

funnels::Margin build_margin(const stl::Body& body,
                             const stl::PredicateTable& table,
                             const std::set<int>& estimated,
                             const observer::ObserverFunnels& obs_funnels,
                             int owner, const std::string& task_name) {
  funnels::Margin margin;
  for (const stl::Literal& lit : body.literals) {
    if (lit.is_true) continue;
    const stl::Predicate& pred = table.at(lit.name);
    funnels::PredicateMargin pm;
    pm.kind = pred.kind;
    if (pred.kind == stl::PredicateKind::Norm2Le) {
      pm.radius = std::sqrt(pred.radius_sq);
    }
    for (std::size_t j = 0; j < pred.agents.size(); ++j) {
      const int a = pred.agents[j];
      if (estimated.count(a) == 0) continue;
      if (lit.negated && pred.kind == stl::PredicateKind::Norm2Le) {
        throw Error("predicate",
                    "task " + task_name + ": negated norm2_le predicate '" +
                        lit.name + "' has no estimation margin for agent " +
                        std::to_string(a));
      }
      funnels::MarginTerm term;
      term.weight = coefficient_weight(pred, j);
      term.delta = obs_funnels.delta.at({owner, a});
      pm.terms.push_back(term);
    }
    if (!pm.terms.empty()) margin.predicates.push_back(std::move(pm));
  }
  return margin;
}

// Tail of the satisfaction requirement: gamma(t) <= rho_max - r_target from
// the satisfaction instant on, gamma(t) > margin(t) everywhere.
void check_gamma(const funnels::Ppf& gamma, const TaskSpec& task,
                 const funnels::Margin& margin, double rho_hat0,
                 double horizon) {
  double t_star = task.formula.outer.a;
  double window_hi = task.formula.outer.b;
  if (task.formula.kind == stl::TemporalKind::Eventually) {
    t_star = task.formula.outer.a +
             task.eventually_frac *
                 (task.formula.outer.b - task.formula.outer.a);
  } else if (task.formula.kind == stl::TemporalKind::EventuallyAlways) {
    window_hi = task.formula.outer.b + task.formula.inner.b;
  }
  const double ceiling = task.rho_max - task.r_target;
  const double hi = std::max(horizon, window_hi);
  const int n = 10000;
  for (int s = 0; s <= n; ++s) {
    const double t = hi * s / n;
    const double g = funnels::ppf_eval(gamma, t);
    if (!(g - funnels::margin_eval(margin, t) > 0.0)) {
      throw Error("assumption6", "task " + task.name +
                                     ": gamma - margin is non-positive at t=" +
                                     std::to_string(t));
    }
    if (t >= t_star - 1e-12 && g > ceiling + 1e-9) {
      throw Error("feasibility",
                  "task " + task.name +
                      ": gamma exceeds rho_max - r_target inside the "
                      "satisfaction window at t=" + std::to_string(t));
    }
  }
  if (!(funnels::ppf_eval(gamma, 0.0) >
        task.rho_max - rho_hat0 + funnels::margin_eval(margin, 0.0))) {
    throw Error("initialization",
                "task " + task.name +
                    ": gamma(0) does not contain the initial robustness error");
  }
}

}  // namespace

Scenario parse_scenario(const json& doc, const Overrides& ov) {
  Scenario sc;
  sc.name = doc.value("name", "scenario");
  sc.model.dt = ov.dt.value_or(number_or(doc, "dt", 1e-3));
  sc.model.horizon = require_number(doc, "horizon", "$");
  sc.model.seed = ov.seed.value_or(
      static_cast<std::uint64_t>(number_or(doc, "seed", 0.0)));
  sc.eta = ov.eta.value_or(number_or(doc, "eta", 10.0));
  if (!(sc.eta > 0.0)) throw Error("eta", "eta must be positive");
  if (!(sc.model.dt > 0.0) || !(sc.model.horizon > 0.0)) {
    schema_error("$", "dt and horizon must be positive");
  }

  // Agents: ids must be 1..N.
  const json& agents = require(doc, "agents", "$");
  if (!agents.is_array() || agents.empty()) {
    schema_error("agents", "expected a non-empty array");
  }
  const int n = static_cast<int>(agents.size());
  sc.model.agents.resize(static_cast<std::size_t>(n));
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::vector<int> agent_dims(static_cast<std::size_t>(n), 0);
  for (std::size_t idx = 0; idx < agents.size(); ++idx) {
    const std::string path = "agents[" + std::to_string(idx) + "]";
    const int id = static_cast<int>(require_number(agents[idx], "id", path));
    if (id < 1 || id > n || seen[static_cast<std::size_t>(id - 1)]) {
      schema_error(path + ".id", "agent ids must be a permutation of 1..N");
    }
    seen[static_cast<std::size_t>(id - 1)] = true;
    sim::AgentDynamics dyn = parse_dynamics(agents[idx], path);
    Eigen::VectorXd x0 =
        parse_vector(require(agents[idx], "initial", path), path + ".initial");
    if (x0.size() != dyn.dim) {
      throw Error("dimension", path + ".initial must have length " +
                                   std::to_string(dyn.dim));
    }
    agent_dims[static_cast<std::size_t>(id - 1)] = dyn.dim;
    sc.model.agents[static_cast<std::size_t>(id - 1)] = std::move(dyn);
    sc.model.initial_states[id] = std::move(x0);
  }

  // Predicates.
  const json& preds = require(doc, "predicates", "$");
  if (!preds.is_object()) schema_error("predicates", "expected an object");
  for (auto it = preds.begin(); it != preds.end(); ++it) {
    sc.model.table[it.key()] = parse_predicate(*it, it.key(), agent_dims);
  }

  // Tasks.
  const json& tasks = require(doc, "tasks", "$");
  if (!tasks.is_array() || tasks.empty()) {
    schema_error("tasks", "expected a non-empty array");
  }
  for (std::size_t idx = 0; idx < tasks.size(); ++idx) {
    const std::string path = "tasks[" + std::to_string(idx) + "]";
    const json& t = tasks[idx];
    TaskSpec task;
    task.name = require(t, "name", path).get<std::string>();
    task.agent = static_cast<int>(require_number(t, "agent", path));
    if (task.agent < 1 || task.agent > n) {
      throw Error("missing_agent",
                  path + " is owned by unknown agent " +
                      std::to_string(task.agent));
    }
    task.formula = stl::parse_formula(
        require(t, "formula", path).get<std::string>(), sc.model.table);
    task.rho_max = require_number(t, "rho_max", path);
    task.r_target = require_number(t, "r_target", path);
    task.eventually_frac = number_or(t, "eventually_frac", 0.5);
    if (auto g = t.find("gamma"); g != t.end()) {
      task.explicit_gamma = true;
      task.gamma = parse_ppf(*g, path + ".gamma");
    }
    sc.tasks.push_back(std::move(task));
  }

  // Communication graph.
  sc.gc = topology::Graph::undirected(n);
  for (const auto& e : require(doc, "communication_edges", "$")) {
    if (!e.is_array() || e.size() != 2) {
      schema_error("communication_edges", "expected pairs of agent ids");
    }
    const int i = e[0].get<int>();
    const int j = e[1].get<int>();
    if (i < 1 || i > n || j < 1 || j > n) {
      throw Error("graph", "communication edge (" + std::to_string(i) + "," +
                               std::to_string(j) + ") leaves the agent set");
    }
    sc.gc.add_edge(i, j);
  }

  // Task graph: edge owner -> j iff the task body reads x_j.
  sc.gt = topology::Graph::directed_graph(n);
  for (const TaskSpec& task : sc.tasks) {
    for (int a : body_agents(task.formula.body, sc.model.table)) {
      sc.gt.add_edge(task.agent, a);
    }
  }

  sc.clustering = topology::compute_clusters(sc.gc, sc.gt);
  const topology::AssumptionReport report =
      topology::validate_assumptions(sc.gc, sc.gt, sc.clustering);
  for (const auto& check : report.checks) {
    if (check.pass) continue;
    if (check.name == "communication_connected") {
      throw Error("assumption2", check.witness);
    }
    if (check.name == "task_graph_acyclic") {
      throw Error("assumption3", check.witness);
    }
    throw Error("assumption4", check.witness);
  }
  try {
    sc.dag = topology::cluster_induced_dag(sc.clustering, sc.gt);
  } catch (const Error& err) {
    if (std::string(err.code()) == "cycle") {
      throw Error("assumption3", err.what());
    }
    throw;
  }
  sc.k = topology::required_k(sc.gc, sc.gt);
  sc.model.cluster_of = sc.clustering.membership;
  sc.model.obs_topo = observer::build_observer_topology(sc.gc, sc.k);

  // Observer funnels: shared defaults plus per-pair overrides.
  const json& obs = require(doc, "observer", "$");
  sc.model.obs_funnels.alpha = number_or(obs, "alpha", 1.0);
  sc.model.observer_perturb = number_or(obs, "perturb", 0.0);
  const funnels::Ppf default_delta =
      parse_ppf(require(obs, "delta", "observer"), "observer.delta");
  const funnels::Ppf default_rho =
      parse_ppf(require(obs, "rho", "observer"), "observer.rho");
  for (const auto& pair : sc.model.obs_topo.pairs) {
    const observer::PairKey key{pair.observer, pair.target};
    sc.model.obs_funnels.delta[key] = default_delta;
    sc.model.obs_funnels.rho[key] = default_rho;
  }
  if (auto it = obs.find("pairs"); it != obs.end()) {
    for (auto p = it->begin(); p != it->end(); ++p) {
      int i = 0;
      int r = 0;
      if (std::sscanf(p.key().c_str(), "%d,%d", &i, &r) != 2 ||
          sc.model.obs_topo.find(i, r) == nullptr) {
        schema_error("observer.pairs." + p.key(),
                     "expected an existing 'observer,target' pair");
      }
      const std::string path = "observer.pairs." + p.key();
      if (p->contains("delta")) {
        sc.model.obs_funnels.delta[{i, r}] =
            parse_ppf((*p)["delta"], path + ".delta");
      }
      if (p->contains("rho")) {
        sc.model.obs_funnels.rho[{i, r}] = parse_ppf((*p)["rho"], path + ".rho");
      }
    }
  }
  observer::validate_observer_funnels(sc.model.obs_funnels, sc.model.obs_topo);

  // Disturbance and controller options.
  if (auto it = doc.find("disturbance"); it != doc.end()) {
    sc.model.disturbance.bound = number_or(*it, "bound", 0.0);
    sc.model.disturbance.hold =
        static_cast<int>(number_or(*it, "hold", 1.0));
    if (sc.model.disturbance.bound < 0.0 || sc.model.disturbance.hold < 1) {
      schema_error("disturbance", "bound must be >= 0 and hold >= 1");
    }
  }
  if (auto it = doc.find("control"); it != doc.end()) {
    sc.model.options.signed_mode = it->value("signed_mode", false);
    sc.model.options.sign = number_or(*it, "sign", 1.0);
  }

  // Reader sets, margins, and funnel design per task.
  for (TaskSpec& task : sc.tasks) {
    const std::set<int> readers =
        body_agents(task.formula.body, sc.model.table);
    const std::set<int> comm = topology::closed_neighbors(sc.gc, task.agent);
    const std::set<int> khop =
        sc.k >= 2 ? topology::k_hop_neighbors(sc.gc, task.agent, sc.k)
                  : std::set<int>{};
    control::TaskBinding binding;
    binding.name = task.name;
    binding.agent = task.agent;
    binding.body = task.formula.body;
    for (int a : readers) {
      if (a == task.agent) continue;
      if (comm.count(a)) {
        binding.communicated.insert(a);
      } else if (khop.count(a)) {
        binding.estimated.insert(a);
      } else {
        throw Error("k_hop", "task " + task.name + " reads agent " +
                                 std::to_string(a) +
                                 " outside the k-hop range of agent " +
                                 std::to_string(task.agent));
      }
    }

    const funnels::Margin margin =
        build_margin(task.formula.body, sc.model.table, binding.estimated,
                     sc.model.obs_funnels, task.agent, task.name);

    task.rho_opt =
        funnels::estimate_rho_opt(task.formula.body, sc.model.table, sc.eta);
    if (!(task.rho_max > 0.0) || !(task.rho_max < task.rho_opt)) {
      throw Error("rho_opt", "task " + task.name +
                                 " needs 0 < rho_max < rho_opt (rho_opt=" +
                                 std::to_string(task.rho_opt) + ")");
    }

    // Seed-independent stand-in for the initial estimated robustness: the
    // margin lower-bounds rho_hat by rho_true - margin whenever the observer
    // errors respect their funnels.
    const double rho_hat0 =
        stl::eval_robustness(task.formula.body, sc.model.initial_states,
                             sc.model.table, stl::SmoothMinConfig{sc.eta}) -
        funnels::margin_eval(margin, 0.0);

    if (task.explicit_gamma) {
      check_gamma(task.gamma, task, margin, rho_hat0, sc.model.horizon);
    } else {
      funnels::TuneRequest req;
      req.kind = task.formula.kind;
      req.window_a = task.formula.outer.a;
      req.window_b = task.formula.outer.b;
      req.inner_b = task.formula.inner.b;
      req.rho_max = task.rho_max;
      req.rho_hat0 = rho_hat0;
      req.r_target = task.r_target;
      req.rho_opt = task.rho_opt;
      req.margin = margin;
      req.horizon = sc.model.horizon;
      req.eventually_frac = task.eventually_frac;
      task.gamma = funnels::tune_gamma(req);
    }

    binding.funnels.rho_max = task.rho_max;
    binding.funnels.eta = sc.eta;
    binding.funnels.conjuncts.push_back({task.gamma, margin});
    sc.model.tasks.push_back(std::move(binding));
  }
  return sc;
}

Scenario load_scenario(const std::string& path, const Overrides& ov) {
  std::ifstream in(path);
  if (!in) in.open(path + ".json");
  if (!in) throw Error("io", "cannot open scenario file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& ex) {
    throw Error("syntax", std::string("scenario parse error: ") + ex.what());
  }
  return parse_scenario(doc, ov);
}

namespace {

stl::AgentStates states_from_row(const Scenario& sc, const sim::Trace& trace,
                                 const std::vector<double>& row,
                                 const std::string& prefix) {
  stl::AgentStates out;
  for (std::size_t idx = 0; idx < sc.model.agents.size(); ++idx) {
    const int i = static_cast<int>(idx) + 1;
    Eigen::VectorXd x(sc.model.agents[idx].dim);
    for (int c = 1; c <= sc.model.agents[idx].dim; ++c) {
      const int col = trace.column(prefix + "_" + std::to_string(i) + "_" +
                                   std::to_string(c));
      if (col < 0) {
        throw Error("column_mismatch", "trace is missing column " + prefix +
                                           "_" + std::to_string(i) + "_" +
                                           std::to_string(c));
      }
      x[c - 1] = row[static_cast<std::size_t>(col)];
    }
    out[i] = std::move(x);
  }
  return out;
}

}  // namespace

Report verify_trace(const Scenario& sc, const sim::Trace& trace,
                    const FaultLog* faults) {
  if (trace.rows.size() < 2 || trace.column("t") < 0) {
    throw Error("column_mismatch", "trace needs a t column and >= 2 rows");
  }
  const std::size_t t_col = static_cast<std::size_t>(trace.column("t"));
  const double dt = trace.rows[1][t_col] - trace.rows[0][t_col];

  // Rebuild the true-state signal once; monitor each task on it.
  stl::SampledSignal signal;
  signal.dt = dt;
  for (const auto& row : trace.rows) {
    signal.samples.push_back(states_from_row(sc, trace, row, "x"));
  }

  Report report;
  for (const TaskSpec& task : sc.tasks) {
    TaskVerdict v;
    v.name = task.name;
    v.robustness =
        stl::monitor_temporal(task.formula, signal, sc.model.table);
    v.pass = v.robustness > 0.0;
    report.tasks.push_back(v);
  }

  // Observer bounds re-derived from estimate and state columns.
  for (const auto& pair : sc.model.obs_topo.pairs) {
    const observer::PairKey key{pair.observer, pair.target};
    SeriesVerdict v;
    v.label = "xhat_" + std::to_string(pair.observer) + "_" +
              std::to_string(pair.target);
    const int dim = sc.model.agents[static_cast<std::size_t>(pair.target - 1)].dim;
    for (std::size_t r = 0; r < trace.rows.size(); ++r) {
      const auto& row = trace.rows[r];
      const double t = row[t_col];
      double err_sq = 0.0;
      for (int c = 1; c <= dim; ++c) {
        const std::string name = v.label + "_" + std::to_string(c);
        const int col = trace.column(name);
        const int xcol = trace.column("x_" + std::to_string(pair.target) +
                                      "_" + std::to_string(c));
        if (col < 0 || xcol < 0) {
          throw Error("column_mismatch", "trace is missing column " + name);
        }
        const double d = row[static_cast<std::size_t>(col)] -
                         row[static_cast<std::size_t>(xcol)];
        err_sq += d * d;
      }
      if (std::sqrt(err_sq) >=
          ppf_eval(sc.model.obs_funnels.delta.at(key), t)) {
        if (v.violations == 0) v.first_violation_t = t;
        ++v.violations;
      }
    }
    report.observer_bounds.push_back(std::move(v));
  }

  // Funnel containment from re-derived normalized errors.
  for (std::size_t ti = 0; ti < sc.tasks.size(); ++ti) {
    const TaskSpec& task = sc.tasks[ti];
    const control::TaskBinding& binding = sc.model.tasks[ti];
    SeriesVerdict v;
    v.label = "e_" + task.name;
    for (std::size_t r = 0; r < trace.rows.size(); ++r) {
      const auto& row = trace.rows[r];
      const double t = row[t_col];
      stl::AgentStates view;
      view[binding.agent] = signal.samples[r].at(binding.agent);
      for (int j : binding.communicated) view[j] = signal.samples[r].at(j);
      for (int j : binding.estimated) {
        const int dim = sc.model.agents[static_cast<std::size_t>(j - 1)].dim;
        Eigen::VectorXd xhat(dim);
        for (int c = 1; c <= dim; ++c) {
          const int col = trace.column(
              "xhat_" + std::to_string(binding.agent) + "_" +
              std::to_string(j) + "_" + std::to_string(c));
          if (col < 0) {
            throw Error("column_mismatch",
                        "trace is missing estimate columns for task " +
                            task.name);
          }
          xhat[c - 1] = row[static_cast<std::size_t>(col)];
        }
        view[j] = std::move(xhat);
      }
      const double rho_hat =
          stl::eval_robustness(binding.body, view, sc.model.table,
                               stl::SmoothMinConfig{binding.funnels.eta});
      const double gamma_cap = funnels::capital_gamma(binding.funnels, t);
      const double e = (rho_hat - task.rho_max) / gamma_cap;
      if (!(e > -1.0) || !(e < 0.0)) {
        if (v.violations == 0) v.first_violation_t = t;
        ++v.violations;
      }
    }
    report.funnel_containment.push_back(std::move(v));
  }

  report.fault_count =
      faults == nullptr ? 0 : static_cast<long>(faults->events.size());
  report.pass = report.fault_count == 0;
  for (const auto& t : report.tasks) report.pass = report.pass && t.pass;
  for (const auto& v : report.observer_bounds) {
    report.pass = report.pass && v.violations == 0;
  }
  for (const auto& v : report.funnel_containment) {
    report.pass = report.pass && v.violations == 0;
  }
  return report;
}

std::string Report::text() const {
  std::ostringstream os;
  os << "tasks:\n";
  for (const auto& t : tasks) {
    os << "  " << t.name << ": robustness " << t.robustness << " -> "
       << (t.pass ? "pass" : "FAIL") << '\n';
  }
  os << "observer bounds:\n";
  for (const auto& v : observer_bounds) {
    os << "  " << v.label << ": " << v.violations << " violation(s)";
    if (v.violations > 0) os << " (first at t=" << v.first_violation_t << ")";
    os << '\n';
  }
  os << "funnel containment:\n";
  for (const auto& v : funnel_containment) {
    os << "  " << v.label << ": " << v.violations << " violation(s)";
    if (v.violations > 0) os << " (first at t=" << v.first_violation_t << ")";
    os << '\n';
  }
  os << "faults: " << fault_count << '\n';
  os << "verdict: " << (pass ? "pass" : "FAIL") << '\n';
  return os.str();
}

std::string topology_text(const Scenario& sc) {
  std::ostringstream os;
  os << "agents: " << sc.gc.n << '\n';
  os << "clusters:\n";
  for (std::size_t c = 0; c < sc.clustering.clusters.size(); ++c) {
    os << "  C" << c + 1 << ": {";
    const auto& members = sc.clustering.clusters[c];
    for (std::size_t m = 0; m < members.size(); ++m) {
      if (m > 0) os << ", ";
      os << members[m];
    }
    os << "}\n";
  }
  os << "cluster dag edges:\n";
  if (sc.dag.edges.empty()) os << "  (none)\n";
  for (const auto& [a, b] : sc.dag.edges) {
    os << "  C" << a + 1 << " -> C" << b + 1 << '\n';
  }
  os << "topological order (leaves first):";
  for (int c : topology::topological_order(sc.dag)) os << " C" << c + 1;
  os << '\n';
  os << "required k: " << sc.k << '\n';
  os << "observer pairs: " << sc.model.obs_topo.pairs.size() << '\n';
  return os.str();
}

nlohmann::json topology_json(const Scenario& sc) {
  json out;
  out["agents"] = sc.gc.n;
  out["clusters"] = sc.clustering.clusters;
  json dag = json::array();
  for (const auto& [a, b] : sc.dag.edges) {
    dag.push_back({a + 1, b + 1});
  }
  out["cluster_dag_edges"] = dag;
  json order = json::array();
  for (int c : topology::topological_order(sc.dag)) order.push_back(c + 1);
  out["topological_order"] = order;
  out["required_k"] = sc.k;
  json pairs = json::array();
  for (const auto& pair : sc.model.obs_topo.pairs) {
    pairs.push_back({pair.observer, pair.target});
  }
  out["observer_pairs"] = pairs;
  return out;
}

}  // namespace ppmas::scenario
