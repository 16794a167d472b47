#include "ppmas/simulator.hpp"

#include <algorithm>
#include <cmath>

namespace ppmas::sim {

namespace {

std::string pair_name(const observer::PairKey& key) {
  return "(" + std::to_string(key.first) + "," + std::to_string(key.second) +
         ")";
}

}  // namespace

void validate_dynamics(const AgentDynamics& dyn) {
  if (dyn.dim < 1) {
    throw Error("dimension", "agent state dimension must be positive");
  }
  switch (dyn.drift.kind) {
    case DriftKind::Zero:
      break;
    case DriftKind::Linear:
      if (dyn.drift.linear_a.rows() != dyn.dim ||
          dyn.drift.linear_a.cols() != dyn.dim) {
        throw Error("dimension", "linear drift matrix must be dim x dim");
      }
      if (dyn.drift.linear_b.size() != 0 &&
          dyn.drift.linear_b.size() != dyn.dim) {
        throw Error("dimension", "linear drift offset has the wrong size");
      }
      break;
    case DriftKind::PlanarMix:
      if (dyn.dim != 2) {
        throw Error("dimension", "planar_mix drift requires dim = 2");
      }
      break;
  }
  switch (dyn.input.kind) {
    case InputKind::Identity:
      break;
    case InputKind::Rotation:
      if (dyn.dim != 2) {
        throw Error("dimension", "rotation input map requires dim = 2");
      }
      break;
    case InputKind::Constant: {
      if (dyn.input.constant.rows() != dyn.dim) {
        throw Error("dimension", "constant input map must have dim rows");
      }
      // g g^T positive definite keeps the controllability assumption checkable
      // without touching the state.
      const Eigen::MatrixXd ggt =
          dyn.input.constant * dyn.input.constant.transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ggt);
      if (es.eigenvalues().minCoeff() <= 1e-12) {
        throw Error("dimension", "g g^T of the constant input map is singular");
      }
      break;
    }
  }
}

Eigen::VectorXd eval_drift(const AgentDynamics& dyn, const Eigen::VectorXd& x) {
  switch (dyn.drift.kind) {
    case DriftKind::Zero:
      return Eigen::VectorXd::Zero(x.size());
    case DriftKind::Linear: {
      Eigen::VectorXd f = dyn.drift.linear_a * x;
      if (dyn.drift.linear_b.size() == x.size()) f += dyn.drift.linear_b;
      return f;
    }
    case DriftKind::PlanarMix: {
      Eigen::VectorXd f(2);
      f[0] = x[0] + 2.0 * x[1] + 0.6 * std::atan(x[0]) +
             0.3 * std::tanh(0.8 * x[1]);
      f[1] = 3.0 * x[0] + 4.0 * x[1] +
             0.5 * std::sin(0.7 * x[0] + 0.2 * x[1]) +
             0.4 * std::atan(0.5 * x[1]);
      return f;
    }
  }
  return Eigen::VectorXd::Zero(x.size());
}

Eigen::MatrixXd eval_g(const AgentDynamics& dyn, const Eigen::VectorXd& x) {
  switch (dyn.input.kind) {
    case InputKind::Identity:
      return Eigen::MatrixXd::Identity(x.size(), x.size());
    case InputKind::Rotation: {
      const double a = dyn.input.rotation_scale * x[1];
      Eigen::MatrixXd g(2, 2);
      g << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
      return g;
    }
    case InputKind::Constant:
      return dyn.input.constant;
  }
  return Eigen::MatrixXd::Identity(x.size(), x.size());
}

namespace {

struct StageState {
  stl::AgentStates x;
  observer::ObserverState xhat;
};

StageState shifted(const StageState& base, double h, const StageState& d) {
  StageState out = base;
  for (auto& [i, v] : out.x) v += h * d.x.at(i);
  for (auto& [key, v] : out.xhat.estimates) v += h * d.xhat.estimates.at(key);
  return out;
}

// Tasks visible to each cluster, indexed by cluster id.
std::vector<std::vector<control::TaskBinding>> tasks_by_cluster(
    const Model& model) {
  int n_clusters = 0;
  for (const auto& [agent, cluster] : model.cluster_of) {
    n_clusters = std::max(n_clusters, cluster + 1);
  }
  std::vector<std::vector<control::TaskBinding>> out(
      static_cast<std::size_t>(n_clusters));
  for (const auto& task : model.tasks) {
    out[static_cast<std::size_t>(model.cluster_of.at(task.agent))].push_back(
        task);
  }
  return out;
}

Eigen::VectorXd stage_control(
    const Model& model,
    const std::vector<std::vector<control::TaskBinding>>& by_cluster, int agent,
    const StageState& s, const Eigen::MatrixXd& g, double t, long step,
    FaultLog* faults) {
  const control::Snapshot snap{&s.x, &s.xhat};
  const auto& tasks =
      by_cluster[static_cast<std::size_t>(model.cluster_of.at(agent))];
  return control::control_input(agent, tasks, snap, model.table, g, t, step,
                                faults, model.options);
}

Eigen::VectorXd stage_xi(const Model& model, const StageState& s,
                         const observer::ObserverPair& pair) {
  std::map<int, Eigen::VectorXd> neighbors;
  for (int l : pair.consensus) {
    neighbors[l] = s.xhat.estimates.at({l, pair.target});
  }
  const Eigen::VectorXd* relayed =
      pair.anchor_cardinality > 0 ? &s.x.at(pair.target) : nullptr;
  return observer::observer_xi(
      pair, s.xhat.estimates.at({pair.observer, pair.target}), neighbors,
      relayed);
}

StageState derivative(const Model& model,
                      const std::vector<std::vector<control::TaskBinding>>&
                          by_cluster,
                      const World& world, double t, const StageState& s) {
  StageState d;
  for (std::size_t idx = 0; idx < model.agents.size(); ++idx) {
    const int i = static_cast<int>(idx) + 1;
    const AgentDynamics& dyn = model.agents[idx];
    const Eigen::VectorXd& xi = s.x.at(i);
    const Eigen::MatrixXd g = eval_g(dyn, xi);
    const Eigen::VectorXd u =
        stage_control(model, by_cluster, i, s, g, t, world.step, nullptr);
    d.x[i] = eval_drift(dyn, xi) + g * u + world.disturbance.at(i);
  }
  for (const auto& pair : model.obs_topo.pairs) {
    const observer::PairKey key{pair.observer, pair.target};
    const double rho_t = ppf_eval(model.obs_funnels.rho.at(key), t);
    d.xhat.estimates[key] = observer::observer_rhs(
        stage_xi(model, s, pair), rho_t, nullptr, pair, t, world.step);
  }
  return d;
}

bool all_finite(const StageState& s) {
  for (const auto& [i, v] : s.x) {
    if (!v.allFinite()) return false;
  }
  for (const auto& [key, v] : s.xhat.estimates) {
    if (!v.allFinite()) return false;
  }
  return true;
}

void resample_disturbance(World& world, const Model& model) {
  for (std::size_t idx = 0; idx < model.agents.size(); ++idx) {
    const int i = static_cast<int>(idx) + 1;
    world.disturbance[i] =
        sample_disturbance(model.disturbance, model.agents[idx].dim,
                           world.rng);
  }
}

// Endpoint checks after a committed step; stage values are never inspected.
void post_step_checks(
    World& world, const Model& model,
    const std::vector<std::vector<control::TaskBinding>>& by_cluster) {
  const StageState current{world.states, world.estimates};
  if (!all_finite(current)) {
    world.faults.add(world.t, world.step, "numeric",
                     "non-finite state after integration step");
    return;
  }
  const control::Snapshot snap{&world.states, &world.estimates};
  for (const auto& task : model.tasks) {
    const stl::AgentStates view = control::owner_view(task, snap);
    const double rho_hat = stl::eval_robustness(
        task.body, view, model.table, stl::SmoothMinConfig{task.funnels.eta});
    const double gamma_cap = funnels::capital_gamma(task.funnels, world.t);
    control::normalized_error(rho_hat, task.funnels.rho_max, gamma_cap,
                              &world.faults, task.name, world.t, world.step);
  }
  for (const auto& pair : model.obs_topo.pairs) {
    const observer::PairKey key{pair.observer, pair.target};
    const Eigen::VectorXd xi = stage_xi(model, current, pair);
    const double rho_t = ppf_eval(model.obs_funnels.rho.at(key), world.t);
    if (xi.cwiseAbs().maxCoeff() >= rho_t) {
      world.faults.add(world.t, world.step, "observer_clamp",
                       "pair " + pair_name(key) +
                           " consensus residual left its funnel");
    }
    const double err =
        (world.estimates.estimates.at(key) - world.states.at(pair.target))
            .norm();
    const double delta_t = ppf_eval(model.obs_funnels.delta.at(key), world.t);
    if (err >= delta_t) {
      world.faults.add(world.t, world.step, "observer_bound",
                       "pair " + pair_name(key) +
                           " estimation error exceeds delta");
    }
  }
  (void)by_cluster;
}

}  // namespace

Eigen::VectorXd sample_disturbance(const DisturbanceSpec& spec, int dim,
                                   std::mt19937_64& rng) {
  Eigen::VectorXd w(dim);
  for (Eigen::Index c = 0; c < w.size(); ++c) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
    w[c] = spec.bound * (2.0 * u - 1.0);
  }
  return w;
}

World init_world(const Model& model) {
  World world;
  world.rng.seed(model.seed);
  world.states = model.initial_states;
  world.estimates = observer::init_observer(
      model.obs_topo, model.obs_funnels, model.initial_states,
      model.observer_perturb, model.seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t idx = 0; idx < model.agents.size(); ++idx) {
    world.disturbance[static_cast<int>(idx) + 1] =
        Eigen::VectorXd::Zero(model.agents[idx].dim);
  }

  // Every task must start strictly inside its funnel.
  const control::Snapshot snap{&world.states, &world.estimates};
  for (const auto& task : model.tasks) {
    const stl::AgentStates view = control::owner_view(task, snap);
    const double rho_hat = stl::eval_robustness(
        task.body, view, model.table, stl::SmoothMinConfig{task.funnels.eta});
    const double gamma_cap = funnels::capital_gamma(task.funnels, 0.0);
    const double e = (rho_hat - task.funnels.rho_max) / gamma_cap;
    if (!(e > -1.0) || !(e < 0.0)) {
      throw Error("initialization",
                  "task " + task.name +
                      " starts outside its funnel (e=" + std::to_string(e) +
                      ")");
    }
  }
  return world;
}

void advance(World& world, const Model& model) {
  const auto by_cluster = tasks_by_cluster(model);
  if (world.step % model.disturbance.hold == 0) {
    resample_disturbance(world, model);
  }
  const double h = model.dt;
  const double t = world.t;
  const StageState s0{world.states, world.estimates};
  const StageState k1 = derivative(model, by_cluster, world, t, s0);
  const StageState k2 = derivative(model, by_cluster, world, t + 0.5 * h,
                                   shifted(s0, 0.5 * h, k1));
  const StageState k3 = derivative(model, by_cluster, world, t + 0.5 * h,
                                   shifted(s0, 0.5 * h, k2));
  const StageState k4 =
      derivative(model, by_cluster, world, t + h, shifted(s0, h, k3));

  for (auto& [i, v] : world.states) {
    v += (h / 6.0) * (k1.x.at(i) + 2.0 * k2.x.at(i) + 2.0 * k3.x.at(i) +
                      k4.x.at(i));
  }
  for (auto& [key, v] : world.estimates.estimates) {
    v += (h / 6.0) *
         (k1.xhat.estimates.at(key) + 2.0 * k2.xhat.estimates.at(key) +
          2.0 * k3.xhat.estimates.at(key) + k4.xhat.estimates.at(key));
  }
  ++world.step;
  world.t = static_cast<double>(world.step) * h;
  post_step_checks(world, model, by_cluster);
}

namespace {

std::vector<std::string> trace_columns(const Model& model) {
  std::vector<std::string> cols{"t"};
  for (std::size_t idx = 0; idx < model.agents.size(); ++idx) {
    for (int c = 1; c <= model.agents[idx].dim; ++c) {
      cols.push_back("x_" + std::to_string(idx + 1) + "_" + std::to_string(c));
    }
  }
  for (std::size_t idx = 0; idx < model.agents.size(); ++idx) {
    const AgentDynamics& dyn = model.agents[idx];
    const int m = (!model.options.signed_mode &&
                   dyn.input.kind == InputKind::Constant)
                      ? static_cast<int>(dyn.input.constant.cols())
                      : dyn.dim;
    for (int c = 1; c <= m; ++c) {
      cols.push_back("u_" + std::to_string(idx + 1) + "_" + std::to_string(c));
    }
  }
  for (const auto& pair : model.obs_topo.pairs) {
    const int dim = model.agents[static_cast<std::size_t>(pair.target - 1)].dim;
    for (int c = 1; c <= dim; ++c) {
      cols.push_back("xhat_" + std::to_string(pair.observer) + "_" +
                     std::to_string(pair.target) + "_" + std::to_string(c));
    }
  }
  for (const auto& pair : model.obs_topo.pairs) {
    cols.push_back("err_" + std::to_string(pair.observer) + "_" +
                   std::to_string(pair.target));
  }
  for (const auto& pair : model.obs_topo.pairs) {
    cols.push_back("delta_" + std::to_string(pair.observer) + "_" +
                   std::to_string(pair.target));
  }
  for (const auto& task : model.tasks) cols.push_back("rhohat_" + task.name);
  for (const auto& task : model.tasks) cols.push_back("rho_" + task.name);
  for (const auto& task : model.tasks) cols.push_back("e_" + task.name);
  for (const auto& task : model.tasks) cols.push_back("Gamma_" + task.name);
  return cols;
}

std::vector<double> trace_row(
    const World& world, const Model& model,
    const std::vector<std::vector<control::TaskBinding>>& by_cluster) {
  std::vector<double> row{world.t};
  for (std::size_t idx = 0; idx < model.agents.size(); ++idx) {
    const Eigen::VectorXd& x = world.states.at(static_cast<int>(idx) + 1);
    for (Eigen::Index c = 0; c < x.size(); ++c) row.push_back(x[c]);
  }
  const StageState current{world.states, world.estimates};
  for (std::size_t idx = 0; idx < model.agents.size(); ++idx) {
    const int i = static_cast<int>(idx) + 1;
    const Eigen::MatrixXd g = eval_g(model.agents[idx], world.states.at(i));
    const Eigen::VectorXd u = stage_control(model, by_cluster, i, current, g,
                                            world.t, world.step, nullptr);
    for (Eigen::Index c = 0; c < u.size(); ++c) row.push_back(u[c]);
  }
  for (const auto& pair : model.obs_topo.pairs) {
    const Eigen::VectorXd& xhat =
        world.estimates.estimates.at({pair.observer, pair.target});
    for (Eigen::Index c = 0; c < xhat.size(); ++c) row.push_back(xhat[c]);
  }
  for (const auto& pair : model.obs_topo.pairs) {
    row.push_back((world.estimates.estimates.at({pair.observer, pair.target}) -
                   world.states.at(pair.target))
                      .norm());
  }
  for (const auto& pair : model.obs_topo.pairs) {
    row.push_back(ppf_eval(
        model.obs_funnels.delta.at({pair.observer, pair.target}), world.t));
  }
  const control::Snapshot snap{&world.states, &world.estimates};
  std::vector<double> rho_hats;
  std::vector<double> gammas;
  for (const auto& task : model.tasks) {
    const stl::AgentStates view = control::owner_view(task, snap);
    rho_hats.push_back(stl::eval_robustness(
        task.body, view, model.table, stl::SmoothMinConfig{task.funnels.eta}));
    gammas.push_back(funnels::capital_gamma(task.funnels, world.t));
  }
  for (double v : rho_hats) row.push_back(v);
  for (const auto& task : model.tasks) {
    row.push_back(stl::exact_robustness(task.body, world.states, model.table));
  }
  for (std::size_t i = 0; i < model.tasks.size(); ++i) {
    row.push_back((rho_hats[i] - model.tasks[i].funnels.rho_max) / gammas[i]);
  }
  for (double v : gammas) row.push_back(v);
  return row;
}

}  // namespace

RunResult run(const Model& model) {
  if (!(model.dt > 0.0) || !(model.horizon > 0.0)) {
    throw Error("interval", "dt and horizon must be positive");
  }
  const long n_steps = std::lround(model.horizon / model.dt);
  if (n_steps < 1) {
    throw Error("interval", "horizon must cover at least one step");
  }
  World world = init_world(model);
  const auto by_cluster = tasks_by_cluster(model);

  RunResult result;
  result.trace.columns = trace_columns(model);
  result.trace.rows.push_back(trace_row(world, model, by_cluster));
  for (long s = 0; s < n_steps; ++s) {
    advance(world, model);
    if (!world.faults.events.empty() &&
        world.faults.events.back().kind == "numeric") {
      break;
    }
    result.trace.rows.push_back(trace_row(world, model, by_cluster));
  }
  result.faults = std::move(world.faults);
  return result;
}

}  // namespace ppmas::sim
