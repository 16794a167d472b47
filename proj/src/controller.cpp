#include "ppmas/controller.hpp"

#include <cmath>

namespace ppmas::control {

namespace {
constexpr double kClamp = 1e-9;
}

double normalized_error(double rho_hat, double rho_max, double gamma_cap,
                        FaultLog* faults, const std::string& task, double t,
                        long step) {
  if (!(gamma_cap > 0.0)) {
    throw Error("funnel_fault", "normalized_error requires Gamma > 0");
  }
  double e = (rho_hat - rho_max) / gamma_cap;
  if (!std::isfinite(e) || e >= 0.0 || e <= -1.0) {
    if (faults != nullptr) {
      faults->add(t, step, "funnel_clamp",
                  "task " + task + " left its funnel (e=" + std::to_string(e) +
                      ")");
    }
    // A non-finite e means the state already diverged; the funnel center
    // contributes zero input and the numeric fault check ends the run.
    e = std::isfinite(e) ? std::clamp(e, -1.0 + kClamp, -kClamp) : -0.5;
  }
  return e;
}

Transformed transform(double e) {
  if (!(e > -1.0) || !(e < 0.0)) {
    throw Error("funnel_fault",
                "transform is defined on (-1, 0), got e=" + std::to_string(e));
  }
  Transformed out;
  out.eps = std::log(-(e + 1.0) / e);
  out.jac = -1.0 / (e * (e + 1.0));
  return out;
}

stl::AgentStates owner_view(const TaskBinding& binding, const Snapshot& snap) {
  stl::AgentStates view;
  view[binding.agent] = snap.true_states->at(binding.agent);
  for (int j : binding.communicated) {
    view[j] = snap.true_states->at(j);
  }
  for (int j : binding.estimated) {
    auto it = snap.estimates->estimates.find({binding.agent, j});
    if (it == snap.estimates->estimates.end()) {
      throw Error("missing_estimate",
                  "task " + binding.name + " needs an estimate of agent " +
                      std::to_string(j) + " that agent " +
                      std::to_string(binding.agent) + " does not hold");
    }
    view[j] = it->second;
  }
  return view;
}

Eigen::VectorXd control_input(int agent,
                              const std::vector<TaskBinding>& cluster_tasks,
                              const Snapshot& snap,
                              const stl::PredicateTable& table,
                              const Eigen::MatrixXd& g_at_agent, double t,
                              long step, FaultLog* faults,
                              const ControlOptions& options) {
  const Eigen::Index dim = snap.true_states->at(agent).size();
  Eigen::VectorXd accum = Eigen::VectorXd::Zero(dim);
  for (const TaskBinding& binding : cluster_tasks) {
    // The gradient slot of `agent` is nonzero only if the task reads it as a
    // true (communicated or own) state.
    if (agent != binding.agent && binding.communicated.count(agent) == 0) {
      continue;
    }
    const stl::AgentStates view = owner_view(binding, snap);
    const stl::SmoothMinConfig cfg{binding.funnels.eta};
    const double rho_hat = stl::eval_robustness(binding.body, view, table, cfg);
    const Eigen::VectorXd grad =
        stl::grad_robustness(binding.body, view, table, agent, cfg);
    const double gamma_cap = funnels::capital_gamma(binding.funnels, t);
    const double e = normalized_error(rho_hat, binding.funnels.rho_max,
                                      gamma_cap, faults, binding.name, t, step);
    const Transformed tr = transform(e);
    accum += grad * (tr.jac * tr.eps / gamma_cap);
  }
  if (options.signed_mode) {
    return -options.sign * accum;
  }
  return -(g_at_agent.transpose() * accum);
}

}  // namespace ppmas::control
