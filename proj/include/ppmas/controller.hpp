#pragma once

#include <Eigen/Dense>
#include <set>
#include <string>
#include <vector>

#include "ppmas/errors.hpp"
#include "ppmas/funnels.hpp"
#include "ppmas/observer.hpp"
#include "ppmas/stl.hpp"

namespace ppmas::control {

// e = (rho_hat - rho_max) / Gamma, clamped into (-1, 0) with a logged fault
// when the trajectory leaves the funnel.
double normalized_error(double rho_hat, double rho_max, double gamma_cap,
                        FaultLog* faults, const std::string& task, double t,
                        long step);

struct Transformed {
  double eps = 0.0;  // ln(-(e+1)/e), strictly increasing, 0 at e = -1/2
  double jac = 0.0;  // -1/(e(e+1)), >= 4 with minimum at e = -1/2
};

Transformed transform(double e);

// One task owned by one agent, with its reader partition fixed by the
// task/communication mismatch.
struct TaskBinding {
  std::string name;
  int agent = 0;  // owner
  stl::Body body;
  funnels::FunnelSpec funnels;
  std::set<int> communicated;  // readers in N^T intersect N^C, owner excluded
  std::set<int> estimated;     // readers in N^T minus N^C
};

struct Snapshot {
  const stl::AgentStates* true_states = nullptr;
  const observer::ObserverState* estimates = nullptr;
};

// The owner's view: true states for itself and communicated readers, its own
// estimates for the rest. Throws Error("missing_estimate") when an estimate
// is absent.
stl::AgentStates owner_view(const TaskBinding& binding, const Snapshot& snap);

struct ControlOptions {
  // Sign-based simplification for square symmetric g with known sign:
  // u = -sign * sum(...) instead of premultiplying by g^T.
  bool signed_mode = false;
  double sign = 1.0;
};

// Decentralized control law: sums the funnel-weighted robustness gradients of
// every task owned inside the agent's own cluster, premultiplied by g^T at
// the agent's own state.
Eigen::VectorXd control_input(int agent,
                              const std::vector<TaskBinding>& cluster_tasks,
                              const Snapshot& snap,
                              const stl::PredicateTable& table,
                              const Eigen::MatrixXd& g_at_agent, double t,
                              long step, FaultLog* faults,
                              const ControlOptions& options = {});

}  // namespace ppmas::control
