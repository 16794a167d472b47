#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "ppmas/controller.hpp"
#include "ppmas/errors.hpp"
#include "ppmas/observer.hpp"
#include "ppmas/trace.hpp"

namespace ppmas::sim {

enum class DriftKind { Zero, Linear, PlanarMix };

// PlanarMix is the planar benchmark drift
//   f1 = x1 + 2 x2 + 0.6 atan(x1) + 0.3 tanh(0.8 x2)
//   f2 = 3 x1 + 4 x2 + 0.5 sin(0.7 x1 + 0.2 x2) + 0.4 atan(0.5 x2)
struct Drift {
  DriftKind kind = DriftKind::Zero;
  Eigen::MatrixXd linear_a;  // Linear only
  Eigen::VectorXd linear_b;  // Linear only, affine offset
};

enum class InputKind { Identity, Rotation, Constant };

struct InputMap {
  InputKind kind = InputKind::Identity;
  double rotation_scale = 0.5;  // Rotation: planar rotation by scale * x2
  Eigen::MatrixXd constant;     // Constant: fixed g with g g^T positive definite
};

struct AgentDynamics {
  int dim = 2;
  Drift drift;
  InputMap input;
};

// Structural checks: shape agreement and g g^T positive definite where g is
// state-independent. Throws Error("dimension").
void validate_dynamics(const AgentDynamics& dyn);

Eigen::VectorXd eval_drift(const AgentDynamics& dyn, const Eigen::VectorXd& x);
Eigen::MatrixXd eval_g(const AgentDynamics& dyn, const Eigen::VectorXd& x);

// Piecewise-constant disturbance: each component drawn uniformly from
// [-bound, bound] and held for `hold` integration steps.
struct DisturbanceSpec {
  double bound = 0.0;
  int hold = 1;
};

// One held sample: `dim` components uniform in [-bound, bound], drawn from the
// supplied stream so identical seeds give identical sequences.
Eigen::VectorXd sample_disturbance(const DisturbanceSpec& spec, int dim,
                                   std::mt19937_64& rng);

struct Model {
  std::vector<AgentDynamics> agents;  // agent i lives at index i-1
  stl::PredicateTable table;
  std::vector<control::TaskBinding> tasks;
  std::map<int, int> cluster_of;  // agent id -> cluster index
  observer::ObserverTopology obs_topo;
  observer::ObserverFunnels obs_funnels;
  control::ControlOptions options;
  DisturbanceSpec disturbance;
  stl::AgentStates initial_states;
  double observer_perturb = 0.0;
  std::uint64_t seed = 0;
  double dt = 1e-3;
  double horizon = 2.0;
};

struct World {
  double t = 0.0;
  long step = 0;
  stl::AgentStates states;
  observer::ObserverState estimates;
  std::map<int, Eigen::VectorXd> disturbance;  // held sample per agent
  std::mt19937_64 rng;
  FaultLog faults;
};

// Seeds the disturbance stream, initializes estimates, and verifies the
// t = 0 containment of every task funnel (Error("initialization")).
World init_world(const Model& model);

// One RK4 step of the coupled plant/observer system. Controller and observer
// are re-evaluated at every stage; the disturbance is held across the step.
// Funnel exits are checked against the committed endpoint state only, so a
// stage extrapolation that briefly pokes outside does not raise a fault.
void advance(World& world, const Model& model);

struct RunResult {
  Trace trace;
  FaultLog faults;
};

// Full run on the uniform grid t = 0, dt, ..., horizon. Stops early when a
// non-finite state appears; funnel and observer-bound violations are logged
// and the run continues with clamped errors.
RunResult run(const Model& model);

}  // namespace ppmas::sim
