#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <vector>

#include "ppmas/errors.hpp"
#include "ppmas/funnels.hpp"
#include "ppmas/topology.hpp"

namespace ppmas::observer {

using PairKey = std::pair<int, int>;  // (observer i, target r)
using AgentStates = stl::AgentStates;

// Static wiring of one estimate x_hat_r^i: who it reaches consensus with and
// how strongly it is anchored to the relayed true state.
struct ObserverPair {
  int observer = 0;
  int target = 0;
  std::vector<int> consensus;  // l in N_i^C intersect N_r^k, l != observer
  int anchor_cardinality = 0;  // |N_i^C intersect N_r^C|
};

struct ObserverTopology {
  int k = 0;
  std::vector<ObserverPair> pairs;  // sorted by (observer, target)

  const ObserverPair* find(int observer, int target) const;
};

// Every agent estimates exactly its k-hop targets (distance in [2, k]).
ObserverTopology build_observer_topology(const topology::Graph& gc, int k);

struct ObserverFunnels {
  std::map<PairKey, funnels::Ppf> delta;  // estimation-error envelope
  std::map<PairKey, funnels::Ppf> rho;    // consensus-residual funnel
  double alpha = 1.0;
};

// Checks that both funnels exist per pair and that per target r the stacked
// rho vector satisfies ||rho_r(t)|| <= alpha * min_i delta_r^i(t) at t = 0 and
// t -> infinity. All delta/rho funnels must share one decay rate so the two
// endpoint checks cover all t. Throws Error("observer_funnels").
void validate_observer_funnels(const ObserverFunnels& funnels,
                               const ObserverTopology& topo);

struct ObserverState {
  std::map<PairKey, Eigen::VectorXd> estimates;
};

// Estimates start at the target's true state plus a seeded uniform
// perturbation of amplitude perturb_scale; the initial consensus residuals
// must satisfy |xi(0)| < rho(0) componentwise (Error("initialization")).
ObserverState init_observer(const ObserverTopology& topo,
                            const ObserverFunnels& funnels,
                            const AgentStates& true_states,
                            double perturb_scale, std::uint64_t seed);

// xi = sum_{l in consensus} (x_hat^i - x_hat^l) + anchor * (x_hat^i - x_r).
// relayed_true must be present iff anchor_cardinality > 0.
Eigen::VectorXd observer_xi(
    const ObserverPair& pair, const Eigen::VectorXd& own_estimate,
    const std::map<int, Eigen::VectorXd>& neighbor_estimates,
    const Eigen::VectorXd* relayed_true);

// Componentwise estimate dynamics -(1/rho) ln(2/(1-e^2)) ln((1+e)/(1-e)) with
// e = xi/rho. e is clamped to +-(1 - 1e-9); clamps are logged as faults when
// a log is supplied.
Eigen::VectorXd observer_rhs(const Eigen::VectorXd& xi, double rho_t,
                             FaultLog* faults, const ObserverPair& pair,
                             double t, long step);

struct BoundsCheck {
  PairKey pair;
  double error_norm = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct BoundsReport {
  std::vector<BoundsCheck> checks;
  bool all_pass() const;
};

// Per-pair ||x_hat_r^i - x_r|| < delta_r^i(t).
BoundsReport check_observer_bounds(const ObserverState& state,
                                   const AgentStates& true_states,
                                   const ObserverFunnels& funnels,
                                   const ObserverTopology& topo, double t);

}  // namespace ppmas::observer
