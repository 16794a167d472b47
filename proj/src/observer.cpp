#include "ppmas/observer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace ppmas::observer {

namespace {

std::string pair_name(int i, int r) {
  return "(" + std::to_string(i) + "," + std::to_string(r) + ")";
}

}  // namespace

const ObserverPair* ObserverTopology::find(int observer, int target) const {
  for (const auto& p : pairs) {
    if (p.observer == observer && p.target == target) return &p;
  }
  return nullptr;
}

ObserverTopology build_observer_topology(const topology::Graph& gc, int k) {
  ObserverTopology topo;
  topo.k = k;
  if (k < 2) return topo;  // no estimation needed
  std::map<int, std::set<int>> khop;
  std::map<int, std::set<int>> closed;
  for (int i = 1; i <= gc.n; ++i) {
    khop[i] = topology::k_hop_neighbors(gc, i, k);
    closed[i] = topology::closed_neighbors(gc, i);
  }
  for (int i = 1; i <= gc.n; ++i) {
    for (int r : khop[i]) {
      ObserverPair pair;
      pair.observer = i;
      pair.target = r;
      for (int l : closed[i]) {
        if (l != i && khop[r].count(l)) pair.consensus.push_back(l);
      }
      std::sort(pair.consensus.begin(), pair.consensus.end());
      int common = 0;
      for (int l : closed[i]) {
        if (closed[r].count(l)) ++common;
      }
      pair.anchor_cardinality = common;
      topo.pairs.push_back(std::move(pair));
    }
  }
  std::sort(topo.pairs.begin(), topo.pairs.end(),
            [](const ObserverPair& a, const ObserverPair& b) {
              return std::tie(a.observer, a.target) <
                     std::tie(b.observer, b.target);
            });
  return topo;
}

void validate_observer_funnels(const ObserverFunnels& funnels,
                               const ObserverTopology& topo) {
  double common_decay = -1.0;
  for (const auto& pair : topo.pairs) {
    const PairKey key{pair.observer, pair.target};
    auto dit = funnels.delta.find(key);
    auto rit = funnels.rho.find(key);
    if (dit == funnels.delta.end() || rit == funnels.rho.end()) {
      throw Error("observer_funnels",
                  "missing delta/rho funnel for observer pair " +
                      pair_name(pair.observer, pair.target));
    }
    funnels::validate_ppf(dit->second);
    funnels::validate_ppf(rit->second);
    for (double d : {dit->second.decay, rit->second.decay}) {
      if (common_decay < 0.0) {
        common_decay = d;
      } else if (std::abs(common_decay - d) > 1e-12) {
        throw Error("observer_funnels",
                    "all observer funnels must share one decay rate");
      }
    }
  }
  if (!(funnels.alpha > 0.0)) {
    throw Error("observer_funnels", "alpha must be positive");
  }

  // Per target: ||rho_r|| <= alpha * min_i delta_r^i, checked at both ends of
  // the (shared-decay) exponentials.
  std::map<int, std::vector<PairKey>> by_target;
  for (const auto& pair : topo.pairs) {
    by_target[pair.target].push_back({pair.observer, pair.target});
  }
  for (const auto& [target, keys] : by_target) {
    for (bool at_infinity : {false, true}) {
      double stacked_sq = 0.0;
      double min_delta = std::numeric_limits<double>::infinity();
      for (const PairKey& key : keys) {
        const auto& rho = funnels.rho.at(key);
        const auto& delta = funnels.delta.at(key);
        const double r = at_infinity ? rho.v_inf : rho.v0;
        const double d = at_infinity ? delta.v_inf : delta.v0;
        stacked_sq += r * r;
        min_delta = std::min(min_delta, d);
      }
      if (std::sqrt(stacked_sq) > funnels.alpha * min_delta + 1e-12) {
        throw Error("observer_funnels",
                    "||rho|| exceeds alpha * min delta for target " +
                        std::to_string(target) +
                        (at_infinity ? " as t -> infinity" : " at t = 0"));
      }
    }
  }
}

namespace {

double uniform_symmetric(std::mt19937_64& rng, double amplitude) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
  return amplitude * (2.0 * u - 1.0);
}

}  // namespace

ObserverState init_observer(const ObserverTopology& topo,
                            const ObserverFunnels& funnels,
                            const AgentStates& true_states,
                            double perturb_scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ObserverState state;
  for (const auto& pair : topo.pairs) {
    const Eigen::VectorXd& truth = true_states.at(pair.target);
    Eigen::VectorXd estimate = truth;
    for (Eigen::Index c = 0; c < estimate.size(); ++c) {
      estimate[c] += uniform_symmetric(rng, perturb_scale);
    }
    state.estimates[{pair.observer, pair.target}] = std::move(estimate);
  }

  // The xi bound couples all estimates of a target; verify it jointly.
  for (const auto& pair : topo.pairs) {
    const PairKey key{pair.observer, pair.target};
    std::map<int, Eigen::VectorXd> neighbors;
    for (int l : pair.consensus) {
      neighbors[l] = state.estimates.at({l, pair.target});
    }
    const Eigen::VectorXd& truth = true_states.at(pair.target);
    const Eigen::VectorXd xi =
        observer_xi(pair, state.estimates.at(key), neighbors,
                    pair.anchor_cardinality > 0 ? &truth : nullptr);
    const double rho0 = ppf_eval(funnels.rho.at(key), 0.0);
    if (xi.cwiseAbs().maxCoeff() >= rho0) {
      throw Error("initialization",
                  "initial consensus residual violates its funnel for "
                  "observer pair " + pair_name(pair.observer, pair.target));
    }
  }
  return state;
}

Eigen::VectorXd observer_xi(
    const ObserverPair& pair, const Eigen::VectorXd& own_estimate,
    const std::map<int, Eigen::VectorXd>& neighbor_estimates,
    const Eigen::VectorXd* relayed_true) {
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(own_estimate.size());
  for (int l : pair.consensus) {
    auto it = neighbor_estimates.find(l);
    if (it == neighbor_estimates.end()) {
      throw Error("missing_estimate",
                  "missing estimate of agent " + std::to_string(pair.target) +
                      " from neighbor " + std::to_string(l));
    }
    xi += own_estimate - it->second;
  }
  if (pair.anchor_cardinality > 0) {
    if (relayed_true == nullptr) {
      throw Error("missing_relay",
                  "anchored observer pair " +
                      pair_name(pair.observer, pair.target) +
                      " requires the relayed true state");
    }
    xi += pair.anchor_cardinality * (own_estimate - *relayed_true);
  }
  return xi;
}

Eigen::VectorXd observer_rhs(const Eigen::VectorXd& xi, double rho_t,
                             FaultLog* faults, const ObserverPair& pair,
                             double t, long step) {
  if (!(rho_t > 0.0)) {
    throw Error("observer_fault", "non-positive observer funnel value");
  }
  constexpr double kEdge = 1.0 - 1e-9;
  Eigen::VectorXd out(xi.size());
  for (Eigen::Index c = 0; c < xi.size(); ++c) {
    double e = xi[c] / rho_t;
    if (!std::isfinite(e) || e <= -1.0 || e >= 1.0) {
      if (faults != nullptr) {
        faults->add(t, step, "observer_clamp",
                    "pair " + pair_name(pair.observer, pair.target) +
                        " component " + std::to_string(c) +
                        " left its funnel (e=" + std::to_string(e) + ")");
      }
      e = std::isfinite(e) ? std::clamp(e, -kEdge, kEdge) : 0.0;
    }
    const double jac = std::log(2.0 / (1.0 - e * e));
    const double eps = std::log((1.0 + e) / (1.0 - e));
    out[c] = -(jac * eps) / rho_t;
  }
  return out;
}

bool BoundsReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const BoundsCheck& c) { return c.pass; });
}

BoundsReport check_observer_bounds(const ObserverState& state,
                                   const AgentStates& true_states,
                                   const ObserverFunnels& funnels,
                                   const ObserverTopology& topo, double t) {
  BoundsReport report;
  for (const auto& pair : topo.pairs) {
    const PairKey key{pair.observer, pair.target};
    BoundsCheck check;
    check.pair = key;
    check.error_norm =
        (state.estimates.at(key) - true_states.at(pair.target)).norm();
    check.bound = ppf_eval(funnels.delta.at(key), t);
    check.pass = check.error_norm < check.bound;
    report.checks.push_back(check);
  }
  return report;
}

}  // namespace ppmas::observer
