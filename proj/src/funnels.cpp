#include "ppmas/funnels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace ppmas::funnels {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

void validate_ppf(const Ppf& p) {
  if (!(p.v_inf > 0.0) || !(p.v0 >= p.v_inf) || !(p.decay >= 0.0)) {
    throw Error("ppf", "prescribed performance function requires v0 >= v_inf > 0 "
                       "and decay >= 0 (got v0=" + fmt(p.v0) +
                           ", v_inf=" + fmt(p.v_inf) + ", decay=" +
                           fmt(p.decay) + ")");
  }
}

double ppf_eval(const Ppf& p, double t) {
  if (t < 0.0) {
    throw Error("ppf", "prescribed performance functions are defined on t >= 0");
  }
  return (p.v0 - p.v_inf) * std::exp(-p.decay * t) + p.v_inf;
}

double ppf_deriv(const Ppf& p, double t) {
  if (t < 0.0) {
    throw Error("ppf", "prescribed performance functions are defined on t >= 0");
  }
  return -p.decay * (p.v0 - p.v_inf) * std::exp(-p.decay * t);
}

namespace {

double predicate_margin_eval(const PredicateMargin& pm, double t,
                             bool limit) {
  double delta = 0.0;
  for (const MarginTerm& term : pm.terms) {
    delta += term.weight * (limit ? term.delta.v_inf : ppf_eval(term.delta, t));
  }
  if (pm.kind == stl::PredicateKind::Linear) {
    return delta;
  }
  if (delta >= pm.radius) {
    throw Error("infeasible_margin",
                "aggregate estimation bound " + fmt(delta) +
                    " reaches the predicate radius " + fmt(pm.radius) +
                    " at t=" + fmt(t));
  }
  return 2.0 * delta * pm.radius - delta * delta;
}

double predicate_margin_deriv(const PredicateMargin& pm, double t) {
  double delta = 0.0;
  double delta_dot = 0.0;
  for (const MarginTerm& term : pm.terms) {
    delta += term.weight * ppf_eval(term.delta, t);
    delta_dot += term.weight * ppf_deriv(term.delta, t);
  }
  if (pm.kind == stl::PredicateKind::Linear) {
    return delta_dot;
  }
  return (2.0 * pm.radius - 2.0 * delta) * delta_dot;
}

}  // namespace

double margin_eval(const Margin& m, double t) {
  double best = 0.0;
  for (const PredicateMargin& pm : m.predicates) {
    best = std::max(best, predicate_margin_eval(pm, t, false));
  }
  return best;
}

double margin_deriv(const Margin& m, double t) {
  if (m.predicates.empty()) return 0.0;
  double best = -kInf;
  double deriv = 0.0;
  for (const PredicateMargin& pm : m.predicates) {
    const double v = predicate_margin_eval(pm, t, false);
    if (v > best) {
      best = v;
      deriv = predicate_margin_deriv(pm, t);
    }
  }
  return best > 0.0 ? deriv : 0.0;
}

double margin_limit(const Margin& m) {
  double best = 0.0;
  for (const PredicateMargin& pm : m.predicates) {
    best = std::max(best, predicate_margin_eval(pm, 0.0, true));
  }
  return best;
}

double capital_gamma(const FunnelSpec& spec, double t) {
  if (spec.conjuncts.empty()) {
    throw Error("funnel_fault", "funnel spec has no conjunct funnels");
  }
  Eigen::VectorXd values(spec.conjuncts.size());
  for (std::size_t j = 0; j < spec.conjuncts.size(); ++j) {
    const ConjunctFunnel& c = spec.conjuncts[j];
    values[static_cast<Eigen::Index>(j)] =
        ppf_eval(c.gamma, t) - margin_eval(c.margin, t);
  }
  const double value = spec.conjuncts.size() == 1
                           ? values[0]
                           : stl::smooth_min(values, spec.eta).value;
  if (!(value > 0.0)) {
    throw Error("funnel_fault",
                "adjusted funnel is non-positive at t=" + fmt(t));
  }
  return value;
}

double capital_gamma_deriv(const FunnelSpec& spec, double t) {
  Eigen::VectorXd values(spec.conjuncts.size());
  Eigen::VectorXd derivs(spec.conjuncts.size());
  for (std::size_t j = 0; j < spec.conjuncts.size(); ++j) {
    const ConjunctFunnel& c = spec.conjuncts[j];
    const auto idx = static_cast<Eigen::Index>(j);
    values[idx] = ppf_eval(c.gamma, t) - margin_eval(c.margin, t);
    derivs[idx] = ppf_deriv(c.gamma, t) - margin_deriv(c.margin, t);
  }
  if (spec.conjuncts.size() == 1) return derivs[0];
  const Eigen::VectorXd w = stl::smooth_min(values, spec.eta).weights;
  return w.dot(derivs);
}

Ppf tune_gamma(const TuneRequest& req) {
  if (!(req.rho_max > 0.0) || !(req.rho_max < req.rho_opt)) {
    throw Error("rho_opt", "rho_max must satisfy 0 < rho_max < rho_opt (got "
                           "rho_max=" + fmt(req.rho_max) +
                               ", rho_opt=" + fmt(req.rho_opt) + ")");
  }
  if (!(req.r_target > 0.0)) {
    throw Error("feasibility", "r_target must be positive");
  }
  const double ceiling = req.rho_max - req.r_target;
  if (!(ceiling > 0.0)) {
    throw Error("feasibility",
                "rho_max - r_target must be positive (got " + fmt(ceiling) + ")");
  }

  double t_star = req.window_a;
  double wdw_lo = req.window_a;
  double wdw_hi = req.window_b;
  if (req.kind == stl::TemporalKind::Eventually) {
    t_star = req.window_a + req.eventually_frac * (req.window_b - req.window_a);
    wdw_lo = wdw_hi = t_star;
  } else if (req.kind == stl::TemporalKind::EventuallyAlways) {
    wdw_hi = req.window_b + req.inner_b;
  }

  // Feasibility: the margin must leave room below rho_max over the window.
  {
    const int n = 1000;
    double max_margin = 0.0;
    for (int s = 0; s <= n; ++s) {
      const double t = wdw_lo + (wdw_hi - wdw_lo) * s / n;
      max_margin = std::max(max_margin, margin_eval(req.margin, t));
      if (wdw_hi == wdw_lo) break;
    }
    if (!(req.rho_max - max_margin > 0.0)) {
      throw Error("feasibility",
                  "rho_max - max margin over the satisfaction window is "
                  "non-positive (" + fmt(req.rho_max - max_margin) + ")");
    }
  }

  const double m_inf = margin_limit(req.margin);
  if (!(m_inf < ceiling)) {
    throw Error("feasibility",
                "asymptotic margin " + fmt(m_inf) +
                    " leaves no room under rho_max - r_target = " +
                    fmt(ceiling));
  }

  const double need0 = req.rho_max - req.rho_hat0 + margin_eval(req.margin, 0.0);
  const double slack = 0.25 * std::max({std::abs(need0), ceiling, 1e-3});
  double g_inf = 0.5 * (m_inf + ceiling);
  double g0 = std::max(need0 + slack, g_inf);

  Ppf gamma{g0, g_inf, 0.0};
  if (g0 > ceiling) {
    if (t_star <= 1e-12) {
      throw Error("initialization",
                  "initial estimated robustness lies outside any funnel that "
                  "closes by the (immediate) satisfaction instant");
    }
    gamma.decay = 1.05 * std::log((g0 - g_inf) / (ceiling - g_inf)) / t_star;
  } else {
    gamma.v_inf = std::min(g_inf, g0);
  }
  validate_ppf(gamma);

  // Self-validation on a dense grid.
  {
    const int n = 10000;
    const double horizon = std::max(req.horizon, wdw_hi);
    for (int s = 0; s <= n; ++s) {
      const double t = horizon * s / n;
      const double g = ppf_eval(gamma, t);
      if (!(g - margin_eval(req.margin, t) > 0.0)) {
        throw Error("assumption6",
                    "adjusted funnel gamma - margin is non-positive at t=" +
                        fmt(t));
      }
      if (t >= t_star - 1e-12 && g > ceiling + 1e-9) {
        throw Error("feasibility",
                    "tuned funnel exceeds rho_max - r_target inside the "
                    "satisfaction window at t=" + fmt(t));
      }
    }
    if (!(ppf_eval(gamma, 0.0) > need0)) {
      throw Error("initialization",
                  "tuned funnel does not contain the initial robustness error");
    }
  }
  return gamma;
}

double estimate_rho_opt(const stl::Body& body, const stl::PredicateTable& table,
                        double eta) {
  std::vector<const stl::Predicate*> preds;
  bool closed_form = true;
  for (const stl::Literal& lit : body.literals) {
    if (lit.is_true) continue;
    const stl::Predicate& p = table.at(lit.name);
    preds.push_back(&p);
    if (lit.negated || p.kind != stl::PredicateKind::Norm2Le) {
      closed_form = false;
    }
  }
  if (preds.empty()) return kInf;

  if (closed_form) {
    double tightest = kInf;
    for (const auto* p : preds) tightest = std::min(tightest, p->radius_sq);
    const double gap =
        preds.size() > 1 ? std::log(static_cast<double>(preds.size())) / eta
                         : 0.0;
    return tightest - gap;
  }

  // Mixed or negated bodies: randomized coordinate ascent.
  std::map<int, Eigen::Index> dims;
  for (const auto* p : preds) {
    for (std::size_t j = 0; j < p->agents.size(); ++j) {
      dims[p->agents[j]] = p->kind == stl::PredicateKind::Norm2Le
                               ? p->coeffs[j].cols()
                               : p->coeffs[j].rows();
    }
  }
  const auto value_at = [&](const stl::AgentStates& xs) {
    return stl::eval_robustness(body, xs, table, {eta});
  };

  std::mt19937_64 rng(0x5eedULL);
  const auto uniform = [&](double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  };

  double best = -kInf;
  for (int restart = 0; restart < 100; ++restart) {
    stl::AgentStates xs;
    for (const auto& [agent, dim] : dims) {
      Eigen::VectorXd x(dim);
      for (Eigen::Index c = 0; c < dim; ++c) x[c] = uniform(-10.0, 10.0);
      xs[agent] = x;
    }
    double current = value_at(xs);
    double step = 2.0;
    for (int iter = 0; iter < 200 && step > 1e-6; ++iter) {
      bool improved = false;
      for (auto& [agent, x] : xs) {
        for (Eigen::Index c = 0; c < x.size(); ++c) {
          for (double sign : {1.0, -1.0}) {
            x[c] += sign * step;
            const double v = value_at(xs);
            if (v > current) {
              current = v;
              improved = true;
            } else {
              x[c] -= sign * step;
            }
          }
        }
      }
      if (!improved) step *= 0.5;
      if (current > 1e6) return kInf;  // unbounded above
    }
    best = std::max(best, current);
  }
  return best;
}

}  // namespace ppmas::funnels
