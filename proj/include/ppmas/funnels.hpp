#pragma once

#include <vector>

#include "ppmas/errors.hpp"
#include "ppmas/stl.hpp"

namespace ppmas::funnels {

// Exponential prescribed performance function
//   p(t) = (v0 - v_inf) exp(-decay t) + v_inf
// Positive, C^1, bounded by v0, derivative bounded by decay * (v0 - v_inf).
struct Ppf {
  double v0 = 1.0;
  double v_inf = 1.0;
  double decay = 0.0;
};

void validate_ppf(const Ppf& p);
double ppf_eval(const Ppf& p, double t);
double ppf_deriv(const Ppf& p, double t);

// Worst-case robustness loss caused by replacing true states with estimates.
// One entry per estimated agent inside one predicate; `weight` is the induced
// operator norm of that agent's coefficient block (norm2_le) or the 1-norm of
// its coefficient vector (linear).
struct MarginTerm {
  double weight = 1.0;
  Ppf delta;  // observer error envelope of the estimated agent
};

struct PredicateMargin {
  stl::PredicateKind kind = stl::PredicateKind::Norm2Le;
  double radius = 0.0;  // r = sqrt(radius_sq), norm2_le only
  std::vector<MarginTerm> terms;
};

// Formula-level margin rho^t: max over the conjunct predicate margins.
// norm2_le uses 2*Delta*r - Delta^2 with Delta = sum_j weight_j delta_j(t);
// requires Delta < r (Error("infeasible_margin") otherwise).
struct Margin {
  std::vector<PredicateMargin> predicates;
};

double margin_eval(const Margin& m, double t);
double margin_deriv(const Margin& m, double t);
double margin_limit(const Margin& m);  // value as t -> infinity

// One funnel per conjunct of the task body, paired with that conjunct's
// estimation margin; the task funnel is their (smooth) minimum.
struct ConjunctFunnel {
  Ppf gamma;
  Margin margin;
};

struct FunnelSpec {
  double rho_max = 0.0;
  double eta = 10.0;  // smooth-min sharpness for multi-conjunct funnels
  std::vector<ConjunctFunnel> conjuncts;
};

// Gamma(t) = gamma(t) - rho^t(t), smooth-minimized over conjuncts.
// Throws Error("funnel_fault") with the timestamp if the value is <= 0.
double capital_gamma(const FunnelSpec& spec, double t);
double capital_gamma_deriv(const FunnelSpec& spec, double t);

struct TuneRequest {
  stl::TemporalKind kind = stl::TemporalKind::Always;
  double window_a = 0.0;
  double window_b = 0.0;
  double inner_b = 0.0;  // EventuallyAlways only
  double rho_max = 0.0;
  double rho_hat0 = 0.0;  // estimated robustness at t = 0
  double r_target = 0.0;  // guaranteed true-robustness floor inside the window
  double rho_opt = 0.0;   // estimated optimum of the body robustness
  Margin margin;
  double horizon = 0.0;           // grid-validation horizon
  double eventually_frac = 0.5;   // satisfaction instant for F as a fraction
};

// Produces gamma with
//   gamma(0) > rho_max - rho_hat0 + margin(0)   (initial containment)
//   gamma(t) <= rho_max - r_target for t >= t*  (window guarantee)
//   gamma(t) - margin(t) > 0 on a dense grid    (adjusted funnel positivity)
// t* = window_a (G), window_a + frac*(window_b - window_a) (F), window_a (FG).
// Errors: "feasibility", "rho_opt", "initialization", "assumption6".
Ppf tune_gamma(const TuneRequest& req);

// Estimated supremum of the body's smoothed robustness. Exact closed form for
// all-norm2_le conjunctions; randomized coordinate ascent otherwise.
// Returns +infinity when the body is unbounded above.
double estimate_rho_opt(const stl::Body& body, const stl::PredicateTable& table,
                        double eta);

}  // namespace ppmas::funnels
