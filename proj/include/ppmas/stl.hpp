#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "ppmas/errors.hpp"

namespace ppmas::stl {

// Predicates are restricted to the two concave families used by the tasks:
//   norm2_le : rho(x) = r^2 - || sum_j c_j x_j - d ||^2
//   linear   : rho(x) = sum_j a_j^T x_j + b
enum class PredicateKind { Norm2Le, Linear };

struct Predicate {
  PredicateKind kind = PredicateKind::Norm2Le;
  std::vector<int> agents;              // sorted, duplicate-free, 1-based ids
  std::vector<Eigen::MatrixXd> coeffs;  // one per agent; linear stores column vectors
  Eigen::VectorXd offset;               // d (norm2_le only)
  double radius_sq = 0.0;               // r^2 (norm2_le only)
  double bias = 0.0;                    // b (linear only)
};

// Throws Error("predicate") if the structural invariants do not hold.
void validate_predicate(const Predicate& pred);

using PredicateTable = std::map<std::string, Predicate>;
using AgentStates = std::map<int, Eigen::VectorXd>;

double eval_predicate(const Predicate& pred, const AgentStates& xs);

// Gradient of the predicate with respect to one agent's state slot.
// Returns zero if the agent does not appear in the predicate.
Eigen::VectorXd grad_predicate(const Predicate& pred, const AgentStates& xs,
                               int agent);

struct SmoothMinConfig {
  double eta = 10.0;  // sharpness; larger tightens the under-approximation
};

struct SmoothMinResult {
  double value = 0.0;
  Eigen::VectorXd weights;  // softmin coefficients, nonnegative, sum to 1
};

// value = -(1/eta) ln(sum_j exp(-eta v_j)), computed with the max-shift trick.
// Guarantees value <= min(v) and min(v) - value <= ln(n)/eta.
SmoothMinResult smooth_min(const Eigen::VectorXd& values, double eta);

// Non-temporal body: a conjunction of literals (grammar allows negation only
// directly above predicates). An `is_true` literal stands for the top symbol.
struct Literal {
  std::string name;
  bool negated = false;
  bool is_true = false;
};

struct Body {
  std::vector<Literal> literals;
};

enum class TemporalKind { Always, Eventually, EventuallyAlways };

struct Interval {
  double a = 0.0;
  double b = 0.0;
};

struct Formula {
  TemporalKind kind = TemporalKind::Always;
  Interval outer;
  Interval inner;  // EventuallyAlways only
  Body body;
};

// Grammar:
//   phi  := ('G'|'F') '[' num ',' num ']' tail
//   tail := '(' psi ')' | 'G' '[' num ',' num ']' '(' psi ')'   (FG, F only)
//   psi  := term ('&&' term)*
//   term := ['!'] IDENT | 'true'
// Errors: Error("syntax") with character position, Error("unknown_predicate"),
// Error("interval") when a > b or a bound is negative.
Formula parse_formula(const std::string& text, const PredicateTable& table);

// Round-trips: parse(print(f)) is structurally identical to f.
std::string print_formula(const Formula& formula);

// Smoothed conjunction robustness (control path). Negated literals contribute
// -rho; `true` literals are neutral. Result <= exact min semantics.
double eval_robustness(const Body& body, const AgentStates& xs,
                       const PredicateTable& table, const SmoothMinConfig& cfg);

// Softmin-weighted chain rule of eval_robustness; matches finite differences.
Eigen::VectorXd grad_robustness(const Body& body, const AgentStates& xs,
                                const PredicateTable& table, int agent,
                                const SmoothMinConfig& cfg);

// Exact (non-smoothed) min semantics. This is the monitoring oracle.
double exact_robustness(const Body& body, const AgentStates& xs,
                        const PredicateTable& table);

struct SampledSignal {
  double dt = 0.0;
  std::vector<AgentStates> samples;  // uniform grid starting at t = 0
};

// Ground-truth monitor: exact min/max over the samples inside the temporal
// window, using exact_robustness for the body. Throws Error("window") if the
// window exceeds the trace horizon.
double monitor_temporal(const Formula& formula, const SampledSignal& signal,
                        const PredicateTable& table);

}  // namespace ppmas::stl
