#include "ppmas/stl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace ppmas::stl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const Predicate& lookup(const PredicateTable& table, const std::string& name) {
  auto it = table.find(name);
  if (it == table.end()) {
    throw Error("unknown_predicate", "unknown predicate name '" + name + "'");
  }
  return it->second;
}

const Eigen::VectorXd& state_of(const AgentStates& xs, int agent) {
  auto it = xs.find(agent);
  if (it == xs.end()) {
    throw Error("missing_agent",
                "no state supplied for agent " + std::to_string(agent));
  }
  return it->second;
}

// y = sum_j c_j x_j - d
Eigen::VectorXd norm2_residual(const Predicate& pred, const AgentStates& xs) {
  Eigen::VectorXd y = -pred.offset;
  for (std::size_t j = 0; j < pred.agents.size(); ++j) {
    const Eigen::VectorXd& x = state_of(xs, pred.agents[j]);
    if (pred.coeffs[j].cols() != x.size()) {
      throw Error("dimension",
                  "coefficient/state dimension mismatch for agent " +
                      std::to_string(pred.agents[j]));
    }
    y += pred.coeffs[j] * x;
  }
  return y;
}

}  // namespace

void validate_predicate(const Predicate& pred) {
  if (pred.agents.empty()) {
    throw Error("predicate", "predicate reads no agents");
  }
  if (!std::is_sorted(pred.agents.begin(), pred.agents.end()) ||
      std::adjacent_find(pred.agents.begin(), pred.agents.end()) !=
          pred.agents.end()) {
    throw Error("predicate", "agent list must be sorted and duplicate-free");
  }
  if (pred.coeffs.size() != pred.agents.size()) {
    throw Error("predicate", "one coefficient block per agent required");
  }
  if (pred.kind == PredicateKind::Norm2Le) {
    if (!(pred.radius_sq > 0.0)) {
      throw Error("predicate", "norm2_le requires radius_sq > 0");
    }
    for (const auto& c : pred.coeffs) {
      if (c.rows() != pred.offset.size()) {
        throw Error("predicate", "coefficient rows must match offset size");
      }
    }
  } else {
    bool any_nonzero = false;
    for (const auto& a : pred.coeffs) {
      if (a.cols() != 1) {
        throw Error("predicate", "linear coefficients must be column vectors");
      }
      if (a.norm() > 0.0) any_nonzero = true;
    }
    if (!any_nonzero) {
      throw Error("predicate", "linear predicate needs a nonzero coefficient");
    }
  }
}

double eval_predicate(const Predicate& pred, const AgentStates& xs) {
  if (pred.kind == PredicateKind::Norm2Le) {
    const Eigen::VectorXd y = norm2_residual(pred, xs);
    return pred.radius_sq - y.squaredNorm();
  }
  double value = pred.bias;
  for (std::size_t j = 0; j < pred.agents.size(); ++j) {
    const Eigen::VectorXd& x = state_of(xs, pred.agents[j]);
    if (pred.coeffs[j].rows() != x.size()) {
      throw Error("dimension",
                  "coefficient/state dimension mismatch for agent " +
                      std::to_string(pred.agents[j]));
    }
    value += pred.coeffs[j].col(0).dot(x);
  }
  return value;
}

Eigen::VectorXd grad_predicate(const Predicate& pred, const AgentStates& xs,
                               int agent) {
  const Eigen::VectorXd& x = state_of(xs, agent);
  auto it = std::find(pred.agents.begin(), pred.agents.end(), agent);
  if (it == pred.agents.end()) {
    return Eigen::VectorXd::Zero(x.size());
  }
  const std::size_t j =
      static_cast<std::size_t>(std::distance(pred.agents.begin(), it));
  if (pred.kind == PredicateKind::Norm2Le) {
    const Eigen::VectorXd y = norm2_residual(pred, xs);
    return -2.0 * pred.coeffs[j].transpose() * y;
  }
  if (pred.coeffs[j].rows() != x.size()) {
    throw Error("dimension", "coefficient/state dimension mismatch for agent " +
                                 std::to_string(agent));
  }
  return pred.coeffs[j].col(0);
}

SmoothMinResult smooth_min(const Eigen::VectorXd& values, double eta) {
  if (values.size() == 0) {
    throw Error("empty_input", "smooth_min over an empty sequence");
  }
  if (!(eta > 0.0)) {
    throw Error("eta", "smooth_min requires eta > 0");
  }
  // Shift by the exact minimum: every exponent is <= 0, total >= 1, and the
  // result vmin - log(total)/eta never rounds above vmin.
  const double vmin = values.minCoeff();
  const Eigen::ArrayXd w = (eta * (vmin - values.array())).exp();
  const double total = w.sum();
  SmoothMinResult out;
  out.value = vmin - std::log(total) / eta;
  out.weights = (w / total).matrix();
  return out;
}

namespace {

struct LiteralValue {
  double value;
  const Literal* literal;
};

std::vector<LiteralValue> literal_values(const Body& body,
                                         const AgentStates& xs,
                                         const PredicateTable& table) {
  std::vector<LiteralValue> out;
  for (const Literal& lit : body.literals) {
    if (lit.is_true) continue;  // top is neutral in a conjunction
    double v = eval_predicate(lookup(table, lit.name), xs);
    out.push_back({lit.negated ? -v : v, &lit});
  }
  return out;
}

}  // namespace

double eval_robustness(const Body& body, const AgentStates& xs,
                       const PredicateTable& table,
                       const SmoothMinConfig& cfg) {
  const auto vals = literal_values(body, xs, table);
  if (vals.empty()) return kInf;
  Eigen::VectorXd v(vals.size());
  for (std::size_t j = 0; j < vals.size(); ++j) v[j] = vals[j].value;
  return smooth_min(v, cfg.eta).value;
}

Eigen::VectorXd grad_robustness(const Body& body, const AgentStates& xs,
                                const PredicateTable& table, int agent,
                                const SmoothMinConfig& cfg) {
  const Eigen::VectorXd& x = state_of(xs, agent);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(x.size());
  const auto vals = literal_values(body, xs, table);
  if (vals.empty()) return grad;
  Eigen::VectorXd v(vals.size());
  for (std::size_t j = 0; j < vals.size(); ++j) v[j] = vals[j].value;
  const Eigen::VectorXd w = smooth_min(v, cfg.eta).weights;
  for (std::size_t j = 0; j < vals.size(); ++j) {
    const Literal& lit = *vals[j].literal;
    Eigen::VectorXd g = grad_predicate(lookup(table, lit.name), xs, agent);
    grad += w[static_cast<Eigen::Index>(j)] * (lit.negated ? -g : g);
  }
  return grad;
}

double exact_robustness(const Body& body, const AgentStates& xs,
                        const PredicateTable& table) {
  double best = kInf;
  for (const auto& [v, lit] : literal_values(body, xs, table)) {
    best = std::min(best, v);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
  Parser(const std::string& text, const PredicateTable& table)
      : text_(text), table_(table) {}

  Formula parse() {
    skip_ws();
    Formula f;
    const char op = expect_operator();
    f.outer = parse_interval();
    skip_ws();
    if (op == 'F' && peek() == 'G') {
      ++pos_;
      f.kind = TemporalKind::EventuallyAlways;
      f.inner = parse_interval();
    } else {
      f.kind = (op == 'G') ? TemporalKind::Always : TemporalKind::Eventually;
    }
    expect('(');
    f.body = parse_body();
    expect(')');
    skip_ws();
    if (pos_ != text_.size()) {
      fail("trailing characters after formula");
    }
    return f;
  }

private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error("syntax", "syntax error at position " + std::to_string(pos_) +
                              ": " + what);
  }

  char expect_operator() {
    const char c = peek();
    if (c != 'G' && c != 'F') fail("expected temporal operator 'G' or 'F'");
    ++pos_;
    return c;
  }

  void expect(char c) {
    skip_ws();
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  double parse_number() {
    skip_ws();
    const char* begin = text_.data() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }

  Interval parse_interval() {
    expect('[');
    Interval iv;
    iv.a = parse_number();
    expect(',');
    iv.b = parse_number();
    expect(']');
    if (iv.a < 0.0 || iv.b < iv.a) {
      throw Error("interval", "malformed interval [" + format_double(iv.a) +
                                  "," + format_double(iv.b) + "]");
    }
    return iv;
  }

  std::string parse_ident() {
    skip_ws();
    const std::size_t start = pos_;
    if (pos_ >= text_.size() ||
        !(std::isalpha(static_cast<unsigned char>(text_[pos_])) ||
          text_[pos_] == '_')) {
      fail("expected identifier");
    }
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '_')) {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  Literal parse_term() {
    skip_ws();
    Literal lit;
    if (peek() == '!') {
      ++pos_;
      lit.negated = true;
    }
    lit.name = parse_ident();
    if (lit.name == "true") {
      if (lit.negated) fail("negation is only allowed above predicates");
      lit.is_true = true;
      lit.name.clear();
      return lit;
    }
    if (table_.find(lit.name) == table_.end()) {
      throw Error("unknown_predicate",
                  "unknown predicate name '" + lit.name + "'");
    }
    return lit;
  }

  Body parse_body() {
    Body body;
    body.literals.push_back(parse_term());
    skip_ws();
    while (peek() == '&') {
      expect('&');
      if (peek() != '&') fail("expected '&&'");
      ++pos_;
      body.literals.push_back(parse_term());
      skip_ws();
    }
    return body;
  }

  const std::string& text_;
  const PredicateTable& table_;
  std::size_t pos_ = 0;
};

}  // namespace

Formula parse_formula(const std::string& text, const PredicateTable& table) {
  return Parser(text, table).parse();
}

std::string print_formula(const Formula& formula) {
  std::ostringstream os;
  const auto interval = [&](const Interval& iv) {
    os << '[' << format_double(iv.a) << ',' << format_double(iv.b) << ']';
  };
  switch (formula.kind) {
    case TemporalKind::Always:
      os << 'G';
      interval(formula.outer);
      break;
    case TemporalKind::Eventually:
      os << 'F';
      interval(formula.outer);
      break;
    case TemporalKind::EventuallyAlways:
      os << 'F';
      interval(formula.outer);
      os << 'G';
      interval(formula.inner);
      break;
  }
  os << '(';
  for (std::size_t j = 0; j < formula.body.literals.size(); ++j) {
    const Literal& lit = formula.body.literals[j];
    if (j > 0) os << " && ";
    if (lit.is_true) {
      os << "true";
    } else {
      if (lit.negated) os << '!';
      os << lit.name;
    }
  }
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------------------
// Monitor
// ---------------------------------------------------------------------------

namespace {

// Sample indices whose time lies in [lo, hi], with a tolerance of dt/2 * 1e-6
// against grid round-off.
std::pair<std::size_t, std::size_t> window_indices(double lo, double hi,
                                                   double dt,
                                                   std::size_t n_samples) {
  const double eps = dt * 0.5e-6 + 1e-12;
  const double horizon = dt * static_cast<double>(n_samples - 1);
  if (hi > horizon + eps) {
    throw Error("window", "temporal window [" + format_double(lo) + "," +
                              format_double(hi) +
                              "] exceeds the trace horizon " +
                              format_double(horizon));
  }
  const auto first = static_cast<std::size_t>(std::ceil((lo - eps) / dt));
  auto last = static_cast<std::size_t>(std::floor((hi + eps) / dt));
  last = std::min(last, n_samples - 1);
  if (first > last) {
    throw Error("window", "temporal window contains no samples");
  }
  return {first, last};
}

}  // namespace

double monitor_temporal(const Formula& formula, const SampledSignal& signal,
                        const PredicateTable& table) {
  if (signal.samples.empty() || !(signal.dt > 0.0)) {
    throw Error("window", "monitor requires a nonempty, uniformly sampled trace");
  }
  const std::size_t n = signal.samples.size();
  const auto body_at = [&](std::size_t i) {
    return exact_robustness(formula.body, signal.samples[i], table);
  };

  if (formula.kind == TemporalKind::Always ||
      formula.kind == TemporalKind::Eventually) {
    const auto [first, last] =
        window_indices(formula.outer.a, formula.outer.b, signal.dt, n);
    double acc = body_at(first);
    for (std::size_t i = first + 1; i <= last; ++i) {
      const double v = body_at(i);
      acc = (formula.kind == TemporalKind::Always) ? std::min(acc, v)
                                                   : std::max(acc, v);
    }
    return acc;
  }

  // FG: max over t1 of min over [t1 + a_in, t1 + b_in].
  const auto [first, last] =
      window_indices(formula.outer.a, formula.outer.b, signal.dt, n);
  double best = -kInf;
  for (std::size_t i = first; i <= last; ++i) {
    const double t1 = signal.dt * static_cast<double>(i);
    const auto [ifirst, ilast] = window_indices(
        t1 + formula.inner.a, t1 + formula.inner.b, signal.dt, n);
    double inner = body_at(ifirst);
    for (std::size_t q = ifirst + 1; q <= ilast; ++q) {
      inner = std::min(inner, body_at(q));
    }
    best = std::max(best, inner);
  }
  return best;
}

}  // namespace ppmas::stl
