#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "ppmas/observer.hpp"

using namespace ppmas;

namespace {

topology::Graph sec5_comm() {
  auto g = topology::Graph::undirected(5);
  g.add_edge(1, 2);
  g.add_edge(1, 3);
  g.add_edge(2, 3);
  g.add_edge(3, 4);
  g.add_edge(4, 5);
  return g;
}

topology::Graph path4() {
  auto g = topology::Graph::undirected(4);
  g.add_edge(1, 2);
  g.add_edge(2, 3);
  g.add_edge(3, 4);
  return g;
}

observer::ObserverFunnels uniform_funnels(const observer::ObserverTopology& t,
                                          funnels::Ppf delta, funnels::Ppf rho,
                                          double alpha) {
  observer::ObserverFunnels f;
  f.alpha = alpha;
  for (const auto& p : t.pairs) {
    f.delta[{p.observer, p.target}] = delta;
    f.rho[{p.observer, p.target}] = rho;
  }
  return f;
}

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("estimation pairs cover exactly the 2..k hop targets") {
  const auto topo = observer::build_observer_topology(sec5_comm(), 3);
  std::set<std::pair<int, int>> got;
  for (const auto& p : topo.pairs) got.insert({p.observer, p.target});
  const std::set<std::pair<int, int>> expect{
      {1, 4}, {1, 5}, {2, 4}, {2, 5}, {3, 5},
      {4, 1}, {4, 2}, {5, 1}, {5, 2}, {5, 3}};
  CHECK(got == expect);

  // Path 1-2-3-4: agent 2 is 1-hop from target 3, so it holds no estimate of
  // it; observer 1 anchors through the relay from 2 with no consensus peers.
  const auto chain = observer::build_observer_topology(path4(), 3);
  const auto* pair13 = chain.find(1, 3);
  REQUIRE(pair13 != nullptr);
  CHECK(pair13->consensus.empty());
  CHECK(pair13->anchor_cardinality == 1);

  const auto* pair14 = chain.find(1, 4);
  REQUIRE(pair14 != nullptr);
  CHECK(pair14->consensus == std::vector<int>{2});
  CHECK(pair14->anchor_cardinality == 0);

  const auto* pair24 = chain.find(2, 4);
  REQUIRE(pair24 != nullptr);
  CHECK(pair24->consensus == std::vector<int>{1});
  CHECK(pair24->anchor_cardinality == 1);

  CHECK(observer::build_observer_topology(sec5_comm(), 0).pairs.empty());
}

TEST_CASE("funnel compatibility validation") {
  const auto topo = observer::build_observer_topology(sec5_comm(), 3);
  const funnels::Ppf delta{1.5, 0.5, 2.0};
  const funnels::Ppf rho{0.25, 0.077, 2.0};
  auto ok = uniform_funnels(topo, delta, rho, 0.3);
  CHECK_NOTHROW(observer::validate_observer_funnels(ok, topo));

  auto missing = ok;
  missing.delta.erase({1, 4});
  CHECK(error_code([&] {
          observer::validate_observer_funnels(missing, topo);
        }) == "observer_funnels");

  auto skewed = ok;
  skewed.rho[{1, 4}].decay = 1.0;
  CHECK(error_code([&] {
          observer::validate_observer_funnels(skewed, topo);
        }) == "observer_funnels");

  // Three observers of target 5 stack rho to 0.077*sqrt(3) > alpha*0.5.
  auto weak = uniform_funnels(topo, delta, rho, 0.2);
  CHECK(error_code([&] {
          observer::validate_observer_funnels(weak, topo);
        }) == "observer_funnels");

  auto negative = ok;
  negative.alpha = 0.0;
  CHECK(error_code([&] {
          observer::validate_observer_funnels(negative, topo);
        }) == "observer_funnels");
}

TEST_CASE("initial estimates must start inside the consensus funnel") {
  const auto topo = observer::build_observer_topology(sec5_comm(), 3);
  const auto funnels =
      uniform_funnels(topo, {1.5, 0.5, 2.0}, {0.25, 0.077, 2.0}, 0.3);
  stl::AgentStates truth;
  for (int a = 1; a <= 5; ++a) truth[a] = vec2(a, -a);

  const auto exact = observer::init_observer(topo, funnels, truth, 0.0, 1);
  for (const auto& p : topo.pairs) {
    CHECK((exact.estimates.at({p.observer, p.target}) - truth[p.target])
              .norm() == doctest::Approx(0.0));
  }

  CHECK_NOTHROW(observer::init_observer(topo, funnels, truth, 0.02, 7));
  CHECK(error_code([&] {
          observer::init_observer(topo, funnels, truth, 0.5, 7);
        }) == "initialization");
}

TEST_CASE("consensus residual assembly") {
  const auto chain = observer::build_observer_topology(path4(), 3);
  const auto* pair24 = chain.find(2, 4);
  REQUIRE(pair24 != nullptr);

  const Eigen::VectorXd own = vec2(1.0, 2.0);
  std::map<int, Eigen::VectorXd> peers;
  peers[1] = vec2(0.5, 2.5);
  const Eigen::VectorXd truth = vec2(0.0, 1.0);

  const auto xi = observer::observer_xi(*pair24, own, peers, &truth);
  // (own - peer) + 1 * (own - truth), expanded by hand.
  CHECK(xi[0] == doctest::Approx((1.0 - 0.5) + (1.0 - 0.0)));
  CHECK(xi[1] == doctest::Approx((2.0 - 2.5) + (2.0 - 1.0)));

  std::map<int, Eigen::VectorXd> consensus_only;
  consensus_only[2] = own;
  const auto* pair14 = chain.find(1, 4);
  REQUIRE(pair14 != nullptr);
  CHECK(observer::observer_xi(*pair14, own, consensus_only, nullptr).norm() ==
        doctest::Approx(0.0));

  CHECK(observer::observer_xi(*pair24, truth, {{1, truth}}, &truth).norm() ==
        doctest::Approx(0.0));

  CHECK(error_code([&] { observer::observer_xi(*pair24, own, {}, &truth); }) ==
        "missing_estimate");
  CHECK(error_code([&] { observer::observer_xi(*pair24, own, peers,
                                               nullptr); }) == "missing_relay");
}

TEST_CASE("funnel repulsion dynamics of the estimate") {
  observer::ObserverPair dummy;
  dummy.observer = 1;
  dummy.target = 3;

  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  CHECK(observer::observer_rhs(zero, 1.0, nullptr, dummy, 0.0, 0).norm() ==
        doctest::Approx(0.0));

  Eigen::VectorXd half(1);
  half << 0.5;
  const auto out = observer::observer_rhs(half, 1.0, nullptr, dummy, 0.0, 0);
  CHECK(out[0] ==
        doctest::Approx(-std::log(8.0 / 3.0) * std::log(3.0)).epsilon(1e-9));
  CHECK(out[0] == doctest::Approx(-1.0776).epsilon(1e-3));

  std::mt19937 rng(37);
  std::uniform_real_distribution<double> u(-0.999, 0.999);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd e(1), neg(1);
    e << u(rng);
    neg << -e[0];
    const auto fwd = observer::observer_rhs(e, 1.0, nullptr, dummy, 0.0, 0);
    const auto bwd = observer::observer_rhs(neg, 1.0, nullptr, dummy, 0.0, 0);
    CHECK(fwd[0] == doctest::Approx(-bwd[0]));
    if (e[0] != 0.0) CHECK(fwd[0] * e[0] < 0.0);  // drives xi toward zero
  }

  FaultLog log;
  Eigen::VectorXd outside(1);
  outside << 1.5;
  const auto clamped =
      observer::observer_rhs(outside, 1.0, &log, dummy, 0.25, 3);
  CHECK(std::isfinite(clamped[0]));
  REQUIRE(log.events.size() == 1);
  CHECK(log.events[0].kind == "observer_clamp");
  CHECK(log.events[0].t == doctest::Approx(0.25));

  CHECK(error_code([&] {
          observer::observer_rhs(zero, 0.0, nullptr, dummy, 0.0, 0);
        }) == "observer_fault");
}

TEST_CASE("error-bound reporting against the envelopes") {
  const auto topo = observer::build_observer_topology(sec5_comm(), 3);
  const auto funnels =
      uniform_funnels(topo, {1.5, 0.5, 2.0}, {0.25, 0.077, 2.0}, 0.3);
  stl::AgentStates truth;
  for (int a = 1; a <= 5; ++a) truth[a] = vec2(0.2 * a, -0.1 * a);

  auto state = observer::init_observer(topo, funnels, truth, 0.0, 1);
  CHECK(observer::check_observer_bounds(state, truth, funnels, topo, 0.0)
            .all_pass());

  // Freeze the estimates and walk the targets away; the bound must break.
  stl::AgentStates moved = truth;
  for (int a = 1; a <= 5; ++a) moved[a] = truth[a] + vec2(3.0, 0.0);
  const auto broken =
      observer::check_observer_bounds(state, moved, funnels, topo, 1.0);
  CHECK_FALSE(broken.all_pass());
  for (const auto& c : broken.checks) {
    CHECK(c.error_norm == doctest::Approx(3.0));
    CHECK(c.bound < 3.0);
  }
}

TEST_CASE("anchored estimate of a frozen target converges under delta") {
  // Single observer pair with a direct anchor, integrated with RK4.
  observer::ObserverPair pair;
  pair.observer = 1;
  pair.target = 2;
  pair.anchor_cardinality = 1;
  const funnels::Ppf rho{0.5, 0.1, 2.0};
  const funnels::Ppf delta{1.0, 0.2, 2.0};

  const Eigen::VectorXd truth = vec2(1.0, -2.0);
  Eigen::VectorXd est = truth + vec2(0.3, -0.25);  // inside rho(0)
  const double dt = 1e-3;
  double t = 0.0;
  const auto deriv = [&](const Eigen::VectorXd& x, double at) {
    const Eigen::VectorXd xi = observer::observer_xi(pair, x, {}, &truth);
    return observer::observer_rhs(xi, funnels::ppf_eval(rho, at), nullptr,
                                  pair, at, 0);
  };
  while (t < 3.0) {
    const Eigen::VectorXd k1 = deriv(est, t);
    const Eigen::VectorXd k2 = deriv(est + 0.5 * dt * k1, t + 0.5 * dt);
    const Eigen::VectorXd k3 = deriv(est + 0.5 * dt * k2, t + 0.5 * dt);
    const Eigen::VectorXd k4 = deriv(est + dt * k3, t + dt);
    est += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += dt;
    CHECK((est - truth).cwiseAbs().maxCoeff() <
          funnels::ppf_eval(rho, t) + 1e-9);
  }
  // delta is within 1% of its asymptote by t = 3; the error must be under it.
  CHECK((est - truth).norm() < delta.v_inf + 0.01);
}
