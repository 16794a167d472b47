#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "ppmas/controller.hpp"

using namespace ppmas;

namespace {

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

stl::Predicate ball(std::vector<int> agents, std::vector<double> scales,
                    Eigen::VectorXd center, double radius_sq) {
  stl::Predicate p;
  p.kind = stl::PredicateKind::Norm2Le;
  p.agents = std::move(agents);
  const Eigen::Index dim = center.size();
  for (double s : scales) {
    p.coeffs.push_back(s * Eigen::MatrixXd::Identity(dim, dim));
  }
  p.offset = std::move(center);
  p.radius_sq = radius_sq;
  return p;
}

control::TaskBinding goal_task(const std::string& pred, int agent,
                               double rho_max, const funnels::Ppf& gamma) {
  control::TaskBinding b;
  b.name = "task_" + pred;
  b.agent = agent;
  b.body.literals = {{pred, false, false}};
  b.funnels.rho_max = rho_max;
  b.funnels.eta = 10.0;
  b.funnels.conjuncts.push_back({gamma, {}});
  return b;
}

}  // namespace

TEST_CASE("normalized error: scaling, clamping, fault logging") {
  CHECK(control::normalized_error(3.0, 4.0, 2.0, nullptr, "t", 0, 0) ==
        doctest::Approx(-0.5));
  CHECK(control::normalized_error(4.0 - 0.9 * 2.0, 4.0, 2.0, nullptr, "t", 0,
                                  0) == doctest::Approx(-0.9));

  FaultLog log;
  const double upper = control::normalized_error(4.0, 4.0, 2.0, &log, "t",
                                                 0.5, 7);
  CHECK(upper == doctest::Approx(-1e-9));
  REQUIRE(log.events.size() == 1);
  CHECK(log.events[0].kind == "funnel_clamp");
  CHECK(log.events[0].step == 7);

  const double lower = control::normalized_error(-10.0, 4.0, 2.0, &log, "t",
                                                 0.6, 8);
  CHECK(lower == doctest::Approx(-1.0 + 1e-9));
  CHECK(log.events.size() == 2);

  const double wild = control::normalized_error(
      std::numeric_limits<double>::quiet_NaN(), 4.0, 2.0, &log, "t", 0.7, 9);
  CHECK(std::isfinite(wild));
  CHECK(wild > -1.0);
  CHECK(wild < 0.0);
  CHECK(log.events.size() == 3);

  CHECK(error_code([&] {
          control::normalized_error(3.0, 4.0, 0.0, nullptr, "t", 0, 0);
        }) == "funnel_fault");
}

TEST_CASE("error transformation: center, values, monotonicity, curvature") {
  const auto mid = control::transform(-0.5);
  CHECK(mid.eps == doctest::Approx(0.0));
  CHECK(mid.jac == doctest::Approx(4.0));

  CHECK(control::transform(-0.1).eps == doctest::Approx(std::log(9.0)));
  CHECK(control::transform(-0.9).eps == doctest::Approx(-std::log(9.0)));

  std::mt19937 rng(41);
  std::uniform_real_distribution<double> u(-0.999, -0.001);
  for (int trial = 0; trial < 200; ++trial) {
    double e1 = u(rng);
    double e2 = u(rng);
    if (e1 > e2) std::swap(e1, e2);
    if (e1 == e2) continue;
    CHECK(control::transform(e1).eps < control::transform(e2).eps);
    CHECK(control::transform(e1).jac >= 4.0);
  }

  CHECK(error_code([&] { control::transform(0.0); }) == "funnel_fault");
  CHECK(error_code([&] { control::transform(-1.0); }) == "funnel_fault");
}

TEST_CASE("control law: zero cases, direction, locality") {
  stl::PredicateTable table;
  table["goal1"] = ball({1}, {1.0}, vec2(0, 0), 9.0);
  table["rel12"] = ball({1, 2}, {1.0, -1.0}, vec2(0, 0), 16.0);

  const funnels::Ppf gamma{4.0, 2.0, 1.0};
  std::vector<control::TaskBinding> tasks;
  tasks.push_back(goal_task("goal1", 1, 5.0, gamma));
  auto rel = goal_task("rel12", 2, 8.0, gamma);
  rel.communicated = {1};
  tasks.push_back(rel);

  stl::AgentStates states;
  states[1] = vec2(2.2, 0.5);   // goal1 robustness 3.91, inside (1, 5)
  states[2] = vec2(-0.8, 1.5);  // rel12 robustness 6.00, inside (4, 8)
  observer::ObserverState no_estimates;
  control::Snapshot snap{&states, &no_estimates};
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(2, 2);

  // Agent 3 appears in no task body: zero input.
  stl::AgentStates with3 = states;
  with3[3] = vec2(9, 9);
  control::Snapshot snap3{&with3, &no_estimates};
  CHECK(control::control_input(3, tasks, snap3, table, identity, 0.0, 0,
                               nullptr)
            .norm() == doctest::Approx(0.0));

  // A task resting at the funnel center contributes nothing.
  stl::AgentStates centered;
  const double gamma0 = funnels::ppf_eval(gamma, 0.0);
  // Choose |x| so that rho = 9 - |x|^2 = rho_max - gamma0/2.
  const double want = 5.0 - gamma0 / 2.0;
  centered[1] = vec2(std::sqrt(9.0 - want), 0.0);
  control::Snapshot csnap{&centered, &no_estimates};
  const std::vector<control::TaskBinding> only_goal{tasks[0]};
  CHECK(control::control_input(1, only_goal, csnap, table, identity, 0.0, 0,
                               nullptr)
            .norm() == doctest::Approx(0.0).epsilon(1e-9));

  // Near violation the input pushes robustness uphill.
  stl::AgentStates far;
  far[1] = vec2(2.9, 0.0);  // rho = 9 - 8.41 = 0.59, e close to -1
  control::Snapshot fsnap{&far, &no_estimates};
  const auto u = control::control_input(1, only_goal, fsnap, table, identity,
                                        0.0, 0, nullptr);
  const auto grad = stl::grad_robustness(tasks[0].body, far, table, 1,
                                         stl::SmoothMinConfig{10.0});
  CHECK(u.dot(grad) > 0.0);

  // Manual expansion of the two-task sum for agent 1.
  const stl::SmoothMinConfig cfg{10.0};
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(2);
  for (const auto& task : tasks) {
    stl::AgentStates view = states;
    const double rho_hat = stl::eval_robustness(task.body, view, table, cfg);
    const double cap = funnels::capital_gamma(task.funnels, 0.0);
    const double e = (rho_hat - task.funnels.rho_max) / cap;
    const auto tr = control::transform(e);
    expect += stl::grad_robustness(task.body, view, table, 1, cfg) *
              (tr.jac * tr.eps / cap);
  }
  expect = -expect;
  const auto got = control::control_input(1, tasks, snap, table, identity, 0.0,
                                          0, nullptr);
  CHECK((got - expect).norm() == doctest::Approx(0.0).epsilon(1e-12));

  // Locality: a state change outside every reader set leaves u untouched.
  stl::AgentStates perturbed = with3;
  perturbed[3] = vec2(-7, 4);
  control::Snapshot psnap{&perturbed, &no_estimates};
  const auto u_before = control::control_input(1, tasks, snap3, table,
                                               identity, 0.0, 0, nullptr);
  const auto u_after = control::control_input(1, tasks, psnap, table, identity,
                                              0.0, 0, nullptr);
  CHECK(u_before == u_after);

  // Sign-based simplification replaces the g^T premultiplication.
  control::ControlOptions signed_mode;
  signed_mode.signed_mode = true;
  signed_mode.sign = 1.0;
  const auto u_signed = control::control_input(
      1, tasks, snap, table, 5.0 * identity, 0.0, 0, nullptr, signed_mode);
  CHECK((u_signed - expect).norm() == doctest::Approx(0.0).epsilon(1e-12));

  // Estimated readers require the matching estimate.
  auto needs_estimate = goal_task("rel12", 1, 8.0, gamma);
  needs_estimate.estimated = {2};
  const std::vector<control::TaskBinding> est_tasks{needs_estimate};
  CHECK(error_code([&] {
          control::control_input(1, est_tasks, snap, table, identity, 0.0, 0,
                                 nullptr);
        }) == "missing_estimate");
}
