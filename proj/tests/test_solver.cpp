#include <doctest.h>

#include "optira/error.hpp"
#include "optira/model_json.hpp"
#include "optira/solver.hpp"
#include "support.hpp"

using namespace optira;

namespace {

StandardForm problem(const char* doc) { return model_from_json(nlohmann::json::parse(doc)); }

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

}  // namespace

TEST_SUITE("solve-core") {

TEST_CASE("bound-constrained quadratic") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x", "lower": -2, "upper": 2}],
                                    "objective": {"sense": "minimize", "expr": "x^2"},
                                    "constraints": [{"expr": "1 - x", "relation": "<="}]})j");
  const Solution s = solve_convex(p, vec({1.5}));
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(s.x_star[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-6));
  REQUIRE(s.inequality_multipliers.size() == 1);
  CHECK(s.inequality_multipliers[0] == doctest::Approx(2.0).epsilon(1e-4));  // d/dx x^2 at 1
}

TEST_CASE("cubic on a box reaches the interior minimum") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x", "lower": 0, "upper": 2}],
                                    "objective": {"sense": "minimize", "expr": "x^3 - 3*x"}, "constraints": []})j");
  const Solution s = solve_convex(p, vec({0.2}));
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(s.x_star[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(s.objective == doctest::Approx(-2.0).epsilon(1e-3));
}

TEST_CASE("equality constraints through the augmented Lagrangian") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x1"}, {"name": "x2"}],
                                    "objective": {"sense": "minimize", "expr": "x1^2 + x2^2"},
                                    "constraints": [{"expr": "x1 + x2 - 1", "relation": "=="}]})j");
  const Solution s = solve_convex(p, vec({0, 0}));
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(s.x_star[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(std::abs(s.x_star.sum() - 1.0) < 1e-8);
  CHECK(s.equality_multipliers.size() == 1);
}

TEST_CASE("infeasible start goes through phase one") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x", "lower": -10, "upper": 10}],
                                    "objective": {"sense": "minimize", "expr": "(x - 3)^2"},
                                    "constraints": [{"expr": "x - 1", "relation": "<="}]})j");
  const Solution s = solve_convex(p, vec({5.0}));
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(s.x_star[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("an empty feasible set is reported, not thrown") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x", "lower": 0, "upper": 1}],
                                    "objective": {"sense": "minimize", "expr": "x"},
                                    "constraints": [{"expr": "2 - x", "relation": "<="}]})j");
  const Solution s = solve_convex(p, vec({0.5}));
  CHECK(s.status == SolveStatus::InfeasibleSubproblem);
}

TEST_CASE("non-convex input is rejected") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x", "lower": -1, "upper": 1}],
                                    "objective": {"sense": "minimize", "expr": "-x^2"}, "constraints": []})j");
  CHECK_THROWS_AS(solve_convex(p, vec({0.0})), SolverRejection);
}

TEST_CASE("an expired deadline throws") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x"}],
                                    "objective": {"sense": "minimize", "expr": "(x - 1)^2"}, "constraints": []})j");
  SolverOptions o;
  o.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
  CHECK_THROWS_AS(solve_convex(p, vec({0.0}), o), TimeoutError);
}

TEST_CASE("options are validated") {
  SolverOptions o;
  o.damping = 1.5;
  CHECK_THROWS_AS(o.validate(), InputError);
  o = {};
  o.tolerance = 0;
  CHECK_THROWS_AS(o.validate(), InputError);
}

TEST_CASE("SCA loop settles on the bilinear problem") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x1", "lower": 0.1, "upper": 2},
                                                  {"name": "x2", "lower": 0.1, "upper": 2}],
                                    "objective": {"sense": "minimize", "expr": "x1 + x2"},
                                    "constraints": [{"expr": "1 - x1*x2", "relation": "<="}]})j");
  const ConvexityReport r = analyze_problem(p);
  const Solution s = sca_loop(p, r, select_strategy(r, 0), vec({1.5, 1.5}));
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(s.objective == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(test::worst_residual(p, s.x_star) <= 1e-6);
  CHECK(s.outer_iterations == static_cast<int>(s.objective_trace.size()));
  CHECK(s.objective_trace.size() == s.surrogate_trace.size());
}

TEST_CASE("SCA on a non-convex objective") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x1", "lower": 0, "upper": 1},
                                                  {"name": "x2", "lower": 0, "upper": 1}],
                                    "objective": {"sense": "maximize",
                                                  "expr": "log(1 + x1/(0.1 + 0.5*x2)) + log(1 + x2/(0.1 + 0.5*x1))"},
                                    "constraints": []})j");
  const ConvexityReport r = analyze_problem(p);
  CHECK_FALSE(r.problem_convex);
  const Solution s = sca_loop(p, r, select_strategy(r, 0), vec({0.5, 0.5}));
  CHECK((s.status == SolveStatus::Optimal || s.status == SolveStatus::MaxIter));
  // both links at full power beats any single link: 2 log(1 + 1/0.6)
  CHECK(-s.objective >= 2 * std::log(1 + 1 / 0.6) - 1e-4);
}

}  // TEST_SUITE
