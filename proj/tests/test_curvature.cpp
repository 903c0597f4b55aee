#include <doctest.h>

#include "optira/convexify.hpp"
#include "optira/curvature.hpp"
#include "optira/differentiate.hpp"
#include "optira/interval.hpp"
#include "optira/model_json.hpp"
#include "optira/parse.hpp"
#include "support.hpp"

using namespace optira;

namespace {

std::vector<Variable> pos2() { return test::box_variables(2, 0.1, 2.0); }

CurvatureResult label(const char* text, const std::vector<Variable>& v) {
  const std::vector<Interval> box = variable_intervals(v);
  return curvature_of(parse_expression(text, v), box);
}

StandardForm problem(const char* doc) { return model_from_json(nlohmann::json::parse(doc)); }

}  // namespace

TEST_SUITE("curvature") {

TEST_CASE("composition rules") {
  const auto v = pos2();
  CHECK(label("x1^2 + exp(x2)", v).curvature == Curvature::Convex);
  CHECK(label("log(x1) + sqrt(x2)", v).curvature == Curvature::Concave);
  CHECK(label("3*x1 - x2 + 1", v).curvature == Curvature::Affine);
  CHECK(label("7", v).curvature == Curvature::Constant);
  CHECK(label("-log(1 + x1)", v).curvature == Curvature::Convex);
  CHECK(label("inv_pos(x1)", v).curvature == Curvature::Convex);
  CHECK(label("max(x1^2, x2)", v).curvature == Curvature::Convex);
  CHECK(label("min(log(x1), x2)", v).curvature == Curvature::Concave);
  CHECK(label("abs(x1 - x2)", v).curvature == Curvature::Convex);
}

TEST_CASE("bilinear terms are not convex") {
  const auto v = pos2();
  const CurvatureResult r = label("x1*x2", v);
  CHECK_FALSE(is_convex(r.curvature));
  CHECK_FALSE(r.reason.empty());
}

TEST_CASE("sign tracking decides even and odd powers") {
  const auto v = pos2();
  CHECK(label("x1^3", v).curvature == Curvature::Convex);
  CHECK(label("x1", v).sign == Sign::Nonneg);
  const auto free = test::box_variables(1, -1.0, 1.0);
  CHECK(label("x1^3", free).curvature != Curvature::Convex);
}

TEST_CASE("cubic minus linear is convex on a nonnegative box") {
  const auto v = test::box_variables(1, 0.0, 2.0);
  const CurvatureResult r = label("x1^3 - 3*x1", v);
  CHECK(is_convex(r.curvature));
}

TEST_CASE("problem analysis lists the offenders") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x1", "lower": 0.1, "upper": 2},
                                                  {"name": "x2", "lower": 0.1, "upper": 2}],
                                    "objective": {"sense": "minimize", "expr": "x1 + x2"},
                                    "constraints": [{"expr": "1 - x1*x2", "relation": "<="},
                                                    {"expr": "x1^2 - 1", "relation": "=="}]})j");
  const ConvexityReport r = analyze_problem(p);
  CHECK_FALSE(r.problem_convex);
  REQUIRE(r.offenders.size() == 2);
  CHECK(r.offenders[0].location.kind == ComponentKind::Inequality);
  CHECK(r.offenders[1].location.kind == ComponentKind::Equality);
}

TEST_CASE("integer variables make a problem non-convex") {
  const StandardForm p = problem(R"j({"variables": [{"name": "b", "type": "binary"}],
                                    "objective": {"sense": "maximize", "expr": "b"}, "constraints": []})j");
  const ConvexityReport r = analyze_problem(p);
  CHECK_FALSE(r.problem_convex);
  REQUIRE(r.offenders.size() == 1);
  CHECK(r.offenders[0].location.kind == ComponentKind::VariableType);
}

TEST_CASE("proven labels pass Jensen checks on random expressions") {
  const auto v = test::box_variables(2, -2.0, 2.0);
  const std::vector<Interval> box = variable_intervals(v);
  test::ExprGen gen(11, v);
  std::uniform_real_distribution<double> lam(0.0, 1.0);
  int proven = 0;
  for (int i = 0; i < 300; ++i) {
    const Expr e = gen(3);
    const CurvatureResult c = curvature_of(e, box);
    if (c.sampled || c.curvature == Curvature::Unknown) continue;
    ++proven;
    for (int s = 0; s < 50; ++s) {
      const Eigen::VectorXd a = gen.point(-2, 2), b = gen.point(-2, 2);
      const double l = lam(gen.rng());
      const double mid = evaluate(e, (l * a + (1 - l) * b).eval());
      const double chord = l * evaluate(e, a) + (1 - l) * evaluate(e, b);
      const double slack = 1e-9 * (1 + std::abs(chord));
      if (is_convex(c.curvature)) CHECK_MESSAGE(mid <= chord + slack, to_string(e));
      if (is_concave(c.curvature)) CHECK_MESSAGE(mid >= chord - slack, to_string(e));
    }
  }
  CHECK(proven > 50);
}

}  // TEST_SUITE

TEST_SUITE("convexify") {

TEST_CASE("SCA surrogate is tangent at the anchor") {
  const auto v = pos2();
  const Expr e = parse_expression("x1*x2 + log(x1)", v);
  const Eigen::Vector2d a(0.7, 1.3);
  const Expr s = sca_surrogate(e, a);
  CHECK(evaluate(s, Eigen::VectorXd(a)) == doctest::Approx(evaluate(e, Eigen::VectorXd(a))).epsilon(1e-12));
  for (int i = 0; i < 2; ++i) {
    CHECK(evaluate(differentiate(s, i), Eigen::VectorXd(a)) ==
          doctest::Approx(evaluate(differentiate(e, i), Eigen::VectorXd(a))).epsilon(1e-12));
  }
  CHECK(is_affine(curvature_of(s, variable_intervals(v)).curvature));
  CHECK_THROWS_AS(sca_surrogate(parse_expression("log(x1 - 1)", v), Eigen::Vector2d(0.5, 0.5)), DomainError);
}

TEST_CASE("first-order surrogate over-estimates a concave function") {
  const auto v = pos2();
  const Expr e = parse_expression("log(x1) + sqrt(x2)", v);
  const Expr s = sca_surrogate(e, Eigen::Vector2d(1.0, 1.0));
  test::ExprGen gen(3, v);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd x = gen.point(0.1, 2.0);
    CHECK(evaluate(s, x) >= evaluate(e, x) - 1e-12);
  }
}

TEST_CASE("convexify produces a convex surrogate and a mapping") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x1", "lower": 0.1, "upper": 2},
                                                  {"name": "x2", "lower": 0.1, "upper": 2}],
                                    "objective": {"sense": "minimize", "expr": "x1 + x2"},
                                    "constraints": [{"expr": "1 - x1*x2", "relation": "<="}]})j");
  const ConvexityReport r = analyze_problem(p);
  const ConvexifiedProblem cp = convexify(p, r, select_strategy(r, 0), Eigen::Vector2d(1.0, 1.0));
  CHECK(analyze_problem(cp.surrogate).problem_convex);
  CHECK(cp.linearized == 1);
  CHECK(cp.mapping.size() == 2);
  CHECK(cp.anchor.isApprox(Eigen::Vector2d(1.0, 1.0)));
  CHECK_THROWS_AS(convexify(cp.surrogate, analyze_problem(cp.surrogate), select_strategy(r, 0)),
                  ConvexificationError);
}

TEST_CASE("continuous relaxation drops integrality") {
  const StandardForm p = problem(R"j({"variables": [{"name": "b1", "type": "binary"}, {"name": "b2", "type": "binary"}],
                                    "objective": {"sense": "maximize", "expr": "b1 + b2"},
                                    "constraints": [{"expr": "b1 + b2 - 1.5", "relation": "<="}]})j");
  const ConvexityReport r = analyze_problem(p);
  const Strategy s = select_strategy(r, 0);
  CHECK(s.uses(StrategyKind::ContinuousRelaxation));
  const ConvexifiedProblem cp = convexify(p, r, s);
  for (const Variable& var : cp.surrogate.variables) CHECK(var.type == VarType::Continuous);
  CHECK(analyze_problem(cp.surrogate).problem_convex);
}

TEST_CASE("Lagrangian strategy moves offending inequalities into the objective") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x1", "lower": 0.1, "upper": 2},
                                                  {"name": "x2", "lower": 0.1, "upper": 2}],
                                    "objective": {"sense": "minimize", "expr": "x1 + x2"},
                                    "constraints": [{"expr": "1 - x1*x2", "relation": "<="},
                                                    {"expr": "x1 - 1.5", "relation": "<="}]})j");
  const ConvexityReport r = analyze_problem(p);
  const Strategy s = select_strategy(r, 2);
  CHECK(s.uses(StrategyKind::Lagrangian));
  CHECK(s.multipliers.at(0) == 1.0);
  const ConvexifiedProblem cp = convexify(p, r, s, Eigen::Vector2d(1.0, 1.0));
  CHECK(cp.surrogate.m() == 1);
  CHECK(analyze_problem(cp.surrogate).problem_convex);
}

TEST_CASE("strategy schedule cycles and perturbs") {
  const StandardForm p = problem(R"j({"variables": [{"name": "x1", "lower": 0, "upper": 2},
                                                  {"name": "x2", "lower": 0, "upper": 2}],
                                    "objective": {"sense": "minimize", "expr": "x1*x2"}, "constraints": []})j");
  const ConvexityReport r = analyze_problem(p);
  CHECK(select_strategy(r, 0).anchor_policy == AnchorPolicy::Start);
  CHECK(select_strategy(r, 1).anchor_policy == AnchorPolicy::BoxCenter);
  CHECK(select_strategy(r, 2).uses(StrategyKind::Lagrangian));
  CHECK(select_strategy(r, 2).multipliers.empty());  // no offending inequality
  CHECK(select_strategy(r, 3).anchor_policy == AnchorPolicy::Perturbed);
  const Eigen::VectorXd a3 = resolve_anchor(select_strategy(r, 3), p, Eigen::Vector2d(0, 0));
  const Eigen::VectorXd a4 = resolve_anchor(select_strategy(r, 4), p, Eigen::Vector2d(0, 0));
  CHECK_FALSE(a3.isApprox(a4));
  for (int i = 0; i < 2; ++i) {
    CHECK(a3[i] >= 0.0);
    CHECK(a3[i] <= 2.0);
  }
  const Strategy back = strategy_from_json(to_json(select_strategy(r, 4)));
  CHECK(back.label() == select_strategy(r, 4).label());
}

}  // TEST_SUITE
