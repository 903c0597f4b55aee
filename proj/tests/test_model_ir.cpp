#include <doctest.h>

#include "optira/differentiate.hpp"
#include "optira/error.hpp"
#include "optira/model_json.hpp"
#include "optira/parse.hpp"
#include "optira/units.hpp"
#include "support.hpp"

using namespace optira;

namespace {
std::vector<Variable> xy() { return {make_variable("x"), make_variable("y")}; }
Eigen::VectorXd pt(double a, double b) { return Eigen::Vector2d(a, b); }
}  // namespace

TEST_SUITE("model-ir") {

TEST_CASE("parser respects precedence and associativity") {
  const auto v = xy();
  CHECK(evaluate(parse_expression("1 + 2*x^2", v), pt(3, 0)) == doctest::Approx(19));
  CHECK(evaluate(parse_expression("-x^2", v), pt(3, 0)) == doctest::Approx(-9));
  CHECK(evaluate(parse_expression("x - y - 1", v), pt(5, 2)) == doctest::Approx(2));
  CHECK(evaluate(parse_expression("x / y / 2", v), pt(8, 2)) == doctest::Approx(2));
  CHECK(evaluate(parse_expression("pow(x, 3) + max(x, y, 7)", v), pt(2, 1)) == doctest::Approx(15));
  CHECK(evaluate(parse_expression("inv_pos(x) + square(y) + abs(-y)", v), pt(4, -3)) == doctest::Approx(12.25));
}

TEST_CASE("printing round-trips through the parser") {
  const auto v = xy();
  test::ExprGen gen(7, v);
  for (int i = 0; i < 200; ++i) {
    const Expr e = gen(3);
    const Expr back = parse_expression(to_string(e), v);
    CHECK_MESSAGE(back == e, to_string(e));
  }
}

TEST_CASE("parse errors carry the byte offset") {
  const auto v = xy();
  try {
    parse_expression("x + * y", v);
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
  CHECK_THROWS_AS(parse_expression("z + 1", v), ParseError);
  CHECK_THROWS_AS(parse_expression("foo(x)", v), ParseError);
  CHECK_THROWS_AS(parse_expression("x ^ y", v), ParseError);
  CHECK_THROWS_AS(parse_expression("log(x", v), ParseError);
}

TEST_CASE("evaluation outside the domain throws") {
  const auto v = xy();
  CHECK_THROWS_AS(evaluate(parse_expression("log(x)", v), pt(0, 0)), DomainError);
  CHECK_THROWS_AS(evaluate(parse_expression("sqrt(x)", v), pt(-1, 0)), DomainError);
  CHECK_THROWS_AS(evaluate(parse_expression("x / y", v), pt(1, 0)), DomainError);
  CHECK_THROWS_AS(evaluate(parse_expression("x^0.5", v), pt(-1, 0)), DomainError);
  CHECK_THROWS_AS(evaluate(parse_expression("inv_pos(x)", v), pt(0, 0)), DomainError);
  Eigen::VectorXd short_point(1);
  short_point << 1.0;
  CHECK_THROWS_AS(evaluate(parse_expression("x + y", v), short_point), ModelError);
}

TEST_CASE("derivatives of the atoms") {
  const auto v = xy();
  auto d = [&](const char* text, double x, double y, int i) {
    return evaluate(differentiate(parse_expression(text, v), i), pt(x, y));
  };
  CHECK(d("x*y", 2, 3, 0) == doctest::Approx(3));
  CHECK(d("log(1 + x)", 1, 0, 0) == doctest::Approx(0.5));
  CHECK(d("exp(2*x)", 0, 0, 0) == doctest::Approx(2));
  CHECK(d("sqrt(x)", 4, 0, 0) == doctest::Approx(0.25));
  CHECK(d("x / y", 1, 2, 1) == doctest::Approx(-0.25));
  CHECK(d("inv_pos(x)", 2, 0, 0) == doctest::Approx(-0.25));
  CHECK(d("abs(x)", 0, 0, 0) == 0.0);
  CHECK(d("max(x, y)", 1, 1, 0) == doctest::Approx(0.5));
  CHECK(d("x^3", 2, 0, 0) == doctest::Approx(12));
  CHECK(d("y", 2, 0, 0) == 0.0);
}

TEST_CASE("compiled function matches symbolic derivatives") {
  const auto v = xy();
  const Expr e = parse_expression("x^2*y + exp(y)", v);
  CompiledFunction f(e, 2);
  const Eigen::VectorXd x = pt(1.5, -0.5);
  CHECK(f.value(x) == doctest::Approx(evaluate(e, x)));
  CHECK(f.gradient(x)[0] == doctest::Approx(2 * 1.5 * -0.5));
  CHECK(f.gradient(x)[1] == doctest::Approx(1.5 * 1.5 + std::exp(-0.5)));
  const Eigen::MatrixXd H = f.hessian(x);
  CHECK(H(0, 0) == doctest::Approx(-1.0));
  CHECK(H(0, 1) == doctest::Approx(3.0));
  CHECK(H(1, 0) == doctest::Approx(3.0));
  CHECK(H(1, 1) == doctest::Approx(std::exp(-0.5)));
  CompiledFunction g(e, 2, false);
  CHECK_THROWS_AS(g.hessian(x), std::logic_error);
}

TEST_CASE("canonicalization to standard form") {
  const auto v = xy();
  std::vector<RawConstraint> raw{parse_relation("x + y >= 1", v), parse_relation("x <= 3", v),
                                 parse_relation("x - y = 0", v)};
  const StandardForm p = canonicalize(Sense::Maximize, parse_expression("x + 2*y", v), raw, v);
  CHECK(p.metadata.maximize);
  CHECK(p.m() == 2);
  CHECK(p.n() == 1);
  CHECK(evaluate(p.objective, pt(1, 1)) == doctest::Approx(-3));
  CHECK(evaluate(p.inequalities[0].lhs, pt(0.25, 0.25)) == doctest::Approx(0.5));
  CHECK(evaluate(p.inequalities[1].lhs, pt(4, 0)) == doctest::Approx(1));
  CHECK_THROWS_AS(canonicalize(Sense::Minimize, parse_expression("x", v), {parse_relation("x < 1", v)}, v),
                  ModelError);
}

TEST_CASE("variable declarations are validated") {
  CHECK_THROWS_AS(make_variable("x", VarType::Continuous, 2, 1), ModelError);
  const Variable b = make_variable("b", VarType::Binary);
  CHECK(b.lower == 0.0);
  CHECK(b.upper == 1.0);
  CHECK(make_variable("c", VarType::Binary, -3, 2).upper == 1.0);  // clipped to {0, 1}
  CHECK_THROWS_AS(make_variable("d", VarType::Binary, 2, 3), ModelError);
}

TEST_CASE("model documents round-trip") {
  const nlohmann::json doc = nlohmann::json::parse(R"j({
    "variables": [{"name": "p", "type": "continuous", "lower": 0, "upper": null, "unit": "W"},
                  {"name": "n", "type": "integer", "lower": 0, "upper": 4}],
    "objective": {"sense": "maximize", "expr": "log(1 + p) + n"},
    "constraints": [{"expr": "p + n - 3", "relation": "<="}, {"expr": "p - 1", "relation": "=="}]})j");
  const StandardForm p = model_from_json(doc);
  CHECK(p.metadata.maximize);
  CHECK(p.variables[1].type == VarType::Integer);
  CHECK(std::isinf(p.variables[0].upper));
  const StandardForm q = model_from_json(to_json(p));
  CHECK(canonical_text(to_json(q)) == canonical_text(to_json(p)));
  CHECK(q.metadata.maximize);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(R"j({"variables": []})j")), SchemaError);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(
                      R"j({"variables": [{"name": "x"}], "objective": {"sense": "up", "expr": "x"}})j")),
                  SchemaError);
}

TEST_CASE("unit conversion") {
  CHECK(*convert_unit(20, "dBm", "mW") == doctest::Approx(100));
  CHECK(*convert_unit(1, "W", "dBm") == doctest::Approx(30));
  CHECK(*convert_unit(2, "MHz", "kHz") == doctest::Approx(2000));
  CHECK(*convert_unit(5, "ms", "s") == doctest::Approx(0.005));
  CHECK(*convert_unit(3, "", "") == 3);
  CHECK_FALSE(convert_unit(1, "W", "Hz"));
  CHECK_FALSE(convert_unit(1, "furlong", "W"));
  CHECK(known_unit("GHz"));
}

}  // TEST_SUITE
