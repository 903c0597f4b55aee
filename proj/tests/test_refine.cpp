#include <doctest.h>

#include "optira/model_json.hpp"
#include "optira/refine.hpp"
#include "support.hpp"

using namespace optira;

namespace {

StandardForm problem(const char* doc) { return model_from_json(nlohmann::json::parse(doc)); }

const char* kBox = R"j({"variables": [{"name": "x", "lower": 0, "upper": 2}, {"name": "y", "lower": 0, "upper": 2}],
                       "objective": {"sense": "minimize", "expr": "x + y"},
                       "constraints": [{"expr": "1 - x", "relation": "<="}, {"expr": "x - y", "relation": "=="}]})j";

Eigen::VectorXd pt(double a, double b) { return Eigen::Vector2d(a, b); }

std::string doc() { return canonical_text(to_json(problem(kBox))); }

GeneratedCode broken(const std::string& body) {
  return {"# optira-script/1\n" + body, Target::Internal, doc(), Provenance::Llm};
}

MockBackend repairs(std::vector<std::string> replies, ExhaustionPolicy policy = ExhaustionPolicy::Error) {
  MockScript s;
  s.policy = policy;
  for (auto& r : replies) s.entries.push_back({Stage::RepairCode, "", "```\n" + r + "\n```"});
  return MockBackend(std::move(s));
}

/// Feasible only from the given iteration on.
class ScriptedResolver : public FdcResolver {
 public:
  ScriptedResolver(int feasible_at, Eigen::VectorXd good, Eigen::VectorXd bad)
      : feasible_at_(feasible_at), good_(std::move(good)), bad_(std::move(bad)) {}

  std::optional<Solution> adjust(const Eigen::VectorXd& x0, std::string&) override {
    calls.emplace_back("adjust", x0);
    return next();
  }
  std::optional<Solution> reanalyze(const Strategy& s, const Eigen::VectorXd& x0, std::string&) override {
    calls.emplace_back("reanalyze:" + s.label(), x0);
    return next();
  }

  std::vector<std::pair<std::string, Eigen::VectorXd>> calls;

 private:
  std::optional<Solution> next() {
    Solution s;
    s.status = SolveStatus::Optimal;
    s.x_star = static_cast<int>(calls.size()) >= feasible_at_ ? good_ : bad_;
    return s;
  }
  int feasible_at_;
  Eigen::VectorXd good_, bad_;
};

}  // namespace

TEST_SUITE("refine") {

TEST_CASE("feasibility gate reports every residual") {
  const StandardForm p = problem(kBox);
  const FeasibilityResult ok = validate_feasibility(p, pt(1, 1));
  CHECK(ok.V == 1);
  CHECK(ok.residuals.size() == 4);

  const FeasibilityResult near = validate_feasibility(p, pt(0.999, 0.999));
  CHECK(near.V == 0);
  CHECK(near.residuals[0].id == "g0");
  CHECK(near.residuals[0].value == doctest::Approx(1e-3));
  CHECK_FALSE(near.residuals[0].pass);

  CHECK(validate_feasibility(p, pt(1, 1 + 5e-7)).V == 1);  // equality within tolerance
  CHECK(validate_feasibility(p, pt(1, 1 + 5e-6)).V == 0);
  CHECK(validate_feasibility(p, pt(2.5, 2.5)).V == 0);     // outside the box
  CHECK_THROWS_AS(validate_feasibility(p, Eigen::VectorXd::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(validate_feasibility(p, pt(1, 1), 0.0), std::invalid_argument);
}

TEST_CASE("feasibility is monotone in the tolerance") {
  const StandardForm p = problem(kBox);
  test::ExprGen gen(5, p.variables);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd x = gen.point(-0.5, 2.5);
    int prev = 0;
    for (double eps : {1e-9, 1e-6, 1e-3, 1e-1, 1.0, 10.0}) {
      const int v = validate_feasibility(p, x, eps).V;
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("integrality and domain failures") {
  const StandardForm p = problem(R"j({"variables": [{"name": "n", "type": "integer", "lower": 0, "upper": 5},
                                                  {"name": "z", "lower": -1, "upper": 1}],
                                    "objective": {"sense": "minimize", "expr": "n"},
                                    "constraints": [{"expr": "-log(z)", "relation": "<="}]})j");
  CHECK(validate_feasibility(p, pt(2, 1)).V == 1);
  CHECK(validate_feasibility(p, pt(2.4, 1)).V == 0);
  const FeasibilityResult d = validate_feasibility(p, pt(2, -0.5));
  CHECK(d.V == 0);
  CHECK_FALSE(d.reason.empty());
}

TEST_CASE("ECL repairs on the second attempt") {
  MockBackend backend = repairs({"model $MODEL\nset tolerance = 1e-8\nsolve", "model $MODEL\nset tolerance 1e-8\nsolve"});
  Conversation conv(backend, "t");
  const GeneratedCode code = broken("model $MODEL\nset tolarance 1e-8\nsolve");
  const ExecutionOutcome first = execute(code, {});
  REQUIRE(first.Q == 0);
  const EclResult r = run_ecl(first, code, &conv, 4, {});
  CHECK(r.outcome.Q == 1);
  CHECK(r.state.k == 2);
  REQUIRE(r.state.history.size() == 2);
  CHECK(r.state.history[0].report.error_class == ErrorClass::MissingSymbol);
  CHECK(r.state.history[0].Q == 0);
  CHECK(r.state.history[1].report.error_class == ErrorClass::Syntax);
  CHECK(r.state.history[1].Q == 1);
  CHECK(conv.exchanges().size() == 2);
}

TEST_CASE("ECL stops at the cap") {
  MockBackend backend = repairs({"model $MODEL\nsolve now"}, ExhaustionPolicy::RepeatLast);
  Conversation conv(backend, "t");
  const GeneratedCode code = broken("model $MODEL\nsolve now");
  const EclResult r = run_ecl(execute(code, {}), code, &conv, 4, {});
  CHECK(r.outcome.Q == 0);
  CHECK(r.state.k == 4);
  CHECK(r.state.history.size() == 4);
  for (const EclEntry& e : r.state.history) CHECK(e.Q == 0);
}

TEST_CASE("ECL fixes schema and missing-model failures without the backend") {
  const GeneratedCode no_model = broken("set tolerance 1e-8\nsolve");
  const EclResult a = run_ecl(execute(no_model, {}), no_model, nullptr, 4, {});
  CHECK(a.outcome.Q == 1);
  CHECK(a.state.k == 1);
  CHECK(a.state.history[0].repair == "re-emitted model document");

  const GeneratedCode never = broken("model $MODEL");
  const EclResult b = run_ecl(execute(never, {}), never, nullptr, 4, {});
  CHECK(b.outcome.Q == 1);
  CHECK(b.code.provenance == Provenance::Template);
}

TEST_CASE("ECL preconditions") {
  const GeneratedCode good = broken("model $MODEL\nsolve");
  const ExecutionOutcome ok = execute(good, {});
  REQUIRE(ok.Q == 1);
  CHECK_THROWS_AS(run_ecl(ok, good, nullptr, 4, {}), std::invalid_argument);
  const GeneratedCode bad = broken("solv");
  CHECK_THROWS_AS(run_ecl(execute(bad, {}), bad, nullptr, 0, {}), std::invalid_argument);
}

TEST_CASE("ECL survives a backend failure") {
  MockBackend backend = repairs({});
  Conversation conv(backend, "t");
  const GeneratedCode code = broken("model $MODEL\nsolv");
  const EclResult r = run_ecl(execute(code, {}), code, &conv, 2, {});
  CHECK(r.outcome.Q == 0);
  CHECK(r.state.k == 2);
  CHECK(r.state.history[0].repair.find("backend repair failed") == 0);
}

TEST_CASE("FDC stage boundary sits at floor(L/2)") {
  for (int L = 1; L <= 10; ++L) {
    for (int l = 1; l <= L; ++l) {
      CHECK(fdc_stage(l, L) == (2 * l <= L ? FdcStage::Adjust : FdcStage::Reanalyze));
    }
  }
  CHECK(fdc_stage(2, 5) == FdcStage::Adjust);
  CHECK(fdc_stage(3, 5) == FdcStage::Reanalyze);
  CHECK(fdc_stage(1, 1) == FdcStage::Reanalyze);
  CHECK_THROWS_AS(fdc_stage(0, 5), std::invalid_argument);
  CHECK_THROWS_AS(fdc_stage(6, 5), std::invalid_argument);
}

TEST_CASE("FDC adjusts the start point towards the box center") {
  const StandardForm p = problem(kBox);
  const ConvexityReport r = analyze_problem(p);
  Solution first;
  first.x_star = pt(0.5, 0.5);
  ScriptedResolver resolver(1, pt(1, 1), pt(0.5, 0.5));
  const FdcResult res = run_fdc(p, r, first, 5, 0.25, std::nullopt, resolver);
  REQUIRE(res.solution.has_value());
  CHECK(res.state.l == 1);
  CHECK(res.feasibility.V == 1);
  REQUIRE(resolver.calls.size() == 1);
  CHECK(resolver.calls[0].first == "adjust");
  // x0 = x* + gamma (center - x*) = 0.5 + 0.25 * 0.5
  CHECK(resolver.calls[0].second[0] == doctest::Approx(0.625));
}

TEST_CASE("FDC exhausts both stages") {
  const StandardForm p = problem(kBox);
  const ConvexityReport r = analyze_problem(p);
  Solution first;
  first.x_star = pt(0.5, 0.5);
  ScriptedResolver resolver(99, pt(1, 1), pt(0.5, 0.5));
  const FdcResult res = run_fdc(p, r, first, 5, 0.25, std::nullopt, resolver);
  CHECK_FALSE(res.solution.has_value());
  CHECK(res.state.l == 5);
  REQUIRE(res.state.history.size() == 5);
  for (int l = 0; l < 5; ++l) {
    CHECK(res.state.history[static_cast<std::size_t>(l)].stage == (l < 2 ? FdcStage::Adjust : FdcStage::Reanalyze));
    CHECK(res.state.history[static_cast<std::size_t>(l)].V == 0);
  }
  CHECK(resolver.calls[0].first == "adjust");
  CHECK(resolver.calls[2].first.rfind("reanalyze:", 0) == 0);
  CHECK(res.state.x0.isApprox(resolver.calls[1].second));  // reanalyze keeps the last adjusted start
}

TEST_CASE("FDC preconditions") {
  const StandardForm p = problem(kBox);
  const ConvexityReport r = analyze_problem(p);
  Solution feasible;
  feasible.x_star = pt(1, 1);
  ScriptedResolver resolver(1, pt(1, 1), pt(1, 1));
  CHECK_THROWS_AS(run_fdc(p, r, feasible, 5, 0.25, std::nullopt, resolver), std::invalid_argument);
  Solution bad;
  bad.x_star = pt(0, 0);
  CHECK_THROWS_AS(run_fdc(p, r, bad, 0, 0.25, std::nullopt, resolver), std::invalid_argument);
  CHECK_THROWS_AS(run_fdc(p, r, bad, 5, 0.0, std::nullopt, resolver), std::invalid_argument);
}

}  // TEST_SUITE
