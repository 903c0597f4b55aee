#include <doctest.h>

#include "optira/error.hpp"
#include "optira/extraction.hpp"
#include "optira/parse.hpp"

using namespace optira;

namespace {

std::string fenced(const std::string& s) { return "```json\n" + s + "\n```"; }

const char* kSets = R"j({"variables": [{"name": "p", "type": "continuous", "unit": "mW"}],
  "objective": {"sense": "minimize", "description": "power", "variables": ["p"]},
  "constraints": [{"variable": "p", "value": 20, "unit": "dBm", "source": "at least 20 dBm"}]})j";

const char* kModel = R"j({"variables": [{"name": "p", "type": "continuous", "lower": 0, "upper": null, "unit": "mW"}],
  "objective": {"sense": "minimize", "expr": "p"}, "constraints": ["p >= 100"]})j";

const char* kAgree = R"j({"xi1": true, "xi2": true, "explanations": {"xi1": "ok", "xi2": "ok"}})j";

MockBackend mock(std::vector<std::pair<Stage, std::string>> replies) {
  MockScript s;
  for (auto& [stage, text] : replies) s.entries.push_back({stage, "", text});
  return MockBackend(std::move(s));
}

ExtractionSets sets() { return sets_from_json(nlohmann::json::parse(kSets)); }

}  // namespace

TEST_SUITE("extraction") {

TEST_CASE("sets schema is strict") {
  const ExtractionSets s = sets();
  CHECK(s.E.size() == 1);
  CHECK(s.Rc[0].unit == "dBm");
  CHECK(sets_from_json(to_json(s)).E[0].name == "p");

  auto bad = [](const char* text) { return sets_from_json(nlohmann::json::parse(text)); };
  CHECK_THROWS_AS(bad(R"j({"variables": [], "objective": {"sense": "minimize", "description": "", "variables": []},
                          "constraints": [], "extra": 1})j"), SchemaError);
  CHECK_THROWS_AS(bad(R"j({"variables": [{"name": "p"}, {"name": "p"}],
                          "objective": {"sense": "minimize", "description": "", "variables": []}, "constraints": []})j"),
                  SchemaError);
  CHECK_THROWS_AS(bad(R"j({"variables": [{"name": "p"}], "objective": {"sense": "minimize", "description": "", "variables": []},
                          "constraints": [{"variable": "q", "value": 1, "unit": "", "source": ""}]})j"),
                  SchemaError);
  CHECK_THROWS_AS(bad(R"j({"variables": [{"name": "p", "type": "complex"}],
                          "objective": {"sense": "minimize", "description": "", "variables": []}, "constraints": []})j"),
                  SchemaError);
  CHECK_THROWS_AS(fenced_json("no block here"), SchemaError);
  CHECK_THROWS_AS(fenced_json("```\n{oops\n```"), SchemaError);
}

TEST_CASE("extraction retries once with a reformat prompt") {
  MockBackend m = mock({{Stage::Extract, fenced("{\"vars\": []}")}, {Stage::Reformat, fenced(kSets)}});
  Conversation c(m, "t");
  const ExtractionSets s = extract_sets("text", c);
  CHECK(s.E.size() == 1);
  REQUIRE(c.exchanges().size() == 2);
  CHECK(c.exchanges()[1].stage == Stage::Reformat);

  MockBackend twice = mock({{Stage::Extract, "nothing"}, {Stage::Reformat, "still nothing"}});
  Conversation c2(twice, "t");
  CHECK_THROWS_AS(extract_sets("text", c2), SchemaError);

  Conversation c3(m, "t");
  CHECK_THROWS_AS(extract_sets("  ", c3), InputError);
}

TEST_CASE("model construction with one repair") {
  MockBackend m = mock({{Stage::Model, fenced(R"j({"objective": {"sense": "minimize", "expr": "p +"}, "constraints": []})j")},
                        {Stage::RepairModel, fenced(kModel)}});
  Conversation c(m, "t");
  const StandardForm p = build_model(sets(), "text", c);
  CHECK(p.dimension() == 1);
  CHECK(p.m() == 1);

  MockBackend never = mock({{Stage::Model, fenced("{}")}, {Stage::RepairModel, fenced("{}")}});
  Conversation c2(never, "t");
  CHECK_THROWS_AS(build_model(sets(), "text", c2), ModelError);
}

TEST_CASE("proposal variables default to the extracted set") {
  const StandardForm p = model_from_proposal(
      nlohmann::json::parse(R"j({"objective": {"sense": "maximize", "expr": "log(1 + p)"}, "constraints": ["p <= 3"]})j"),
      sets(), {});
  CHECK(p.variables[0].name == "p");
  CHECK(p.metadata.maximize);
  CHECK_THROWS(model_from_proposal(
      nlohmann::json::parse(R"j({"objective": {"sense": "minimize", "expr": "q"}, "constraints": []})j"), sets(), {}));
}

TEST_CASE("type and value checks") {
  const ExtractionSets s = sets();
  std::string why;
  const StandardForm good = model_from_proposal(nlohmann::json::parse(kModel), s, {});
  CHECK(check_variable_types(good, s, why));
  CHECK(check_constraint_values(good, s, why));  // 20 dBm == 100 mW

  const StandardForm wrong_value = model_from_proposal(
      nlohmann::json::parse(R"j({"objective": {"sense": "minimize", "expr": "p"}, "constraints": ["p >= 20"]})j"), s, {});
  CHECK_FALSE(check_constraint_values(wrong_value, s, why));
  CHECK_FALSE(why.empty());

  ExtractionSets ints = s;
  ints.E[0].type = VarType::Integer;
  CHECK_FALSE(check_variable_types(good, ints, why));

  const StandardForm as_bound = model_from_proposal(
      nlohmann::json::parse(R"j({"variables": [{"name": "p", "lower": 100, "upper": null, "unit": "mW"}],
                                "objective": {"sense": "minimize", "expr": "p"}, "constraints": []})j"), s, {});
  CHECK(check_constraint_values(as_bound, s, why));
}

TEST_CASE("consistency combines all four checks") {
  const StandardForm good = model_from_proposal(nlohmann::json::parse(kModel), sets(), {});
  MockBackend m = mock({{Stage::Consistency, fenced(kAgree)},
                        {Stage::Consistency, fenced(R"j({"xi1": true, "xi2": false, "explanations": {}})j")}});
  Conversation c(m, "t");
  const ConsistencyReport a = validate_consistency(good, sets(), "text", c);
  CHECK(a.T == 1);
  CHECK((a.xi1 && a.xi2 && a.xi3 && a.xi4));
  const ConsistencyReport b = validate_consistency(good, sets(), "text", c);
  CHECK(b.T == 0);
  CHECK_FALSE(b.xi2);
  CHECK(b.xi4);
}

TEST_CASE("construct_model rebuilds while inconsistent") {
  const std::string wrong = R"j({"objective": {"sense": "minimize", "expr": "p"}, "constraints": ["p >= 20"]})j";
  MockBackend m = mock({{Stage::Extract, fenced(kSets)},
                        {Stage::Model, fenced(wrong)},
                        {Stage::Consistency, fenced(kAgree)},
                        {Stage::Model, fenced(kModel)},
                        {Stage::Consistency, fenced(kAgree)}});
  Conversation c(m, "t");
  const ConstructedModel cm = construct_model("text", c);
  CHECK(cm.rebuilds == 1);
  CHECK(cm.consistency.T == 1);
  // the rebuild prompt names the failing check
  bool mentioned = false;
  for (const Exchange& e : c.exchanges()) {
    if (e.stage == Stage::Model && e.prompt.find("xi4") != std::string::npos) mentioned = true;
  }
  CHECK(mentioned);

  MockScript stuck;
  stuck.policy = ExhaustionPolicy::RepeatLast;
  stuck.entries = {{Stage::Extract, "", fenced(kSets)}, {Stage::Model, "", fenced(wrong)},
                   {Stage::Consistency, "", fenced(kAgree)}};
  MockBackend sm(stuck);
  Conversation c2(sm, "t");
  const ConstructedModel bad = construct_model("text", c2);
  CHECK(bad.rebuilds == kMaxConsistencyRebuilds);
  CHECK(bad.consistency.T == 0);
}

}  // TEST_SUITE
