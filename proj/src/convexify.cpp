#include "optira/convexify.hpp"

#include <algorithm>
#include <sstream>

#include "optira/differentiate.hpp"
#include "optira/parse.hpp"

namespace optira {

std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::SCA: return "sca";
    case StrategyKind::Lagrangian: return "lagrangian";
    case StrategyKind::ContinuousRelaxation: return "continuous-relaxation";
    case StrategyKind::Composite: return "composite";
  }
  return "?";
}

std::string_view to_string(AnchorPolicy a) {
  switch (a) {
    case AnchorPolicy::Start: return "start";
    case AnchorPolicy::BoxCenter: return "box-center";
    case AnchorPolicy::Perturbed: return "perturbed";
  }
  return "?";
}

namespace {
StrategyKind parse_kind(const std::string& s) {
  for (StrategyKind k : {StrategyKind::SCA, StrategyKind::Lagrangian,
                         StrategyKind::ContinuousRelaxation, StrategyKind::Composite}) {
    if (to_string(k) == s) return k;
  }
  throw SchemaError("unknown strategy kind '" + s + "'");
}

AnchorPolicy parse_policy(const std::string& s) {
  for (AnchorPolicy a : {AnchorPolicy::Start, AnchorPolicy::BoxCenter, AnchorPolicy::Perturbed}) {
    if (to_string(a) == s) return a;
  }
  throw SchemaError("unknown anchor policy '" + s + "'");
}
}  // namespace

bool Strategy::uses(StrategyKind k) const {
  return kind == k || std::find(parts.begin(), parts.end(), k) != parts.end();
}

std::string Strategy::label() const {
  std::string out;
  if (kind == StrategyKind::Composite) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i > 0) out += "+";
      out += to_string(parts[i]);
    }
  } else {
    out = to_string(kind);
  }
  if (uses(StrategyKind::SCA) || uses(StrategyKind::Lagrangian)) {
    out += "@";
    out += to_string(anchor_policy);
    if (anchor_policy == AnchorPolicy::Perturbed) out += std::to_string(perturbation);
  }
  return out;
}

nlohmann::json to_json(const Strategy& s) {
  nlohmann::json doc;
  doc["kind"] = to_string(s.kind);
  doc["parts"] = nlohmann::json::array();
  for (StrategyKind k : s.parts) doc["parts"].push_back(to_string(k));
  doc["multipliers"] = nlohmann::json::object();
  for (const auto& [i, lambda] : s.multipliers) doc["multipliers"][std::to_string(i)] = lambda;
  doc["anchor_policy"] = to_string(s.anchor_policy);
  doc["perturbation"] = s.perturbation;
  if (s.anchor) {
    doc["anchor"] = std::vector<double>(s.anchor->data(), s.anchor->data() + s.anchor->size());
  } else {
    doc["anchor"] = nullptr;
  }
  return doc;
}

Strategy strategy_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("strategy must be an object");
  Strategy s;
  s.kind = parse_kind(doc.value("kind", std::string("sca")));
  for (const auto& p : doc.value("parts", nlohmann::json::array())) {
    s.parts.push_back(parse_kind(p.get<std::string>()));
  }
  for (const auto& [key, value] : doc.value("multipliers", nlohmann::json::object()).items()) {
    const double lambda = value.get<double>();
    if (lambda < 0) throw SchemaError("negative Lagrangian multiplier");
    s.multipliers[std::stoul(key)] = lambda;
  }
  s.anchor_policy = parse_policy(doc.value("anchor_policy", std::string("start")));
  s.perturbation = doc.value("perturbation", 0);
  if (doc.contains("anchor") && doc["anchor"].is_array()) {
    const auto values = doc["anchor"].get<std::vector<double>>();
    s.anchor = Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
  }
  return s;
}

Eigen::VectorXd resolve_anchor(const Strategy& s, const StandardForm& p,
                               const Eigen::VectorXd& start) {
  if (s.anchor) return project_to_box(p, *s.anchor);
  switch (s.anchor_policy) {
    case AnchorPolicy::Start:
      return project_to_box(p, start.size() == static_cast<Eigen::Index>(p.dimension())
                                   ? start
                                   : box_center(p));
    case AnchorPolicy::BoxCenter:
      return box_center(p);
    case AnchorPolicy::Perturbed: {
      Eigen::VectorXd a = box_center(p);
      const double fraction = 0.1 * (1 + s.perturbation % 3);
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        const Variable& v = p.variables[i];
        const double width =
            std::isfinite(v.lower) && std::isfinite(v.upper) ? v.upper - v.lower : 1.0;
        const double direction = (i + s.perturbation) % 2 == 0 ? 1.0 : -1.0;
        a[i] += direction * fraction * width;
      }
      return project_to_box(p, a);
    }
  }
  return box_center(p);
}

Expr sca_surrogate(const Expr& e, const Eigen::VectorXd& anchor) {
  const double f0 = evaluate(e, anchor);
  if (!std::isfinite(f0)) throw DomainError("surrogate anchor value is not finite");
  std::vector<Expr> terms{constant(f0)};
  std::map<int, std::string> names;
  std::vector<const Expr*> stack{&e};
  while (!stack.empty()) {
    const Expr* n = stack.back();
    stack.pop_back();
    if (n->op() == Op::Variable) names.emplace(n->index(), n->name());
    for (const Expr& a : n->args()) stack.push_back(&a);
  }
  for (const auto& [index, name] : names) {
    const double g = evaluate(differentiate(e, index), anchor);
    if (!std::isfinite(g)) throw DomainError("surrogate gradient is not finite at the anchor");
    if (g == 0.0) continue;
    terms.push_back(product({constant(g), sum({variable(index, name), constant(-anchor[index])})}));
  }
  return sum(std::move(terms));
}

namespace {

/// Replaces the offending terms of one component by their surrogates.
/// Returns the number of linearized sub-expressions.
int linearize_component(Expr& component, const std::vector<Expr>& offending,
                        const Eigen::VectorXd& anchor, std::string& transform) {
  if (offending.empty()) return 0;
  std::vector<Expr> terms = additive_terms(component);
  std::vector<bool> replaced(terms.size(), false);
  int count = 0;
  bool whole = false;
  for (const Expr& off : offending) {
    if (off == component) {
      whole = true;
      break;
    }
    bool found = false;
    for (std::size_t t = 0; t < terms.size(); ++t) {
      if (!replaced[t] && terms[t] == off) {
        terms[t] = sca_surrogate(off, anchor);
        replaced[t] = true;
        found = true;
        ++count;
        break;
      }
    }
    if (!found) {
      whole = true;
      break;
    }
  }
  if (whole) {
    component = sca_surrogate(component, anchor);
    transform = "linearized";
    return 1;
  }
  component = sum(std::move(terms));
  transform = "partially linearized";
  return count;
}

std::vector<Expr> offenders_at(const std::vector<Offender>& offenders, Location loc) {
  std::vector<Expr> out;
  for (const Offender& o : offenders) {
    if (o.location == loc) out.push_back(o.expression);
  }
  return out;
}

}  // namespace

ConvexifiedProblem convexify(const StandardForm& p, const ConvexityReport& report,
                             const Strategy& strategy, const Eigen::VectorXd& start) {
  const bool relax = strategy.uses(StrategyKind::ContinuousRelaxation);
  if (report.offenders.empty() && !(relax && p.has_integer_variables())) {
    throw ConvexificationError("nothing to convexify: the report lists no offenders");
  }
  for (const auto& [i, lambda] : strategy.multipliers) {
    if (lambda < 0) throw ConvexificationError("Lagrangian multipliers must be nonnegative");
  }

  ConvexifiedProblem out;
  out.strategy = strategy;
  out.anchor = resolve_anchor(strategy, p, start);
  StandardForm q = p;

  if (relax) {
    for (Variable& v : q.variables) v.type = VarType::Continuous;
  }

  std::vector<Offender> targets = report.offenders;
  std::vector<std::size_t> kept_inequalities;
  std::vector<std::size_t> relaxed;
  const bool lagrangian = strategy.uses(StrategyKind::Lagrangian);
  if (lagrangian) {
    std::vector<Expr> objective_terms = additive_terms(q.objective);
    std::vector<Constraint> remaining;
    for (std::size_t i = 0; i < q.inequalities.size(); ++i) {
      const bool offending = !offenders_at(report.offenders, {ComponentKind::Inequality, i}).empty();
      const auto it = strategy.multipliers.find(i);
      if (offending && (it != strategy.multipliers.end() || strategy.multipliers.empty())) {
        const double lambda = it == strategy.multipliers.end() ? 1.0 : it->second;
        for (const Expr& t : additive_terms(q.inequalities[i].lhs)) {
          objective_terms.push_back(product({constant(lambda), t}));
        }
        relaxed.push_back(i);
      } else {
        remaining.push_back(q.inequalities[i]);
        kept_inequalities.push_back(i);
      }
    }
    q.objective = sum(std::move(objective_terms));
    q.inequalities = std::move(remaining);
    // The objective changed shape; re-derive what still needs linearizing.
    targets = analyze_problem(q).offenders;
  } else {
    for (std::size_t i = 0; i < q.inequalities.size(); ++i) kept_inequalities.push_back(i);
  }

  const bool sca = strategy.uses(StrategyKind::SCA) || lagrangian;
  std::string transform = "kept";
  if (sca) {
    out.linearized += linearize_component(
        q.objective, offenders_at(targets, {ComponentKind::Objective, 0}), out.anchor, transform);
  }
  out.mapping.push_back({{ComponentKind::Objective, 0},
                         {ComponentKind::Objective, 0},
                         relaxed.empty() ? transform : "objective with relaxed constraints"});
  for (std::size_t k = 0; k < q.inequalities.size(); ++k) {
    transform = "kept";
    const std::size_t original = kept_inequalities[k];
    // Fresh analysis indexes the surrogate; the caller's report indexes the original.
    const Location lookup = lagrangian ? Location{ComponentKind::Inequality, k}
                                       : Location{ComponentKind::Inequality, original};
    if (sca) {
      out.linearized += linearize_component(q.inequalities[k].lhs, offenders_at(targets, lookup),
                                            out.anchor, transform);
    }
    out.mapping.push_back(
        {{ComponentKind::Inequality, k}, {ComponentKind::Inequality, original}, transform});
  }
  for (std::size_t i : relaxed) {
    out.mapping.push_back(
        {{ComponentKind::Objective, 0}, {ComponentKind::Inequality, i}, "relaxed into objective"});
  }
  for (std::size_t j = 0; j < q.equalities.size(); ++j) {
    transform = "kept";
    if (sca) {
      out.linearized += linearize_component(
          q.equalities[j].lhs, offenders_at(targets, {ComponentKind::Equality, j}), out.anchor,
          transform);
    }
    out.mapping.push_back({{ComponentKind::Equality, j}, {ComponentKind::Equality, j}, transform});
  }

  validate(q);
  const ConvexityReport post = analyze_problem(q);
  if (!post.problem_convex) {
    std::ostringstream msg;
    msg << "surrogate is still non-convex under strategy " << strategy.label() << ":";
    for (const Offender& o : post.offenders) msg << " [" << describe(o.location) << ": " << o.reason << "]";
    throw ConvexificationError(msg.str());
  }
  out.surrogate = std::move(q);
  return out;
}

ConvexifiedProblem convexify(const StandardForm& p, const ConvexityReport& report,
                             const Strategy& strategy) {
  return convexify(p, report, strategy, box_center(p));
}

Strategy select_strategy(const ConvexityReport& report, int attempt) {
  const bool integer = std::any_of(report.offenders.begin(), report.offenders.end(),
                                   [](const Offender& o) {
                                     return o.location.kind == ComponentKind::VariableType;
                                   });
  const int cycle = attempt % 3;
  const bool perturbed = attempt >= 3;
  Strategy s;
  if (integer) s.parts.push_back(StrategyKind::ContinuousRelaxation);
  switch (cycle) {
    case 0:
      s.anchor_policy = AnchorPolicy::Start;
      break;
    case 1:
      s.anchor_policy = AnchorPolicy::BoxCenter;
      break;
    default:
      s.parts.push_back(StrategyKind::Lagrangian);
      for (const Offender& o : report.offenders) {
        if (o.location.kind == ComponentKind::Inequality) s.multipliers[o.location.index] = 1.0;
      }
      s.anchor_policy = AnchorPolicy::Start;
      break;
  }
  s.parts.push_back(StrategyKind::SCA);
  if (perturbed) {
    s.anchor_policy = AnchorPolicy::Perturbed;
    s.perturbation = attempt;
  }
  s.kind = s.parts.size() == 1 ? s.parts.front() : StrategyKind::Composite;
  if (s.kind != StrategyKind::Composite) s.parts.clear();
  return s;
}

}  // namespace optira
