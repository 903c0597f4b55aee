#include "optira/expr.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace optira {

namespace {

constexpr std::array<AtomInfo, 9> kAtoms{{
    {Op::Exp, "exp", 1},
    {Op::Log, "log", 1},
    {Op::Sqrt, "sqrt", 1},
    {Op::Abs, "abs", 1},
    {Op::Square, "square", 1},
    {Op::InvPos, "inv_pos", 1},
    {Op::Min, "min", -1},
    {Op::Max, "max", -1},
    {Op::Sign, "sign", 1},
}};

bool is_atom(Op op) { return op >= Op::Exp; }

}  // namespace

std::span<const AtomInfo> atom_table() { return kAtoms; }

std::optional<AtomInfo> find_atom(std::string_view name) {
  for (const AtomInfo& a : kAtoms) {
    if (a.name == name) return a;
  }
  return std::nullopt;
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Constant: return "constant";
    case Op::Variable: return "variable";
    case Op::Sum: return "sum";
    case Op::Product: return "product";
    case Op::Divide: return "divide";
    case Op::Power: return "pow";
    default: break;
  }
  for (const AtomInfo& a : kAtoms) {
    if (a.op == op) return a.name;
  }
  return "?";
}

namespace detail {
void throw_domain(std::string_view what) { throw DomainError(std::string(what)); }
void throw_missing(const std::string& name, int index) {
  throw ModelError("missing assignment for variable '" + name + "' (index " + std::to_string(index) +
                   ")");
}
}  // namespace detail

Expr make_node(detail::Node node) {
  return Expr(std::make_shared<const detail::Node>(std::move(node)));
}

Expr::Expr() : node_(std::make_shared<const detail::Node>()) {}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.op() != b.op()) return false;
  switch (a.op()) {
    case Op::Constant:
      return a.value() == b.value();
    case Op::Variable:
      return a.index() == b.index() && a.name() == b.name();
    case Op::Power:
      if (a.exponent() != b.exponent()) return false;
      break;
    default:
      break;
  }
  if (a.args().size() != b.args().size()) return false;
  for (std::size_t i = 0; i < a.args().size(); ++i) {
    if (!(a.arg(i) == b.arg(i))) return false;
  }
  return true;
}

Expr constant(double v) {
  detail::Node n;
  n.op = Op::Constant;
  n.value = v == 0.0 ? 0.0 : v;  // no negative zero
  return make_node(std::move(n));
}

Expr variable(int index, std::string name) {
  detail::Node n;
  n.op = Op::Variable;
  n.index = index;
  n.name = std::move(name);
  return make_node(std::move(n));
}

Expr sum(std::vector<Expr> terms) {
  std::vector<Expr> flat;
  double folded = 0.0;
  bool has_constant = false;
  for (Expr& t : terms) {
    if (t.op() == Op::Sum) {
      for (const Expr& inner : t.args()) {
        if (inner.is_constant()) {
          folded += inner.value();
          has_constant = true;
        } else {
          flat.push_back(inner);
        }
      }
    } else if (t.is_constant()) {
      folded += t.value();
      has_constant = true;
    } else {
      flat.push_back(std::move(t));
    }
  }
  if (has_constant && folded != 0.0) flat.insert(flat.begin(), constant(folded));
  if (flat.empty()) return constant(0.0);
  if (flat.size() == 1) return flat.front();
  detail::Node n;
  n.op = Op::Sum;
  n.args = std::move(flat);
  return make_node(std::move(n));
}

Expr product(std::vector<Expr> factors) {
  std::vector<Expr> flat;
  double coefficient = 1.0;
  for (Expr& f : factors) {
    if (f.op() == Op::Product) {
      for (const Expr& inner : f.args()) {
        if (inner.is_constant()) {
          coefficient *= inner.value();
        } else {
          flat.push_back(inner);
        }
      }
    } else if (f.is_constant()) {
      coefficient *= f.value();
    } else {
      flat.push_back(std::move(f));
    }
  }
  if (coefficient == 0.0 || flat.empty()) return constant(coefficient);
  if (coefficient != 1.0) flat.insert(flat.begin(), constant(coefficient));
  if (flat.size() == 1) return flat.front();
  detail::Node n;
  n.op = Op::Product;
  n.args = std::move(flat);
  return make_node(std::move(n));
}

Expr divide(Expr numerator, Expr denominator) {
  if (denominator.is_constant(1.0)) return numerator;
  if (numerator.is_constant(0.0) && !denominator.is_constant(0.0)) return constant(0.0);
  if (numerator.is_constant() && denominator.is_constant() && denominator.value() != 0.0) {
    return constant(numerator.value() / denominator.value());
  }
  detail::Node n;
  n.op = Op::Divide;
  n.args = {std::move(numerator), std::move(denominator)};
  return make_node(std::move(n));
}

Expr power(Expr base, double exponent) {
  if (exponent == 1.0) return base;
  if (exponent == 0.0) return constant(1.0);
  if (base.is_constant()) {
    const double b = base.value();
    const bool integral = std::floor(exponent) == exponent;
    if ((b > 0.0 || (b < 0.0 && integral)) && std::isfinite(std::pow(b, exponent))) {
      return constant(std::pow(b, exponent));
    }
  }
  detail::Node n;
  n.op = Op::Power;
  n.value = exponent;
  n.args = {std::move(base)};
  return make_node(std::move(n));
}

Expr call(Op atom, std::vector<Expr> args) {
  if (!is_atom(atom)) throw ModelError("not an atom: " + std::string(op_name(atom)));
  const auto info = find_atom(op_name(atom));
  if (info->arity == -1 ? args.size() < 2 : args.size() != static_cast<std::size_t>(info->arity)) {
    throw ModelError("wrong number of arguments for " + std::string(info->name));
  }
  detail::Node n;
  n.op = atom;
  n.args = std::move(args);
  Expr e = make_node(std::move(n));
  const bool all_constant =
      std::all_of(e.args().begin(), e.args().end(), [](const Expr& a) { return a.is_constant(); });
  if (all_constant) {
    try {
      const double v = evaluate(e, Eigen::VectorXd());
      if (std::isfinite(v)) return constant(v);
    } catch (const DomainError&) {
      // left symbolic; evaluation reports the domain error later
    }
  }
  return e;
}

Expr operator+(const Expr& a, const Expr& b) { return sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return sum({a, product({constant(-1.0), b})}); }
Expr operator-(const Expr& a) { return product({constant(-1.0), a}); }
Expr operator*(const Expr& a, const Expr& b) { return product({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return divide(a, b); }

namespace {
void collect_variables(const Expr& e, std::set<int>& out) {
  if (e.op() == Op::Variable) {
    out.insert(e.index());
    return;
  }
  for (const Expr& a : e.args()) collect_variables(a, out);
}

Expr rebuild(const Expr& e, std::vector<Expr> args) {
  switch (e.op()) {
    case Op::Constant:
    case Op::Variable:
      return e;
    case Op::Sum:
      return sum(std::move(args));
    case Op::Product:
      return product(std::move(args));
    case Op::Divide:
      return divide(std::move(args[0]), std::move(args[1]));
    case Op::Power:
      return power(std::move(args[0]), e.exponent());
    default:
      return call(e.op(), std::move(args));
  }
}
}  // namespace

std::set<int> variables_of(const Expr& e) {
  std::set<int> out;
  collect_variables(e, out);
  return out;
}

std::size_t node_count(const Expr& e) {
  std::size_t n = 1;
  for (const Expr& a : e.args()) n += node_count(a);
  return n;
}

Expr substitute(const Expr& e, const Expr& target, const Expr& replacement) {
  if (e == target) return replacement;
  if (e.args().empty()) return e;
  std::vector<Expr> args;
  args.reserve(e.args().size());
  for (const Expr& a : e.args()) args.push_back(substitute(a, target, replacement));
  return rebuild(e, std::move(args));
}

Expr remap_variables(const Expr& e, const std::unordered_map<int, Expr>& mapping) {
  if (e.op() == Op::Variable) {
    const auto it = mapping.find(e.index());
    return it == mapping.end() ? e : it->second;
  }
  if (e.args().empty()) return e;
  std::vector<Expr> args;
  args.reserve(e.args().size());
  for (const Expr& a : e.args()) args.push_back(remap_variables(a, mapping));
  return rebuild(e, std::move(args));
}

std::vector<Expr> additive_terms(const Expr& e) {
  if (e.op() == Op::Sum) return {e.args().begin(), e.args().end()};
  return {e};
}

namespace {
double evaluate_named(const Expr& e, const Assignment& a);

double evaluate_named_node(const Expr& e, const Assignment& a) {
  if (e.op() == Op::Variable) {
    const auto it = a.find(e.name());
    if (it == a.end()) detail::throw_missing(e.name(), e.index());
    return it->second;
  }
  if (e.args().empty()) return evaluate(e, Eigen::VectorXd());
  // Evaluate children by name, then apply this node to the constants.
  std::vector<Expr> folded;
  folded.reserve(e.args().size());
  for (const Expr& c : e.args()) folded.push_back(constant(evaluate_named(c, a)));
  detail::Node n;
  n.op = e.op();
  n.value = e.value();
  n.args = std::move(folded);
  return evaluate(make_node(std::move(n)), Eigen::VectorXd());
}

double evaluate_named(const Expr& e, const Assignment& a) { return evaluate_named_node(e, a); }
}  // namespace

double evaluate(const Expr& e, const Assignment& assignment) { return evaluate_named(e, assignment); }

}  // namespace optira
