#include "optira/differentiate.hpp"

#include <stdexcept>

namespace optira {

namespace {
bool depends_on(const Expr& e, int index) {
  if (e.op() == Op::Variable) return e.index() == index;
  for (const Expr& a : e.args()) {
    if (depends_on(a, index)) return true;
  }
  return false;
}
}  // namespace

Expr differentiate(const Expr& e, int index) {
  if (!depends_on(e, index)) return constant(0.0);
  switch (e.op()) {
    case Op::Constant:
      return constant(0.0);
    case Op::Variable:
      return constant(1.0);
    case Op::Sum: {
      std::vector<Expr> terms;
      for (const Expr& a : e.args()) terms.push_back(differentiate(a, index));
      return sum(std::move(terms));
    }
    case Op::Product: {
      std::vector<Expr> terms;
      const auto args = e.args();
      for (std::size_t i = 0; i < args.size(); ++i) {
        Expr d = differentiate(args[i], index);
        if (d.is_constant(0.0)) continue;
        std::vector<Expr> factors;
        for (std::size_t j = 0; j < args.size(); ++j) factors.push_back(j == i ? d : args[j]);
        terms.push_back(product(std::move(factors)));
      }
      return sum(std::move(terms));
    }
    case Op::Divide: {
      const Expr& a = e.arg(0);
      const Expr& b = e.arg(1);
      const Expr da = differentiate(a, index);
      const Expr db = differentiate(b, index);
      if (db.is_constant(0.0)) return divide(da, b);
      return divide(da * b - a * db, power(b, 2.0));
    }
    case Op::Power: {
      const Expr& u = e.arg(0);
      const double p = e.exponent();
      return product({constant(p), power(u, p - 1.0), differentiate(u, index)});
    }
    case Op::Exp:
      return product({e, differentiate(e.arg(0), index)});
    case Op::Log:
      return divide(differentiate(e.arg(0), index), e.arg(0));
    case Op::Sqrt:
      return divide(differentiate(e.arg(0), index), product({constant(2.0), e}));
    case Op::Abs:
      return product({call(Op::Sign, {e.arg(0)}), differentiate(e.arg(0), index)});
    case Op::Square:
      return product({constant(2.0), e.arg(0), differentiate(e.arg(0), index)});
    case Op::InvPos:
      return product({constant(-1.0), differentiate(e.arg(0), index), power(e.arg(0), -2.0)});
    case Op::Min:
    case Op::Max: {
      // Fold to the binary case: min(a, b) = (a + b - |a - b|) / 2, max with +.
      const auto args = e.args();
      Expr head = args[0];
      Expr tail = args.size() == 2 ? args[1] : call(e.op(), {args.begin() + 1, args.end()});
      const double s = e.op() == Op::Min ? -1.0 : 1.0;
      const Expr da = differentiate(head, index);
      const Expr db = differentiate(tail, index);
      const Expr gap_sign = call(Op::Sign, {head - tail});
      return product({constant(0.5), sum({da, db, product({constant(s), gap_sign, da - db})})});
    }
    case Op::Sign:
      return constant(0.0);
  }
  return constant(0.0);
}

std::vector<Expr> gradient(const Expr& e, int dimension) {
  std::vector<Expr> g;
  g.reserve(dimension);
  for (int i = 0; i < dimension; ++i) g.push_back(differentiate(e, i));
  return g;
}

CompiledFunction::CompiledFunction(Expr e, int dimension, bool with_hessian)
    : expr_(std::move(e)), dimension_(dimension), has_hessian_(with_hessian) {
  for (const int i : variables_of(expr_)) active_.push_back(i);
  for (const int i : active_) gradient_.push_back(differentiate(expr_, i));
  if (with_hessian) {
    hessian_.resize(active_.size());
    for (std::size_t a = 0; a < active_.size(); ++a) {
      for (std::size_t b = 0; b <= a; ++b) {
        hessian_[a].push_back(differentiate(gradient_[a], active_[b]));
      }
    }
  }
}

double CompiledFunction::value(const Eigen::VectorXd& x) const { return evaluate(expr_, x); }

Eigen::VectorXd CompiledFunction::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dimension_);
  for (std::size_t a = 0; a < active_.size(); ++a) g[active_[a]] = evaluate(gradient_[a], x);
  return g;
}

Eigen::MatrixXd CompiledFunction::hessian(const Eigen::VectorXd& x) const {
  if (!has_hessian_) throw std::logic_error("function compiled without a Hessian");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dimension_, dimension_);
  for (std::size_t a = 0; a < active_.size(); ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      const double v = evaluate(hessian_[a][b], x);
      h(active_[a], active_[b]) = v;
      h(active_[b], active_[a]) = v;
    }
  }
  return h;
}

}  // namespace optira
