#include "optira/parse.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <system_error>

namespace optira {

namespace {

enum class Tok { Number, Name, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
  Tok kind;
  std::size_t offset;
  std::string_view text;
  double number = 0.0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view s) : s_(s) {}

  Token next() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    if (pos_ >= s_.size()) return {Tok::End, start, {}};
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number(start);
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
        ++pos_;
      }
      return {Tok::Name, start, s_.substr(start, pos_ - start)};
    }
    ++pos_;
    switch (c) {
      case '+': return {Tok::Plus, start, s_.substr(start, 1)};
      case '-': return {Tok::Minus, start, s_.substr(start, 1)};
      case '*': return {Tok::Star, start, s_.substr(start, 1)};
      case '/': return {Tok::Slash, start, s_.substr(start, 1)};
      case '^': return {Tok::Caret, start, s_.substr(start, 1)};
      case '(': return {Tok::LParen, start, s_.substr(start, 1)};
      case ')': return {Tok::RParen, start, s_.substr(start, 1)};
      case ',': return {Tok::Comma, start, s_.substr(start, 1)};
      default: break;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", start);
  }

 private:
  Token number(std::size_t start) {
    auto digits = [&] {
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        digits();
      } else {
        pos_ = save;
      }
    }
    const std::string_view text = s_.substr(start, pos_ - start);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw ParseError("malformed number '" + std::string(text) + "'", start);
    }
    return {Tok::Number, start, text, v};
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  Parser(std::string_view text, std::span<const Variable> vars) : lexer_(text), vars_(vars) {
    advance();
  }

  Expr parse() {
    Expr e = expr();
    if (cur_.kind != Tok::End) fail("unexpected '" + std::string(cur_.text) + "'");
    return e;
  }

 private:
  void advance() { cur_ = lexer_.next(); }

  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(message, cur_.offset);
  }

  void expect(Tok kind, const char* what) {
    if (cur_.kind != kind) {
      fail(cur_.kind == Tok::End ? std::string("expected ") + what + ", got end of input"
                                 : std::string("expected ") + what);
    }
    advance();
  }

  Expr expr() {
    std::vector<Expr> terms{term()};
    while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
      const bool minus = cur_.kind == Tok::Minus;
      advance();
      Expr t = term();
      terms.push_back(minus ? -t : t);
    }
    return sum(std::move(terms));
  }

  Expr term() {
    Expr acc = unary();
    while (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
      const bool div = cur_.kind == Tok::Slash;
      advance();
      Expr rhs = unary();
      acc = div ? divide(acc, rhs) : product({acc, rhs});
    }
    return acc;
  }

  Expr unary() {
    if (cur_.kind == Tok::Minus) {
      advance();
      return -unary();
    }
    return power_expr();
  }

  Expr power_expr() {
    Expr base = primary();
    if (cur_.kind == Tok::Caret) {
      advance();
      const std::size_t at = cur_.offset;
      Expr exponent = unary();
      if (!exponent.is_constant()) throw ParseError("exponent must be a constant", at);
      return power(base, exponent.value());
    }
    return base;
  }

  Expr primary() {
    const Token tok = cur_;
    switch (tok.kind) {
      case Tok::Number:
        advance();
        return constant(tok.number);
      case Tok::LParen: {
        advance();
        Expr e = expr();
        expect(Tok::RParen, "')'");
        return e;
      }
      case Tok::Name:
        advance();
        if (cur_.kind == Tok::LParen) return call_expr(tok);
        for (std::size_t i = 0; i < vars_.size(); ++i) {
          if (vars_[i].name == tok.text) return variable(static_cast<int>(i), vars_[i].name);
        }
        throw ParseError("unknown identifier '" + std::string(tok.text) + "'", tok.offset);
      case Tok::End:
        fail("unexpected end of input");
      default:
        fail("unexpected '" + std::string(tok.text) + "'");
    }
  }

  Expr call_expr(const Token& name) {
    advance();  // '('
    std::vector<Expr> args{expr()};
    while (cur_.kind == Tok::Comma) {
      advance();
      args.push_back(expr());
    }
    expect(Tok::RParen, "')'");
    if (name.text == "pow") {
      if (args.size() != 2) throw ParseError("pow takes two arguments", name.offset);
      if (!args[1].is_constant()) throw ParseError("exponent must be a constant", name.offset);
      return power(args[0], args[1].value());
    }
    const auto atom = find_atom(name.text);
    if (!atom) throw ParseError("unknown atom '" + std::string(name.text) + "'", name.offset);
    const bool arity_ok = atom->arity == -1 ? args.size() >= 2
                                            : args.size() == static_cast<std::size_t>(atom->arity);
    if (!arity_ok) {
      throw ParseError("wrong number of arguments for '" + std::string(name.text) + "'", name.offset);
    }
    return call(atom->op, std::move(args));
  }

  Lexer lexer_;
  std::span<const Variable> vars_;
  Token cur_{Tok::End, 0, {}};
};

int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Sum: return 1;
    case Op::Product:
    case Op::Divide: return 2;
    case Op::Power: return 3;
    case Op::Constant: return e.value() < 0 ? 2 : 4;
    default: return 4;
  }
}

void print(const Expr& e, std::string& out);

void print_parenthesized(const Expr& e, int min_precedence, std::string& out) {
  if (precedence(e) < min_precedence) {
    out += '(';
    print(e, out);
    out += ')';
  } else {
    print(e, out);
  }
}

void print(const Expr& e, std::string& out) {
  switch (e.op()) {
    case Op::Constant:
      out += format_number(e.value());
      return;
    case Op::Variable:
      out += e.name();
      return;
    case Op::Sum: {
      for (std::size_t i = 0; i < e.args().size(); ++i) {
        const Expr& t = e.arg(i);
        const bool negated = i > 0 && t.op() == Op::Product && t.arg(0).is_constant() &&
                             t.arg(0).value() < 0;
        if (negated) {
          out += " - ";
          std::vector<Expr> rest(t.args().begin() + 1, t.args().end());
          rest.insert(rest.begin(), constant(-t.arg(0).value()));
          print_parenthesized(product(std::move(rest)), 2, out);
        } else {
          if (i > 0) out += " + ";
          print_parenthesized(t, i == 0 ? 1 : 2, out);
        }
      }
      return;
    }
    case Op::Product:
      for (std::size_t i = 0; i < e.args().size(); ++i) {
        if (i > 0) out += " * ";
        // Divides are parenthesized so left-associative re-parsing keeps the shape.
        const Expr& f = e.arg(i);
        if (f.op() == Op::Divide || (i > 0 && f.is_constant() && f.value() < 0)) {
          out += '(';
          print(f, out);
          out += ')';
        } else {
          print_parenthesized(f, i == 0 ? 2 : 3, out);
        }
      }
      return;
    case Op::Divide:
      print_parenthesized(e.arg(0), 3, out);
      out += " / ";
      print_parenthesized(e.arg(1), 4, out);
      return;
    case Op::Power:
      print_parenthesized(e.arg(0), 4, out);
      out += " ^ ";
      if (e.exponent() < 0) {
        out += '(' + format_number(e.exponent()) + ')';
      } else {
        out += format_number(e.exponent());
      }
      return;
    default:
      out += op_name(e.op());
      out += '(';
      for (std::size_t i = 0; i < e.args().size(); ++i) {
        if (i > 0) out += ", ";
        print(e.arg(i), out);
      }
      out += ')';
      return;
  }
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Expr parse_expression(std::string_view text, std::span<const Variable> vars) {
  return Parser(text, vars).parse();
}

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

RawConstraint parse_relation(std::string_view text, std::span<const Variable> vars) {
  struct Candidate {
    std::string_view token;
    RawRelation relation;
  };
  static constexpr Candidate kRelations[] = {
      {"<=", RawRelation::LessEqual}, {">=", RawRelation::GreaterEqual},
      {"==", RawRelation::Equal},     {"\xE2\x89\xA4", RawRelation::LessEqual},
      {"\xE2\x89\xA5", RawRelation::GreaterEqual},
      {"<", RawRelation::Less},       {">", RawRelation::Greater},
      {"=", RawRelation::Equal},
  };
  int depth = 0;
  std::size_t found = std::string_view::npos;
  std::size_t found_len = 0;
  RawRelation relation = RawRelation::LessEqual;
  for (std::size_t i = 0; i < text.size();) {
    const char c = text[i];
    if (c == '(') ++depth;
    if (c == ')') --depth;
    bool matched = false;
    if (depth == 0) {
      for (const Candidate& cand : kRelations) {
        if (text.substr(i, cand.token.size()) == cand.token) {
          if (found != std::string_view::npos) {
            throw ParseError("more than one relation operator", i);
          }
          found = i;
          found_len = cand.token.size();
          relation = cand.relation;
          i += cand.token.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) ++i;
  }
  if (found == std::string_view::npos) throw ParseError("missing relation operator", text.size());
  RawConstraint rc;
  try {
    rc.lhs = parse_expression(text.substr(0, found), vars);
  } catch (const ParseError& e) {
    throw ParseError(std::string(e.what()).substr(0, std::string(e.what()).rfind(" at offset")),
                     e.offset());
  }
  const std::size_t rhs_start = found + found_len;
  try {
    rc.rhs = parse_expression(text.substr(rhs_start), vars);
  } catch (const ParseError& e) {
    throw ParseError(std::string(e.what()).substr(0, std::string(e.what()).rfind(" at offset")),
                     rhs_start + e.offset());
  }
  rc.relation = relation;
  rc.provenance = std::string(text);
  return rc;
}

}  // namespace optira
