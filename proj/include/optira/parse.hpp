#pragma once

#include <span>
#include <string>
#include <string_view>

#include "optira/expr.hpp"
#include "optira/model.hpp"

namespace optira {

/// Parses the infix grammar documented in docs/grammar.md.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?
///   primary := number | name | atom '(' expr (',' expr)* ')' | 'pow' '(' expr ',' expr ')' | '(' expr ')'
///
/// Identifiers resolve against `vars` by name. Exponents must fold to constants.
/// Throws ParseError with the byte offset of the failure.
Expr parse_expression(std::string_view text, std::span<const Variable> vars);

/// Prints with minimal parentheses. parse_expression(to_string(e)) == e.
std::string to_string(const Expr& e);

/// Formats a double in shortest round-trip form.
std::string format_number(double v);

/// Splits "lhs <op> rhs" at its single top-level relation operator and parses both
/// sides. Accepts <=, >=, ==, =, <, >, and the unicode forms of <= and >=.
RawConstraint parse_relation(std::string_view text, std::span<const Variable> vars);

}  // namespace optira
