#pragma once

#include <string>

#include <json.hpp>

#include "optira/model.hpp"

namespace optira {

inline constexpr const char* kModelFormat = "optira-model/1";

/// Canonical problem document:
///   {format, variables: [{name, type, lower, upper, unit}],
///    objective: {sense, expr}, constraints: [{expr, relation}], metadata}
/// Infinite bounds serialize as null.
nlohmann::json to_json(const StandardForm& p);

/// Parses a problem document. Accepts sense "maximize" and relations
/// "<=", ">=", "==" and canonicalizes them. Throws SchemaError / ParseError / ModelError.
StandardForm model_from_json(const nlohmann::json& doc);

/// Compact single-line dump with sorted keys; the byte-exact canonical text.
std::string canonical_text(const nlohmann::json& doc);

}  // namespace optira
