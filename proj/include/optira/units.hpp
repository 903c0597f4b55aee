#pragma once

#include <optional>
#include <string_view>

namespace optira {

/// Converts between units of the same dimension: W, mW, dBm; Hz, kHz, MHz,
/// GHz; s, ms. The empty unit is dimensionless. nullopt when the units are
/// unknown or incompatible.
std::optional<double> convert_unit(double value, std::string_view from, std::string_view to);

bool known_unit(std::string_view unit);

}  // namespace optira
