#include "optira/units.hpp"

#include <array>
#include <cmath>

namespace optira {

namespace {

enum class Dim { None, Power, Frequency, Time };

struct Unit {
  std::string_view name;
  Dim dim;
  double scale;  // to the base unit (W, Hz, s); dBm is handled separately
};

constexpr std::array kUnits{
    Unit{"", Dim::None, 1.0},           Unit{"W", Dim::Power, 1.0},
    Unit{"mW", Dim::Power, 1e-3},       Unit{"dBm", Dim::Power, 0.0},
    Unit{"Hz", Dim::Frequency, 1.0},    Unit{"kHz", Dim::Frequency, 1e3},
    Unit{"MHz", Dim::Frequency, 1e6},   Unit{"GHz", Dim::Frequency, 1e9},
    Unit{"s", Dim::Time, 1.0},          Unit{"ms", Dim::Time, 1e-3},
};

const Unit* find(std::string_view name) {
  for (const Unit& u : kUnits) {
    if (u.name == name) return &u;
  }
  return nullptr;
}

}  // namespace

bool known_unit(std::string_view unit) { return find(unit) != nullptr; }

std::optional<double> convert_unit(double value, std::string_view from, std::string_view to) {
  const Unit* a = find(from);
  const Unit* b = find(to);
  if (a == nullptr || b == nullptr || a->dim != b->dim) return std::nullopt;
  if (a == b) return value;
  const double base = a->name == "dBm" ? std::pow(10.0, (value - 30.0) / 10.0) : value * a->scale;
  if (b->name == "dBm") {
    if (!(base > 0)) return std::nullopt;
    return 10.0 * std::log10(base) + 30.0;
  }
  return base / b->scale;
}

}  // namespace optira
