#include <charconv>
#include <sstream>

#include "optira/model_json.hpp"
#include "optira/sandbox.hpp"

namespace optira {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double number(const std::string& token, const std::string& excerpt) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || end != token.data() + token.size() || !std::isfinite(v)) {
    throw ScriptError(ErrorClass::Syntax, "bad number '" + token + "'", excerpt);
  }
  return v;
}

int whole(double v, const std::string& token, const std::string& excerpt) {
  if (std::floor(v) != v || v < 1 || v > 1e7) {
    throw ScriptError(ErrorClass::Syntax, "expected a positive integer, got '" + token + "'", excerpt);
  }
  return static_cast<int>(v);
}

}  // namespace

ScriptProgram parse_script(const std::string& script, const std::string& document,
                           const SolverOptions& defaults) {
  ScriptProgram prog;
  prog.options = defaults;
  std::istringstream in(script);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string excerpt =
        "line " + std::to_string(line_no) + ": " + (line.size() > 120 ? line.substr(0, 120) + "..." : line);
    const auto space = line.find_first_of(" \t");
    const std::string keyword = line.substr(0, space);
    const std::string rest = space == std::string::npos ? "" : trim(line.substr(space));

    if (keyword == "model") {
      if (rest.empty()) throw ScriptError(ErrorClass::Syntax, "model statement needs a document", excerpt);
      if (rest == kModelPlaceholder || rest == document) {
        prog.model_text = document;
        continue;
      }
      nlohmann::json parsed;
      try {
        parsed = nlohmann::json::parse(rest);
      } catch (const nlohmann::json::exception&) {
        throw ScriptError(ErrorClass::Schema, "embedded model is not valid JSON", excerpt);
      }
      if (canonical_text(parsed) != document) {
        throw ScriptError(ErrorClass::Schema, "embedded model differs from the canonical document",
                          excerpt);
      }
      prog.model_text = document;
    } else if (keyword == "set") {
      const auto w = words(rest);
      if (w.size() != 2) throw ScriptError(ErrorClass::Syntax, "usage: set <option> <value>", excerpt);
      const double v = number(w[1], excerpt);
      if (w[0] == "tolerance") {
        prog.options.tolerance = v;
      } else if (w[0] == "max_inner") {
        prog.options.max_inner = whole(v, w[1], excerpt);
      } else if (w[0] == "max_outer") {
        prog.options.max_outer = whole(v, w[1], excerpt);
      } else if (w[0] == "sca_threshold") {
        prog.options.sca_threshold = v;
      } else if (w[0] == "damping") {
        prog.options.damping = v;
      } else if (w[0] == "proximal") {
        prog.options.proximal = v;
      } else {
        throw ScriptError(ErrorClass::MissingSymbol, "unknown option '" + w[0] + "'", excerpt);
      }
      try {
        prog.options.validate();
      } catch (const InputError& e) {
        throw ScriptError(ErrorClass::Syntax, e.what(), excerpt);
      }
    } else if (keyword == "start") {
      const auto w = words(rest);
      if (w.size() != 2) throw ScriptError(ErrorClass::Syntax, "usage: start <variable> <value>", excerpt);
      prog.start.emplace_back(w[0], number(w[1], excerpt));
    } else if (keyword == "solve") {
      if (!rest.empty()) throw ScriptError(ErrorClass::Syntax, "solve takes no arguments", excerpt);
      if (prog.model_text.empty()) {
        throw ScriptError(ErrorClass::MissingSymbol, "solve without a model", excerpt);
      }
      if (prog.solve) throw ScriptError(ErrorClass::Syntax, "solve appears twice", excerpt);
      prog.solve = true;
    } else {
      throw ScriptError(ErrorClass::Syntax, "unknown statement '" + keyword + "'", excerpt);
    }
  }
  if (!prog.solve) throw ScriptError(ErrorClass::Schema, "script never calls solve");
  return prog;
}

Solution run_script(const std::string& script, const std::string& document,
                    const SolverOptions& defaults) {
  const ScriptProgram prog = parse_script(script, document, defaults);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(prog.model_text);
  } catch (const nlohmann::json::exception& e) {
    throw ScriptError(ErrorClass::Schema, std::string("model document: ") + e.what());
  }
  if (prog.start.empty()) return solve_document(doc, nullptr, prog.options);

  StandardForm shape;
  try {
    shape = model_from_json(doc);
  } catch (const std::exception& e) {
    throw ScriptError(ErrorClass::Schema, e.what());
  }
  Eigen::VectorXd x0 = box_center(shape);
  for (const auto& [name, value] : prog.start) {
    const int k = shape.index_of(name);
    if (k < 0) throw ScriptError(ErrorClass::MissingSymbol, "undefined variable '" + name + "'", "start " + name);
    x0[k] = value;
  }
  return solve_document(doc, &x0, prog.options);
}

}  // namespace optira
