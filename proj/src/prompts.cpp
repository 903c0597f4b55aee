#include "optira/prompts.hpp"

#include <unordered_map>

#include "optira/error.hpp"

namespace optira {

namespace {
const std::unordered_map<std::string, std::string>& templates() {
  static const std::unordered_map<std::string, std::string> table{
#include "optira/prompt_templates.inc"
  };
  return table;
}
}  // namespace

const std::string& prompt_template(Stage stage) {
  const auto it = templates().find(std::string(to_string(stage)));
  if (it == templates().end()) throw Error("no prompt template for stage " + std::string(to_string(stage)));
  return it->second;
}

std::string render_prompt(Stage stage, const std::string& problem_id,
                          const std::map<std::string, std::string>& values) {
  const std::string& tpl = prompt_template(stage);
  std::string out;
  out.reserve(tpl.size() + 256);
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    const auto open = tpl.find("{{", pos);
    if (open == std::string::npos) {
      out.append(tpl, pos);
      break;
    }
    const auto close = tpl.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(tpl, pos);
      break;
    }
    out.append(tpl, pos, open - pos);
    const std::string key = tpl.substr(open + 2, close - open - 2);
    if (key == "problem_id") {
      out += problem_id;
    } else if (key == "stage") {
      out += to_string(stage);
    } else if (auto it = values.find(key); it != values.end()) {
      out += it->second;
    }
    pos = close + 2;
  }
  return out;
}

std::optional<std::string> fenced_block(std::string_view reply) {
  const auto open = reply.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  const auto line_end = reply.find('\n', open);
  if (line_end == std::string_view::npos) return std::nullopt;
  const auto close = reply.find("```", line_end + 1);
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(reply.substr(line_end + 1, close - line_end - 1));
}

}  // namespace optira
