#pragma once

#include <map>
#include <string>

#include "optira/llm.hpp"

namespace optira {

inline constexpr std::string_view kPromptVersion = "v1";

/// Raw template text for a stage, as shipped in prompts/v1.
const std::string& prompt_template(Stage stage);

/// Substitutes {{key}} placeholders. problem_id and stage are always set.
/// Unknown placeholders are left empty.
std::string render_prompt(Stage stage, const std::string& problem_id,
                          const std::map<std::string, std::string>& values);

/// First fenced block of a reply (any info string), or nullopt.
std::optional<std::string> fenced_block(std::string_view reply);

}  // namespace optira
