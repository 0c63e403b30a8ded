#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "valign/ground_truth.hpp"

namespace valign {

/// Hypothetical-survey prompt body with {topic} and {n_respondents}
/// placeholders, already translated into `language`.
struct PromptTemplate {
  std::string template_id;
  std::string language;
  std::string body;

  void validate() const;
};

struct PromptInstance {
  std::string question_id;
  std::string template_id;
  std::string language;
  std::size_t variant = 0;
  std::string text;
};

std::vector<PromptTemplate> load_templates(const std::filesystem::path& path);

/// Each topic yields `variants_per_topic` prompts. Templates for the
/// language are visited in a per-topic seeded order and cycled when there
/// are more variants than templates.
std::vector<PromptInstance> render_prompts(const std::vector<QuestionSpec>& questions,
                                           const std::vector<PromptTemplate>& templates,
                                           const std::string& language, std::size_t variants_per_topic,
                                           std::uint64_t seed, std::size_t n_respondents = 10);

}  // namespace valign
