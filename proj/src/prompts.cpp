#include "valign/prompts.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "valign/csv.hpp"
#include "valign/errors.hpp"
#include "valign/language_id.hpp"
#include "valign/random.hpp"

namespace valign {

namespace {

constexpr std::string_view kTopic = "{topic}";
constexpr std::string_view kCount = "{n_respondents}";

std::size_t occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

void replace_once(std::string& s, std::string_view needle, std::string_view value) {
  const auto pos = s.find(needle);
  if (pos != std::string::npos) s.replace(pos, needle.size(), value);
}

}  // namespace

void PromptTemplate::validate() const {
  if (template_id.empty()) throw ValidationError("prompt template with empty template_id");
  if (language.empty()) throw ValidationError("prompt template " + template_id + " has no language");
  for (auto placeholder : {kTopic, kCount}) {
    const auto n = occurrences(body, placeholder);
    if (n != 1) {
      throw ValidationError(fmt::format("prompt template {}: placeholder {} must appear exactly once (found {})",
                                        template_id, placeholder, n));
    }
  }
}

std::vector<PromptTemplate> load_templates(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const std::string label = path.string();
  const auto c_id = table.column("template_id", label);
  const auto c_lang = table.column("language", label);
  const auto c_body = table.column("body", label);
  std::vector<PromptTemplate> out;
  for (const auto& row : table.rows) {
    PromptTemplate t{row.fields[c_id], row.fields[c_lang], row.fields[c_body]};
    try {
      t.validate();
    } catch (const ValidationError& e) {
      throw ParseError(label, row.line, e.what());
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<PromptInstance> render_prompts(const std::vector<QuestionSpec>& questions,
                                           const std::vector<PromptTemplate>& templates,
                                           const std::string& language, std::size_t variants_per_topic,
                                           std::uint64_t seed, std::size_t n_respondents) {
  if (variants_per_topic == 0) throw ValidationError("variants_per_topic must be at least 1");
  std::vector<const PromptTemplate*> pool;
  for (const auto& t : templates) {
    if (t.language == language || primary_language(t.language) == primary_language(language)) {
      t.validate();
      pool.push_back(&t);
    }
  }
  if (pool.empty()) throw ValidationError("no prompt template for language '" + language + "'");
  std::sort(pool.begin(), pool.end(),
            [](const PromptTemplate* a, const PromptTemplate* b) { return a->template_id < b->template_id; });

  std::vector<PromptInstance> out;
  out.reserve(questions.size() * variants_per_topic);
  for (const auto& q : questions) {
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, q.question_id));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t k = 0; k < variants_per_topic; ++k) {
      const auto& t = *pool[order[k % order.size()]];
      std::string text = t.body;
      replace_once(text, kTopic, q.topic_text);
      replace_once(text, kCount, std::to_string(n_respondents));
      if (text.find(kTopic) != std::string::npos || text.find(kCount) != std::string::npos) {
        throw ValidationError("unfilled placeholder in template " + t.template_id);
      }
      out.push_back(PromptInstance{q.question_id, t.template_id, language, k, std::move(text)});
    }
  }
  return out;
}

}  // namespace valign
