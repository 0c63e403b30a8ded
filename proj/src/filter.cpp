#include "valign/filter.hpp"

#include <array>
#include <cctype>

#include <fmt/format.h>

#include "valign/language_id.hpp"

namespace valign {

namespace {

constexpr std::array<std::string_view, 14> kRespondentWords = {
    "respondent", "person",    "participant", "interviewee", "deltager", "respondenten", "persoon",
    "deelnemer",  "respondente", "pessoa",    "participante", "entrevistado", "entrevistada", "svarperson"};

constexpr std::array<std::string_view, 4> kUtf8Bullets = {"\xE2\x80\xA2", "\xE2\x80\x93", "\xE2\x80\x94",
                                                         "\xC2\xB7"};

bool is_space(char c) { return c == ' ' || c == '\t'; }

std::size_t skip_spaces(std::string_view s, std::size_t i) {
  while (i < s.size() && is_space(s[i])) ++i;
  return i;
}

std::size_t skip_bold(std::string_view s, std::size_t i) {
  while (i < s.size() && (s[i] == '*' || s[i] == '_')) ++i;
  return i;
}

bool boundary(std::string_view s, std::size_t i) { return i >= s.size() || is_space(s[i]); }

// "Respondent 3:" / "Person 3 -" / "Deltager:" at position i; returns end.
std::optional<std::size_t> respondent_label(std::string_view s, std::size_t i) {
  for (auto word : kRespondentWords) {
    if (s.size() - i < word.size()) continue;
    bool match = true;
    for (std::size_t k = 0; k < word.size(); ++k) {
      if (std::tolower(static_cast<unsigned char>(s[i + k])) != word[k]) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    std::size_t j = i + word.size();
    if (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) continue;
    j = skip_spaces(s, j);
    const std::size_t digits_start = j;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    const bool has_digits = j > digits_start;
    j = skip_bold(s, j);
    if (j < s.size() && (s[j] == ':' || s[j] == '.' || s[j] == ')' || s[j] == '-')) {
      ++j;
    } else if (!has_digits) {
      continue;
    }
    j = skip_bold(s, j);
    return skip_spaces(s, j);
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::size_t> enumeration_marker_length(std::string_view line) {
  std::size_t i = skip_spaces(line, 0);
  std::optional<std::size_t> end;

  const std::size_t after_bold = skip_bold(line, i);
  std::size_t j = i;
  while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
  if (j > i && j - i <= 3 && j < line.size() &&
      (line[j] == '.' || line[j] == ')' || line[j] == ':' || line[j] == '-') && boundary(line, j + 1)) {
    end = j + 1;
  } else if (i < line.size() && line[i] == '(') {
    std::size_t k = i + 1;
    while (k < line.size() && std::isdigit(static_cast<unsigned char>(line[k]))) ++k;
    if (k > i + 1 && k < line.size() && line[k] == ')' && boundary(line, k + 1)) end = k + 1;
  } else if (i < line.size() && (line[i] == '-' || line[i] == '*' || line[i] == '+') && boundary(line, i + 1)) {
    end = i + 1;
  } else {
    for (auto bullet : kUtf8Bullets) {
      if (line.substr(i, bullet.size()) == bullet && boundary(line, i + bullet.size())) {
        end = i + bullet.size();
        break;
      }
    }
  }

  if (end) {
    std::size_t k = skip_spaces(line, *end);
    if (auto label = respondent_label(line, skip_bold(line, k))) k = *label;
    end = k;
  } else if (auto label = respondent_label(line, after_bold)) {
    end = label;
  }
  if (!end) return std::nullopt;
  std::size_t k = skip_spaces(line, *end);
  if (k >= line.size()) return std::nullopt;  // marker with no content
  return k;
}

std::size_t count_enumerated_units(std::string_view text) {
  std::size_t n = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (enumeration_marker_length(line)) ++n;
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return n;
}

GenerationRecord filter_record(GenerationRecord record, const std::string& expected_language,
                               const FormatRules& rules) {
  if (record.status == RecordStatus::provider_error) return record;
  const std::size_t units = count_enumerated_units(record.response_text);
  if (units < rules.min_units) {
    record.status = RecordStatus::rejected_format;
    record.rejection_detail =
        fmt::format("found {} enumerated answer units, at least {} required", units, rules.min_units);
    return record;
  }
  const auto& lid = LanguageIdentifier::instance();
  if (lid.supports(expected_language)) {
    const auto guess = lid.identify(record.response_text);
    if (!guess.language.empty() && guess.language != primary_language(expected_language) &&
        guess.confidence > rules.language_threshold) {
      record.status = RecordStatus::rejected_language;
      record.rejection_detail = fmt::format("detected language {} (confidence {:.3f}), expected {}",
                                            guess.language, guess.confidence, expected_language);
      return record;
    }
  }
  record.status = RecordStatus::valid;
  record.rejection_detail.reset();
  return record;
}

}  // namespace valign
