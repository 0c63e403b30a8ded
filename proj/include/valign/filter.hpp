#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "valign/records.hpp"

namespace valign {

struct FormatRules {
  std::size_t min_units = 2;
  double language_threshold = 0.7;
};

/// Length of the enumeration marker at the start of `line` (including a
/// following "Respondent 3:"-style label and whitespace), or nullopt when the
/// line does not open an answer unit.
std::optional<std::size_t> enumeration_marker_length(std::string_view line);

std::size_t count_enumerated_units(std::string_view text);

/// Classifies a record as valid / rejected_format / rejected_language.
/// provider_error records are returned unchanged. Idempotent.
GenerationRecord filter_record(GenerationRecord record, const std::string& expected_language,
                               const FormatRules& rules = {});

}  // namespace valign
