#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace valign {

/// Stance vocabulary for one language: phrase banks the simulator draws from
/// and cue words the rule-based judge scores against.
struct LanguageLexicon {
  std::string language;
  std::string preface;  // contains "{n}"
  std::vector<std::string> pro_phrases;
  std::vector<std::string> con_phrases;
  std::vector<std::string> null_phrases;
  std::vector<std::string> pro_cues;
  std::vector<std::string> con_cues;
  std::vector<std::string> null_markers;  // matched as token sequences
  std::vector<std::string> negations;
  std::vector<std::string> stopwords;
};

const std::vector<LanguageLexicon>& all_lexicons();
/// Lexicon for a language tag (primary subtag match), or nullptr.
const LanguageLexicon* find_lexicon(std::string_view language);

}  // namespace valign
