#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace valign {

struct LanguageGuess {
  std::string language;  // empty when the text has no usable trigrams
  double confidence = 0.0;
};

/// Character-trigram naive Bayes over small bundled profiles for
/// en, da, nl and pt.
class LanguageIdentifier {
 public:
  static const LanguageIdentifier& instance();

  LanguageGuess identify(std::string_view text) const;
  bool supports(std::string_view language) const;
  const std::vector<std::string>& languages() const { return languages_; }

 private:
  LanguageIdentifier();
  struct Profile;
  std::vector<std::string> languages_;
  std::vector<Profile> profiles_;
  double vocabulary_size_ = 0.0;

 public:
  ~LanguageIdentifier();
};

/// Primary subtag, lowercased ("pt-BR" -> "pt").
std::string primary_language(std::string_view tag);

}  // namespace valign
