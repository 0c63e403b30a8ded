#include "valign/language_id.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

#include "valign/stance_lexicon.hpp"

namespace valign {

namespace {

constexpr std::string_view kEnglish =
#include "corpora/en.inc"
    ;
constexpr std::string_view kDanish =
#include "corpora/da.inc"
    ;
constexpr std::string_view kDutch =
#include "corpora/nl.inc"
    ;
constexpr std::string_view kPortuguese =
#include "corpora/pt.inc"
    ;

constexpr double kSmoothing = 0.5;

// Lowercased letters separated by single spaces, padded at both ends.
// Bytes >= 0x80 are kept so multi-byte UTF-8 letters stay intact.
std::string normalize(std::string_view text) {
  std::string out = " ";
  for (unsigned char c : text) {
    const bool letter = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80 || c == '\'';
    if (letter) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (out.back() != ' ') {
      out.push_back(' ');
    }
  }
  if (out.back() != ' ') out.push_back(' ');
  return out;
}

template <typename F>
void for_each_trigram(const std::string& norm, F&& f) {
  for (std::size_t i = 0; i + 3 <= norm.size(); ++i) {
    const auto a = static_cast<unsigned char>(norm[i]);
    const auto b = static_cast<unsigned char>(norm[i + 1]);
    const auto c = static_cast<unsigned char>(norm[i + 2]);
    if (a == ' ' && b == ' ') continue;
    f((static_cast<std::uint32_t>(a) << 16) | (static_cast<std::uint32_t>(b) << 8) | c);
  }
}

}  // namespace

struct LanguageIdentifier::Profile {
  std::unordered_map<std::uint32_t, double> counts;
  double total = 0.0;
};

std::string primary_language(std::string_view tag) {
  std::string out;
  for (char c : tag) {
    if (c == '-' || c == '_') break;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

LanguageIdentifier::LanguageIdentifier() {
  const std::pair<std::string, std::string_view> corpora[] = {
      {"en", kEnglish}, {"da", kDanish}, {"nl", kDutch}, {"pt", kPortuguese}};
  for (const auto& [lang, corpus] : corpora) {
    std::string text(corpus);
    if (const auto* lex = find_lexicon(lang)) {
      text += "\n" + lex->preface;
      for (const auto* bank : {&lex->pro_phrases, &lex->con_phrases, &lex->null_phrases}) {
        for (const auto& p : *bank) text += "\n" + p;
      }
    }
    Profile profile;
    for_each_trigram(normalize(text), [&](std::uint32_t t) {
      profile.counts[t] += 1.0;
      profile.total += 1.0;
    });
    languages_.push_back(lang);
    profiles_.push_back(std::move(profile));
  }
  std::unordered_set<std::uint32_t> vocabulary;
  for (const auto& p : profiles_) {
    for (const auto& [t, c] : p.counts) vocabulary.insert(t);
  }
  vocabulary_size_ = static_cast<double>(vocabulary.size()) + 1.0;
}

LanguageIdentifier::~LanguageIdentifier() = default;

const LanguageIdentifier& LanguageIdentifier::instance() {
  static const LanguageIdentifier id;
  return id;
}

bool LanguageIdentifier::supports(std::string_view language) const {
  const auto p = primary_language(language);
  return std::find(languages_.begin(), languages_.end(), p) != languages_.end();
}

LanguageGuess LanguageIdentifier::identify(std::string_view text) const {
  const double v = vocabulary_size_;

  std::vector<double> loglik(profiles_.size(), 0.0);
  std::size_t n = 0;
  for_each_trigram(normalize(text), [&](std::uint32_t t) {
    ++n;
    for (std::size_t k = 0; k < profiles_.size(); ++k) {
      const auto& p = profiles_[k];
      const auto it = p.counts.find(t);
      const double c = it == p.counts.end() ? 0.0 : it->second;
      loglik[k] += std::log((c + kSmoothing) / (p.total + kSmoothing * v));
    }
  });
  if (n == 0) return {};
  const auto best = static_cast<std::size_t>(std::max_element(loglik.begin(), loglik.end()) - loglik.begin());
  double denom = 0.0;
  for (double l : loglik) denom += std::exp(l - loglik[best]);
  return {languages_[best], 1.0 / denom};
}

}  // namespace valign
