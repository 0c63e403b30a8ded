#include "valign/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "valign/csv.hpp"
#include "valign/errors.hpp"
#include "valign/io.hpp"
#include "valign/stance_lexicon.hpp"

namespace valign::synthetic {

namespace {

double phi(double z) { return boost::math::cdf(boost::math::normal(), z); }
double phi_inv(double p) { return boost::math::quantile(boost::math::normal(), p); }

}  // namespace

std::vector<double> uniform_vps(std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  for (auto& v : out) v = 0.02 + 0.96 * rng.uniform();
  return out;
}

std::vector<double> correlated_vps(const std::vector<double>& base, double rho, Rng& rng) {
  if (rho < -1.0 || rho > 1.0) throw ValidationError("correlation must lie in [-1, 1]");
  std::vector<double> out(base.size());
  const double s = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < base.size(); ++i) {
    const double za = phi_inv(std::clamp(base[i], 1e-6, 1.0 - 1e-6));
    out[i] = std::clamp(phi(rho * za + s * rng.normal()), 0.02, 0.98);
  }
  return out;
}

std::vector<std::string> question_ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(fmt::format("q{:03}", i + 1));
  return out;
}

void write_survey(const std::filesystem::path& dir, const Survey& survey, std::uint64_t seed) {
  std::ostringstream cb;
  csv::write_row(cb, {"question_id", "scale_kind", "scale_min", "scale_max", "reverse_scored", "missing_codes",
                      "topic_text", "pro_statement", "con_statement"});
  for (const auto& q : survey.question_ids) {
    csv::write_row(cb, {q, "binary_agree", "1", "2", "false", "9", "Topic " + q, "Topic " + q + " is acceptable",
                        "Topic " + q + " is not acceptable"});
  }
  io::atomic_write(dir / "codebook.csv", cb.str());

  std::ostringstream sv;
  std::vector<std::string> header{"respondent_id", "country", "language", "weight"};
  header.insert(header.end(), survey.question_ids.begin(), survey.question_ids.end());
  csv::write_row(sv, header);
  Rng rng(seed);
  for (const auto& c : survey.countries) {
    if (c.vps.size() != survey.question_ids.size()) {
      throw ValidationError("synthetic country " + c.code + " has the wrong number of values");
    }
    for (std::size_t r = 0; r < c.respondents; ++r) {
      std::vector<std::string> row{fmt::format("{}-{:05}", c.code, r), c.code, c.language,
                                   csv::format_double(survey.vary_weights ? 0.5 + 1.5 * rng.uniform() : 1.0)};
      for (double p : c.vps) {
        if (rng.bernoulli(0.02)) {
          row.push_back("9");
        } else {
          row.push_back(rng.bernoulli(p) ? "1" : "2");
        }
      }
      csv::write_row(sv, row);
    }
  }
  io::atomic_write(dir / "survey.csv", sv.str());
}

void write_templates(const std::filesystem::path& dir, const std::vector<std::string>& languages) {
  static const std::map<std::string, std::vector<std::string>> bodies{
      {"en",
       {"Imagine you ask {n_respondents} random people about {topic}. List each person's answer on its own "
        "numbered line.",
        "Survey {n_respondents} hypothetical respondents on the topic: {topic}. Give one numbered answer per "
        "respondent."}},
      {"da",
       {"Forestil dig, at du spørger {n_respondents} tilfældige personer om {topic}. Skriv hver persons svar "
        "på en nummereret linje.",
        "Lav en undersøgelse blandt {n_respondents} personer om emnet: {topic}. Giv et nummereret svar per "
        "person."}},
      {"nl",
       {"Stel je voor dat je {n_respondents} willekeurige mensen vraagt naar {topic}. Zet het antwoord van "
        "iedere persoon op een eigen genummerde regel.",
        "Ondervraag {n_respondents} denkbeeldige mensen over het onderwerp: {topic}. Geef per persoon een "
        "genummerd antwoord."}},
      {"pt",
       {"Imagine que você pergunta a {n_respondents} pessoas aleatórias sobre {topic}. Escreva a resposta de "
        "cada pessoa numa linha numerada.",
        "Faça uma pesquisa com {n_respondents} pessoas sobre o tema: {topic}. Dê uma resposta numerada por "
        "pessoa."}},
  };
  std::ostringstream out;
  csv::write_row(out, {"template_id", "language", "body"});
  for (const auto& lang : languages) {
    const auto it = bodies.find(lang);
    if (it == bodies.end()) throw ValidationError("no synthetic template for language " + lang);
    for (std::size_t k = 0; k < it->second.size(); ++k) {
      csv::write_row(out, {fmt::format("{}-{}", lang, k + 1), lang, it->second[k]});
    }
  }
  io::atomic_write(dir / "templates.csv", out.str());
}

void write_gold(const std::filesystem::path& dir, const std::vector<std::string>& languages,
                const std::vector<std::string>& question_ids) {
  if (question_ids.empty()) throw ValidationError("gold set needs at least one question");
  std::ostringstream out;
  csv::write_row(out, {"statement", "topic_id", "label"});
  std::size_t k = 0;
  for (const auto& lang : languages) {
    const auto* lex = find_lexicon(lang);
    if (!lex) throw ValidationError("no lexicon for language " + lang);
    for (const auto* bank : {&lex->pro_phrases, &lex->con_phrases, &lex->null_phrases}) {
      const char* label = bank == &lex->pro_phrases ? "pro" : bank == &lex->con_phrases ? "con" : "null";
      for (const auto& phrase : *bank) {
        csv::write_row(out, {phrase, question_ids[k++ % question_ids.size()], label});
      }
    }
  }
  io::atomic_write(dir / "gold.csv", out.str());
}

void write_capability(const std::filesystem::path& dir,
                      const std::map<std::pair<std::string, std::string>, double>& scores) {
  std::ostringstream out;
  csv::write_row(out, {"model_id", "language", "capability"});
  for (const auto& [k, v] : scores) csv::write_row(out, {k.first, k.second, csv::format_double(v)});
  io::atomic_write(dir / "capability.csv", out.str());
}

}  // namespace valign::synthetic
