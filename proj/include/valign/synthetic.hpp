#pragma once

// Synthetic survey populations and audit directories for offline runs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "valign/random.hpp"

namespace valign::synthetic {

/// n values in (0, 1) with rank correlation near `rho` to `base`
/// (Gaussian copula: z_b = rho z_a + sqrt(1 - rho^2) e).
std::vector<double> correlated_vps(const std::vector<double>& base, double rho, Rng& rng);
std::vector<double> uniform_vps(std::size_t n, Rng& rng);

struct Country {
  std::string code;
  std::string language;
  std::vector<double> vps;  // per question, probability of the pro answer
  std::size_t respondents = 200;
};

struct Survey {
  std::vector<std::string> question_ids;
  std::vector<Country> countries;
  bool vary_weights = true;
};

std::vector<std::string> question_ids(std::size_t n);

/// codebook.csv (binary agree/disagree items coded 1/2, missing 9) and
/// survey.csv. Answers are Bernoulli draws, about 2% coded missing.
void write_survey(const std::filesystem::path& dir, const Survey& survey, std::uint64_t seed);

/// templates.csv with two templates per language.
void write_templates(const std::filesystem::path& dir, const std::vector<std::string>& languages);

/// gold.csv built from the stance lexicon phrases of each language.
void write_gold(const std::filesystem::path& dir, const std::vector<std::string>& languages,
                const std::vector<std::string>& question_ids);

void write_capability(const std::filesystem::path& dir,
                      const std::map<std::pair<std::string, std::string>, double>& scores);

}  // namespace valign::synthetic
