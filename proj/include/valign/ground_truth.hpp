#pragma once

// Survey ingestion, response binarization and population value-polarity
// vectors.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace valign {

enum class ScaleKind { binary_agree, rating };

struct QuestionSpec {
  std::string question_id;
  ScaleKind scale_kind = ScaleKind::binary_agree;
  int scale_min = 1;
  int scale_max = 2;
  bool reverse_scored = false;
  std::set<int> missing_codes;
  std::string topic_text;
  std::string pro_statement;
  std::string con_statement;

  /// Throws ValidationError when an invariant does not hold.
  void validate() const;
};

struct Respondent {
  std::string respondent_id;
  std::string country;
  std::string language;
  double weight = 1.0;
  std::map<std::string, int> answers;
};

struct SurveyDataset {
  std::vector<Respondent> respondents;
  std::vector<QuestionSpec> questions;
  /// Row-level problems that did not abort the load (e.g. rejected weights).
  std::vector<std::string> diagnostics;

  const QuestionSpec* find_question(const std::string& id) const;
  std::set<std::string> countries() const;
  std::set<std::string> languages() const;
};

struct PopulationSpec {
  enum class Kind { country, language, global };
  Kind kind = Kind::global;
  std::string selector;
  std::string label;

  static PopulationSpec country(std::string code);
  static PopulationSpec language(std::string tag);
  static PopulationSpec global();
  /// Parses "country:DK", "language:da" or "global".
  static PopulationSpec parse(const std::string& text);

  bool matches(const Respondent& r) const;
};

std::string to_string(PopulationSpec::Kind kind);

/// Per-topic value polarity scores for a population or a model condition.
struct VpsVector {
  std::string label;
  std::map<std::string, double> entries;
  std::map<std::string, std::size_t> counts;

  std::size_t size() const { return entries.size(); }
  bool contains(const std::string& q) const { return entries.count(q) != 0; }
};

struct ConsistencyEstimate {
  std::string population;
  double mean_rho = 0.0;
  std::size_t replicates = 0;
  std::vector<double> per_replicate;
  std::vector<std::string> diagnostics;
};

std::vector<QuestionSpec> load_codebook(const std::filesystem::path& codebook_file);
SurveyDataset load_survey(const std::filesystem::path& respondent_file,
                          const std::filesystem::path& codebook_file);

/// 1 = supportive stance, 0 = opposing, nullopt = missing, out of scale,
/// or the exact midpoint of a rating scale.
std::optional<int> binarize_response(int raw_code, const QuestionSpec& spec);

VpsVector compute_vps_vector(const SurveyDataset& dataset, const PopulationSpec& population,
                             const std::vector<QuestionSpec>& questions);

/// Same computation over an explicit list of respondent indices (with
/// repetition), used by resampling.
VpsVector compute_vps_vector(const SurveyDataset& dataset, const std::vector<std::size_t>& members,
                             const std::vector<QuestionSpec>& questions, const std::string& label);

struct ResampleOptions {
  std::size_t replicate_pairs = 100;
  std::size_t sample_size = 0;  // 0: population size
  std::uint64_t seed = 0;
};

ConsistencyEstimate resample_consistency_baseline(const SurveyDataset& dataset,
                                                  const PopulationSpec& population,
                                                  const std::vector<QuestionSpec>& questions,
                                                  const ResampleOptions& options);

void write_vps_csv(std::ostream& out, const std::vector<VpsVector>& vectors);
std::vector<VpsVector> read_vps_csv(const std::filesystem::path& path);

}  // namespace valign
