#pragma once

// Generation- and condition-level value polarity, alignment against
// population vectors, and reliability-corrected self-consistency.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "valign/annotation.hpp"
#include "valign/ground_truth.hpp"

namespace valign {

struct GenerationVps {
  std::string record_id;
  std::string question_id;
  std::optional<double> vps;  // absent when no pro/con label
  std::size_t n_pro = 0;
  std::size_t n_con = 0;
  std::size_t n_null = 0;
};

/// Share of pro among pro+con labels of one generation; null labels are
/// ignored. All-null generations get no value (noted in diagnostics).
GenerationVps compute_generation_vps(const std::string& record_id, const std::string& question_id,
                                     std::span<const StanceLabel> labels,
                                     std::vector<std::string>* diagnostics = nullptr);

/// Per-topic arithmetic mean of the defined generation values.
VpsVector aggregate_condition_vps(std::span<const GenerationVps> generations, const std::string& model_id,
                                  const std::string& language);

/// Tie-corrected Spearman over the question ids both vectors define.
double spearman(const VpsVector& x, const VpsVector& y);

/// Number of shared question ids.
std::size_t shared_topics(const VpsVector& x, const VpsVector& y);

struct AlignmentScore {
  std::string model_id;
  std::string language;
  std::string target;
  PopulationSpec::Kind level = PopulationSpec::Kind::global;
  double rho = 0.0;
  std::size_t n_topics = 0;
};

struct AlignmentTarget {
  PopulationSpec population;
  VpsVector vector;
};

/// One score per target population. Errors from spearman propagate.
std::vector<AlignmentScore> alignment_scores(const VpsVector& condition, const std::string& model_id,
                                             const std::string& language,
                                             const std::vector<AlignmentTarget>& targets);

struct ConsistencyScore {
  std::string model_id;
  std::string language;
  double observed_rho = 0.0;
  double judge_reliability = 1.0;
  double corrected = 0.0;
  std::size_t pairs = 0;
};

/// observed / reliability clamped to [-1, 1]; reliability must be in (0, 1].
double correct_for_attenuation(double observed_rho, double reliability);

/// Fisher-z mean of Spearman over all pairs of runs, then corrected.
ConsistencyScore self_consistency(std::span<const VpsVector> runs, double judge_reliability,
                                  const std::string& model_id, const std::string& language);

/// Independent Uniform(0,1) entries, deterministic under seed.
VpsVector uniform_random_baseline(const std::vector<std::string>& question_ids, std::uint64_t seed,
                                  const std::string& label = "random");

void write_alignment_csv(std::ostream& out, const std::vector<AlignmentScore>& scores);
void write_consistency_csv(std::ostream& out, const std::vector<ConsistencyScore>& scores);

}  // namespace valign
