#pragma once

// Manifest-tracked stages: ingest, baseline, elicit, annotate, score,
// analyze, report, plus the standalone validate-judge.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "valign/config.hpp"
#include "valign/ground_truth.hpp"
#include "valign/prompts.hpp"

namespace valign {

/// A stage could not run or did not finish (missing upstream artifacts,
/// I/O, provider-side failure). Maps to exit code 2.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StageOptions {
  std::filesystem::path config_path;
  std::filesystem::path run_dir;
  std::optional<std::uint64_t> seed;  // overrides the config seed
  bool force = false;
  std::ostream* log = nullptr;  // progress messages; nullptr → std::clog
};

const std::vector<std::string>& stage_names();
const std::vector<std::string>& upstream_of(const std::string& stage);

/// Runs one stage. Throws ValidationError (bad config, changed config
/// without --force) or StageError.
void run_stage(const std::string& stage, const StageOptions& options);

/// Exit code for the CLI: 0 success, 1 validation error, 2 stage failure.
int run_stage_exit_code(const std::string& stage, const StageOptions& options, std::ostream& err);

/// The elicitation plan for one (model, language, run).
/// record_id = "model|lang|r<run>|question|v<variant>".
std::vector<ElicitTask> plan_condition(const std::vector<QuestionSpec>& questions,
                                       const std::vector<PromptTemplate>& templates, const AuditConfig& config,
                                       const std::string& model_id, const std::string& language, std::size_t run,
                                       std::uint64_t seed);

std::size_t variants_for(const AuditConfig& config, std::size_t n_topics);

}  // namespace valign
