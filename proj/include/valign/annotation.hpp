#pragma once

// Substatement splitting, stance judging and judge validation.

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "valign/backend.hpp"
#include "valign/elicit.hpp"
#include "valign/ground_truth.hpp"
#include "valign/records.hpp"

namespace valign {

enum class Stance { pro = 0, con = 1, null = 2 };

std::string to_string(Stance stance);
std::optional<Stance> parse_stance(std::string_view text);

struct SubStatement {
  std::string record_id;
  std::size_t index = 0;
  std::string text;
};

struct StanceLabel {
  std::string record_id;
  std::size_t index = 0;
  Stance label = Stance::null;
};

struct JudgeContext {
  std::string topic_text;
  std::string pro_statement;
  std::string con_statement;

  static JudgeContext from(const QuestionSpec& q) { return {q.topic_text, q.pro_statement, q.con_statement}; }
};

/// One answer unit per enumerated line; markers stripped, continuation
/// lines joined, blank line closes a unit. Throws std::logic_error when no
/// unit is found (a valid record always has at least two).
std::vector<SubStatement> split_statements(const GenerationRecord& record);

class StanceJudge {
 public:
  virtual ~StanceJudge() = default;
  /// nullopt: the judge could not be reached; the item stays unlabeled.
  virtual std::optional<Stance> judge(const SubStatement& statement, const JudgeContext& context,
                                      std::vector<std::string>& diagnostics) = 0;
};

/// Offline judge: token overlap with the pro and con exemplars plus a
/// multilingual stance lexicon, with negation flipping. Ties are null.
class RuleBasedJudge : public StanceJudge {
 public:
  std::optional<Stance> judge(const SubStatement& statement, const JudgeContext& context,
                              std::vector<std::string>& diagnostics) override;
};

/// Instruction sent to a remote judge; placeholders {topic}, {pro}, {con},
/// {statement}.
extern const char* const kJudgeInstructionTemplate;

std::string render_judge_prompt(const SubStatement& statement, const JudgeContext& context);

/// Maps free-form judge output to a label; anything unrecognised is null
/// and noted in diagnostics.
Stance coerce_judge_output(std::string_view output, std::vector<std::string>& diagnostics);

class RemoteJudge : public StanceJudge {
 public:
  RemoteJudge(GenerationBackend& backend, std::string model_id, RunConfig run_config)
      : backend_(backend), model_id_(std::move(model_id)), run_config_(run_config) {}

  std::optional<Stance> judge(const SubStatement& statement, const JudgeContext& context,
                              std::vector<std::string>& diagnostics) override;

 private:
  GenerationBackend& backend_;
  std::string model_id_;
  RunConfig run_config_;
};

/// Validates context and delegates to the judge.
std::optional<StanceLabel> judge_stance(StanceJudge& judge, const SubStatement& statement,
                                        const JudgeContext& context, std::vector<std::string>& diagnostics);

struct GoldItem {
  std::string statement;
  std::string topic_id;
  Stance label = Stance::null;
};

std::vector<GoldItem> load_gold(const std::filesystem::path& path);

struct ValidationReport {
  std::size_t n_items = 0;      // labeled items compared
  std::size_t n_unlabeled = 0;  // judge unreachable
  double agreement = 0.0;
  double vps_mae = 0.0;
  std::size_t n_records = 0;  // topic groups entering vps_mae
  /// Agreement restricted to items whose gold label is pro or con; the
  /// annotation reliability used for attenuation correction.
  double reliability = 0.0;
  std::array<std::array<std::size_t, 3>, 3> confusion{};  // [gold][judge], order pro, con, null
  std::vector<std::string> diagnostics;
};

ValidationReport validate_judge(const std::vector<GoldItem>& gold, StanceJudge& judge,
                                const std::vector<QuestionSpec>& questions);

std::string to_json_text(const ValidationReport& report);

void write_labels(const std::filesystem::path& path, const std::vector<StanceLabel>& labels);
std::vector<StanceLabel> read_labels(const std::filesystem::path& path);

}  // namespace valign
