#pragma once

// Design matrices for the capability/alignment mixed model and the
// US-bias regression.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "valign/scoring.hpp"

namespace valign {

struct DesignMatrix {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> columns;
  std::vector<std::string> groups;  // per-row grouping label (mixed model only)
  std::string formula;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
};

/// Throws RankDeficiencyError naming the first column that is a linear
/// combination of the columns before it.
void check_full_rank(const DesignMatrix& design, double tolerance = 1e-10);

/// Alignment of one run of a condition against one target.
struct AlignmentRun {
  std::string model_id;
  std::string language;
  PopulationSpec::Kind level = PopulationSpec::Kind::global;
  std::string target;
  std::string run;
  double rho = 0.0;
  std::size_t n_topics = 0;
};

void write_alignment_runs_csv(std::ostream& out, const std::vector<AlignmentRun>& rows);
std::vector<AlignmentRun> read_alignment_runs_csv(const std::filesystem::path& path);

class CapabilityTable {
 public:
  static CapabilityTable load(const std::filesystem::path& path);
  /// Throws ValidationError on a duplicate (model, language) pair.
  void add(const std::string& model_id, const std::string& language, double capability);
  std::optional<double> find(const std::string& model_id, const std::string& language) const;
  std::size_t size() const { return scores_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, double> scores_;
};

struct Rq1Options {
  bool standardize = false;  // z-score capability and consistency before building columns
};

/// Columns: intercept (random-intercept mean), consistency x language, and
/// capability x family x language; groups are model ids.
DesignMatrix build_rq1_design(const std::vector<AlignmentRun>& alignment,
                              const std::vector<ConsistencyScore>& consistency, const CapabilityTable& capability,
                              const std::map<std::string, std::string>& family_of_model,
                              const Rq1Options& options = {});

/// language -> local country codes.
using LocalCountryMap = std::map<std::string, std::vector<std::string>>;

LocalCountryMap default_local_countries();
LocalCountryMap load_local_countries(const std::filesystem::path& path);

struct Rq2Options {
  std::string us_country = "US";
  std::string baseline_model = "random";
};

/// Country-level rows whose target is the US (US = 1) or a local country of
/// the row's language (US = 0). Baseline-model rows form the base case.
/// Columns: intercept, US, model x language, US x model x language.
DesignMatrix build_rq2_design(const std::vector<AlignmentRun>& alignment, const LocalCountryMap& local,
                              const Rq2Options& options = {});

}  // namespace valign
