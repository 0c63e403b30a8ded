#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "valign/lmer.hpp"
#include "valign/ols.hpp"

namespace valign {

struct CoefficientRow {
  std::string term;
  double estimate = 0.0;
  double se = 0.0;
  double stat = 0.0;
  double p = 1.0;
  bool significant = false;  // p < .05
};

/// Filters: "all", "us_interactions" (US x model x language terms),
/// "capability", "consistency". Anything else is a ValidationError.
std::vector<CoefficientRow> coefficient_report(const std::vector<CoefficientEstimate>& estimates,
                                               const std::string& filter);
std::vector<CoefficientRow> coefficient_report(const OlsFit& fit, const std::string& filter);
std::vector<CoefficientRow> coefficient_report(const LmerFit& fit, const std::string& filter);

void write_coefficients_csv(std::ostream& out, const std::vector<CoefficientRow>& rows);

nlohmann::json fit_metadata(const LmerFit& fit, const DesignMatrix& design);
nlohmann::json fit_metadata(const OlsFit& fit, const DesignMatrix& design);

}  // namespace valign
