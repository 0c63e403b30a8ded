#include "valign/coefficients.hpp"

#include <cmath>
#include <ostream>

#include "valign/csv.hpp"
#include "valign/errors.hpp"

namespace valign {

namespace {

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

bool keep(const std::string& term, const std::string& filter) {
  if (filter == "all") return true;
  if (filter == "us_interactions") return starts_with(term, "US:");
  if (filter == "capability") return starts_with(term, "capability:");
  if (filter == "consistency") return starts_with(term, "consistency:");
  throw ValidationError("unknown contrast filter '" + filter + "' (use all, us_interactions, capability, consistency)");
}

nlohmann::json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

std::vector<CoefficientRow> coefficient_report(const std::vector<CoefficientEstimate>& estimates,
                                               const std::string& filter) {
  keep("", filter);
  std::vector<CoefficientRow> out;
  for (const auto& e : estimates) {
    if (!keep(e.term, filter)) continue;
    out.push_back({e.term, e.estimate, e.se, e.stat, e.p, e.p < 0.05});
  }
  return out;
}

std::vector<CoefficientRow> coefficient_report(const OlsFit& fit, const std::string& filter) {
  return coefficient_report(fit.coefficients, filter);
}

std::vector<CoefficientRow> coefficient_report(const LmerFit& fit, const std::string& filter) {
  return coefficient_report(fit.fixed_effects, filter);
}

void write_coefficients_csv(std::ostream& out, const std::vector<CoefficientRow>& rows) {
  csv::write_row(out, {"term", "estimate", "se", "stat", "p", "significant"});
  for (const auto& r : rows) {
    csv::write_row(out, {r.term, csv::format_double(r.estimate), csv::format_double(r.se),
                         csv::format_double(r.stat), csv::format_double(r.p), r.significant ? "*" : ""});
  }
}

nlohmann::json fit_metadata(const LmerFit& fit, const DesignMatrix& design) {
  nlohmann::json blups = nlohmann::json::object();
  for (const auto& [g, b] : fit.blups) blups[g] = json_number(b);
  return {
      {"model", "random-intercept linear mixed model (profiled REML)"},
      {"formula", design.formula},
      {"n", fit.n},
      {"groups", fit.n_groups},
      {"fixed_effects", design.columns.size()},
      {"lambda", json_number(fit.lambda)},
      {"sigma2", json_number(fit.sigma2)},
      {"sigma_alpha2", json_number(fit.sigma_alpha2)},
      {"mu_alpha", json_number(fit.mu_alpha)},
      {"loglik_reml", json_number(fit.loglik_reml)},
      {"converged", fit.converged},
      {"note", fit.note},
      {"df_method", "Wald z (normal approximation; no Satterthwaite correction)"},
      {"blups", blups},
  };
}

nlohmann::json fit_metadata(const OlsFit& fit, const DesignMatrix& design) {
  return {
      {"model", "ordinary least squares"},
      {"formula", design.formula},
      {"n", fit.n},
      {"parameters", design.columns.size()},
      {"df_residual", fit.df_residual},
      {"sigma2", json_number(fit.sigma2)},
      {"r_squared", json_number(fit.r_squared)},
      {"se_method", fit.robust_se ? "HC1 heteroskedasticity-robust" : "classical"},
      {"df_method", "Student t on residual df"},
      {"diagnostics",
       {{"residual_skewness", json_number(fit.diagnostics.residual_skewness)},
        {"residual_excess_kurtosis", json_number(fit.diagnostics.residual_excess_kurtosis)},
        {"breusch_pagan", json_number(fit.diagnostics.breusch_pagan)},
        {"breusch_pagan_df", fit.diagnostics.breusch_pagan_df},
        {"breusch_pagan_p", json_number(fit.diagnostics.breusch_pagan_p)}}},
  };
}

}  // namespace valign
