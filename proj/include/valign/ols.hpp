#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "valign/design.hpp"

namespace valign {

struct CoefficientEstimate {
  std::string term;
  double estimate = 0.0;
  double se = 0.0;
  double stat = 0.0;  // t for OLS, z for the mixed model
  double p = 1.0;     // two-sided
};

struct OlsDiagnostics {
  double residual_skewness = 0.0;
  double residual_excess_kurtosis = 0.0;
  double breusch_pagan = 0.0;  // Koenker studentized n * R^2
  std::size_t breusch_pagan_df = 0;
  double breusch_pagan_p = 1.0;
};

struct OlsOptions {
  bool robust_se = false;  // HC1 sandwich errors instead of classical
};

struct OlsFit {
  std::vector<CoefficientEstimate> coefficients;
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
  double sigma2 = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;
  std::size_t df_residual = 0;
  bool robust_se = false;
  OlsDiagnostics diagnostics;
};

/// Householder-QR least squares with two-sided t tests.
/// Errors: RankDeficiencyError on a dependent column or n <= p.
OlsFit fit_ols(const DesignMatrix& design, const OlsOptions& options = {});

}  // namespace valign
