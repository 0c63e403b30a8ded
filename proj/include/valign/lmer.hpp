#pragma once

// Linear mixed model with one random intercept per group, fit by REML
// profiled over the variance ratio lambda = sigma_alpha^2 / sigma^2.

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "valign/design.hpp"
#include "valign/ols.hpp"

namespace valign {

struct LmerOptions {
  double log_lambda_min = -12.0;
  double log_lambda_max = 12.0;
  int grid_points = 64;
};

struct LmerFit {
  std::vector<CoefficientEstimate> fixed_effects;  // Wald z tests
  Eigen::VectorXd beta;
  double mu_alpha = 0.0;  // the "(Intercept)" coefficient
  double sigma2 = 0.0;
  double sigma_alpha2 = 0.0;
  double lambda = 0.0;
  std::map<std::string, double> blups;
  double loglik_reml = 0.0;
  bool converged = true;
  std::string note;
  std::size_t n = 0;
  std::size_t n_groups = 0;
};

/// Profiled REML log-likelihood at a fixed ratio (lambda >= 0).
double reml_criterion(const DesignMatrix& design, double lambda);

/// GLS estimates with lambda held fixed.
LmerFit fit_lmer_at_ratio(const DesignMatrix& design, double lambda);

/// Grid over log lambda, Brent refinement around the best grid point, and
/// lambda = 0 as an explicit candidate. A solution at a search bound is
/// returned with converged = false and a note.
LmerFit fit_random_intercept_lmer(const DesignMatrix& design, const LmerOptions& options = {});

}  // namespace valign
