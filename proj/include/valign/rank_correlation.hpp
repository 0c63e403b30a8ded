#pragma once

#include <span>
#include <vector>

namespace valign {

/// Midranks (1-based, ties share the average of the positions they occupy).
std::vector<double> midranks(std::span<const double> values);

/// Pearson correlation; throws UndefinedCorrelationError if either side has
/// zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Tie-corrected Spearman: Pearson correlation of midranks. Requires at
/// least 3 paired values (InsufficientOverlapError otherwise).
double spearman_rho(std::span<const double> x, std::span<const double> y);

}  // namespace valign
