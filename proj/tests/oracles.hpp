#pragma once

// Reference computations written independently of the library, shared by
// the unit tests and the acceptance runner.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "valign/design.hpp"
#include "valign/ground_truth.hpp"
#include "valign/random.hpp"

namespace oracle {

/// Weighted share of supporters per question, summed in respondent order.
inline std::map<std::string, double> vps(const valign::SurveyDataset& ds, const valign::PopulationSpec& pop) {
  std::map<std::string, double> out;
  for (const auto& q : ds.questions) {
    long double num = 0, den = 0;
    for (const auto& r : ds.respondents) {
      if (!pop.matches(r)) continue;
      const auto it = r.answers.find(q.question_id);
      if (it == r.answers.end()) continue;
      const int raw = it->second;
      if (q.missing_codes.count(raw) || raw < q.scale_min || raw > q.scale_max) continue;
      int s;
      if (q.scale_kind == valign::ScaleKind::binary_agree) {
        if (raw == q.scale_min) {
          s = 1;
        } else if (raw == q.scale_max) {
          s = 0;
        } else {
          continue;
        }
      } else {
        const int twice = 2 * raw, mid = q.scale_min + q.scale_max;
        if (twice == mid) continue;
        s = twice > mid ? 1 : 0;
      }
      if (q.reverse_scored) s = 1 - s;
      den += r.weight;
      num += r.weight * s;
    }
    if (den > 0) out[q.question_id] = static_cast<double>(num / den);
  }
  return out;
}

/// Ranks by counting smaller values and half the other ties, then Pearson.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<long double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      long double less = 0, same = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (v[j] < v[i]) less += 1;
        if (j != i && v[j] == v[i]) same += 1;
      }
      r[i] = 1 + less + same / 2;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

/// Solves X'X b = X'y by Gaussian elimination with partial pivoting in
/// long double.
inline std::vector<double> normal_equations(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const auto p = static_cast<std::size_t>(x.cols());
  std::vector<std::vector<long double>> a(p, std::vector<long double>(p + 1, 0));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      long double s = 0;
      for (Eigen::Index r = 0; r < x.rows(); ++r) s += static_cast<long double>(x(r, i)) * x(r, j);
      a[i][j] = s;
    }
    long double s = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) s += static_cast<long double>(x(r, i)) * y(r);
    a[i][p] = s;
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= p; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> b(p);
  for (std::size_t i = 0; i < p; ++i) b[i] = static_cast<double>(a[i][p] / a[i][i]);
  return b;
}

struct VarianceComponents {
  double sigma2 = 0.0;
  double sigma_alpha2 = 0.0;
};

/// REML estimates for a balanced one-way random-intercept layout, from the
/// ANOVA mean squares. When MSB <= MSW the maximum sits on the boundary
/// sigma_alpha2 = 0, where sigma2 is the pooled total mean square.
inline VarianceComponents balanced_reml(const std::vector<std::vector<double>>& groups) {
  const std::size_t j = groups.size();
  const std::size_t n = groups.front().size();
  long double grand = 0;
  std::vector<long double> means(j);
  for (std::size_t g = 0; g < j; ++g) {
    long double s = 0;
    for (double v : groups[g]) s += v;
    means[g] = s / n;
    grand += s;
  }
  grand /= static_cast<long double>(j * n);
  long double ssb = 0, ssw = 0;
  for (std::size_t g = 0; g < j; ++g) {
    ssb += n * (means[g] - grand) * (means[g] - grand);
    for (double v : groups[g]) ssw += (v - means[g]) * (v - means[g]);
  }
  const long double msb = ssb / (j - 1);
  const long double msw = ssw / (j * (n - 1));
  if (msb > msw) return {static_cast<double>(msw), static_cast<double>((msb - msw) / n)};
  return {static_cast<double>((ssb + ssw) / (j * n - 1)), 0.0};
}

/// Balanced one-way layout: intercept-only design, J groups of n rows.
inline valign::DesignMatrix balanced_design(std::size_t groups, std::size_t per_group, double mu,
                                            double sigma_alpha2, double sigma2, std::uint64_t seed,
                                            std::vector<std::vector<double>>* values = nullptr) {
  valign::Rng rng(seed);
  valign::DesignMatrix d;
  const auto n = static_cast<Eigen::Index>(groups * per_group);
  d.x = Eigen::MatrixXd::Ones(n, 1);
  d.y.resize(n);
  d.columns = {"(Intercept)"};
  if (values) values->assign(groups, {});
  Eigen::Index row = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const double alpha = rng.normal(0.0, std::sqrt(sigma_alpha2));
    for (std::size_t i = 0; i < per_group; ++i, ++row) {
      d.y(row) = mu + alpha + rng.normal(0.0, std::sqrt(sigma2));
      d.groups.push_back("g" + std::to_string(g));
      if (values) (*values)[g].push_back(d.y(row));
    }
  }
  return d;
}

/// Intercept plus `covariates` standard-normal columns, Gaussian noise,
/// and an optional random intercept per group of `per_group` rows.
inline valign::DesignMatrix planted_design(std::size_t rows, const std::vector<double>& beta, double sigma,
                                           std::uint64_t seed, std::size_t per_group = 0,
                                           double sigma_alpha = 0.0) {
  valign::Rng rng(seed);
  valign::DesignMatrix d;
  const auto n = static_cast<Eigen::Index>(rows);
  const auto p = static_cast<Eigen::Index>(beta.size());
  d.x.resize(n, p);
  d.y.resize(n);
  d.columns.push_back("(Intercept)");
  for (Eigen::Index j = 1; j < p; ++j) d.columns.push_back("x" + std::to_string(j));
  double alpha = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (per_group && i % static_cast<Eigen::Index>(per_group) == 0) alpha = rng.normal(0.0, sigma_alpha);
    d.x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < p; ++j) d.x(i, j) = rng.normal();
    double mean = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) mean += d.x(i, j) * beta[static_cast<std::size_t>(j)];
    d.y(i) = mean + alpha + (sigma > 0 ? rng.normal(0.0, sigma) : 0.0);
    if (per_group) d.groups.push_back("g" + std::to_string(i / static_cast<Eigen::Index>(per_group)));
  }
  return d;
}

}  // namespace oracle
