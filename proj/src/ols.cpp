#include "valign/ols.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace valign {

namespace {

double two_sided_t(double t, double df) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

OlsDiagnostics diagnose(const Eigen::MatrixXd& x, const Eigen::VectorXd& e) {
  OlsDiagnostics d;
  const auto n = static_cast<double>(e.size());
  const double mean = e.mean();
  const Eigen::ArrayXd c = e.array() - mean;
  const double m2 = c.square().mean();
  if (m2 > 0.0) {
    d.residual_skewness = c.cube().mean() / std::pow(m2, 1.5);
    d.residual_excess_kurtosis = c.square().square().mean() / (m2 * m2) - 3.0;
  }
  // Koenker's form: n * R^2 of squared residuals regressed on the design.
  const Eigen::VectorXd u = e.array().square().matrix();
  const double u_mean = u.mean();
  const double sst = (u.array() - u_mean).square().sum();
  d.breusch_pagan_df = x.cols() > 0 ? static_cast<std::size_t>(x.cols() - 1) : 0;
  if (sst > 0.0 && d.breusch_pagan_df > 0) {
    const Eigen::VectorXd g = x.colPivHouseholderQr().solve(u);
    const double sse = (u - x * g).squaredNorm();
    const double r2 = std::max(0.0, 1.0 - sse / sst);
    d.breusch_pagan = n * r2;
    boost::math::chi_squared chi(static_cast<double>(d.breusch_pagan_df));
    d.breusch_pagan_p = boost::math::cdf(boost::math::complement(chi, d.breusch_pagan));
  }
  return d;
}

}  // namespace

OlsFit fit_ols(const DesignMatrix& design, const OlsOptions& options) {
  check_full_rank(design);
  const auto& x = design.x;
  const auto& y = design.y;
  const auto n = x.rows();
  const auto p = x.cols();

  OlsFit fit;
  fit.n = static_cast<std::size_t>(n);
  fit.df_residual = static_cast<std::size_t>(n - p);
  fit.robust_se = options.robust_se;

  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  fit.beta = qr.solve(y);
  fit.residuals = y - x * fit.beta;
  // One refinement step keeps residuals orthogonal to X at rounding level.
  const Eigen::VectorXd delta = qr.solve(fit.residuals);
  fit.beta += delta;
  fit.residuals = y - x * fit.beta;

  const double rss = fit.residuals.squaredNorm();
  fit.sigma2 = rss / static_cast<double>(fit.df_residual);
  const double y_mean = y.mean();
  const double tss = (y.array() - y_mean).square().sum();
  fit.r_squared = tss > 0.0 ? 1.0 - rss / tss : 1.0;

  // (X'X)^-1 = R^-1 R^-T
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd xtx_inv = r_inv * r_inv.transpose();
  Eigen::MatrixXd cov;
  if (options.robust_se) {
    const Eigen::MatrixXd meat = x.transpose() * fit.residuals.array().square().matrix().asDiagonal() * x;
    cov = xtx_inv * meat * xtx_inv * (static_cast<double>(n) / static_cast<double>(fit.df_residual));
  } else {
    cov = fit.sigma2 * xtx_inv;
  }

  const double df = static_cast<double>(fit.df_residual);
  for (Eigen::Index j = 0; j < p; ++j) {
    CoefficientEstimate c;
    c.term = design.columns[static_cast<std::size_t>(j)];
    c.estimate = fit.beta(j);
    c.se = std::sqrt(std::max(0.0, cov(j, j)));
    if (c.se > 0.0) {
      c.stat = c.estimate / c.se;
    } else {
      c.stat = c.estimate == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), c.estimate);
    }
    c.p = (c.se == 0.0 && c.estimate == 0.0) ? 1.0 : two_sided_t(c.stat, df);
    fit.coefficients.push_back(std::move(c));
  }
  fit.diagnostics = diagnose(x, fit.residuals);
  return fit;
}

}  // namespace valign
