#include "valign/lmer.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include "valign/errors.hpp"

namespace valign {

namespace {

struct Groups {
  std::vector<std::string> labels;         // sorted
  std::vector<std::size_t> index;          // row -> group
  std::vector<std::size_t> size;
};

Groups group_rows(const DesignMatrix& d) {
  if (d.groups.size() != static_cast<std::size_t>(d.rows())) {
    throw ValidationError(fmt::format("mixed model: {} group labels for {} rows", d.groups.size(), d.rows()));
  }
  std::map<std::string, std::size_t> ids;
  for (const auto& g : d.groups) {
    if (g.empty()) throw ValidationError("mixed model: empty group label");
    ids.emplace(g, 0);
  }
  Groups out;
  for (auto& [label, id] : ids) {
    id = out.labels.size();
    out.labels.push_back(label);
  }
  out.size.assign(out.labels.size(), 0);
  for (const auto& g : d.groups) {
    out.index.push_back(ids[g]);
    ++out.size[ids[g]];
  }
  return out;
}

// Rows premultiplied by V^{-1/2}, where V = I + lambda Z Z'. Per group,
// V_j^{-1/2} = I - a_j 11'/n_j with a_j = 1 - 1/sqrt(1 + lambda n_j).
struct Whitened {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  double log_det_v = 0.0;
};

Whitened whiten(const DesignMatrix& d, const Groups& g, double lambda) {
  const auto p = d.cols();
  const std::size_t k = g.labels.size();
  Eigen::MatrixXd xsum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), p);
  Eigen::VectorXd ysum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const auto j = static_cast<Eigen::Index>(g.index[static_cast<std::size_t>(i)]);
    xsum.row(j) += d.x.row(i);
    ysum(j) += d.y(i);
  }
  std::vector<double> a(k);
  Whitened w;
  for (std::size_t j = 0; j < k; ++j) {
    const double nj = static_cast<double>(g.size[j]);
    const double s = 1.0 + lambda * nj;
    a[j] = (lambda * nj / s) / (1.0 + 1.0 / std::sqrt(s));  // 1 - s^{-1/2}, cancellation-free
    w.log_det_v += std::log1p(lambda * nj);
  }
  w.x = d.x;
  w.y = d.y;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const std::size_t j = g.index[static_cast<std::size_t>(i)];
    const double f = a[j] / static_cast<double>(g.size[j]);
    w.x.row(i) -= f * xsum.row(static_cast<Eigen::Index>(j));
    w.y(i) -= f * ysum(static_cast<Eigen::Index>(j));
  }
  return w;
}

struct Profile {
  Eigen::VectorXd beta;
  Eigen::MatrixXd a_inv;  // (X' V^-1 X)^-1
  double sigma2 = 0.0;
  double loglik = 0.0;
};

Profile profile(const DesignMatrix& d, const Groups& g, double lambda) {
  const Whitened w = whiten(d, g, lambda);
  const auto n = d.rows();
  const auto p = d.cols();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(w.x);
  Profile out;
  out.beta = qr.solve(w.y);
  Eigen::VectorXd r = w.y - w.x * out.beta;
  out.beta += qr.solve(r);
  r = w.y - w.x * out.beta;
  const double df = static_cast<double>(n - p);
  // keep log finite when the fit is exact
  const double rss = std::max(r.squaredNorm(), std::numeric_limits<double>::min() * df);
  out.sigma2 = rss / df;
  const Eigen::MatrixXd rmat = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  double log_det_a = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) log_det_a += 2.0 * std::log(std::fabs(rmat(j, j)));
  out.loglik = -0.5 * (df * std::log(2.0 * std::numbers::pi * out.sigma2) + w.log_det_v + log_det_a + df);
  const Eigen::MatrixXd r_inv = rmat.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  out.a_inv = r_inv * r_inv.transpose();
  return out;
}

void check_inputs(const DesignMatrix& d, const Groups& g) {
  if (g.labels.size() < 2) throw ValidationError("mixed model needs at least 2 groups");
  check_full_rank(d);
}

LmerFit finish(const DesignMatrix& d, const Groups& g, double lambda, const Profile& pr) {
  LmerFit fit;
  fit.n = static_cast<std::size_t>(d.rows());
  fit.n_groups = g.labels.size();
  fit.lambda = lambda;
  fit.beta = pr.beta;
  fit.sigma2 = pr.sigma2;
  fit.sigma_alpha2 = lambda * pr.sigma2;
  fit.loglik_reml = pr.loglik;
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    CoefficientEstimate c;
    c.term = d.columns[static_cast<std::size_t>(j)];
    c.estimate = pr.beta(j);
    c.se = std::sqrt(std::max(0.0, pr.sigma2 * pr.a_inv(j, j)));
    if (c.se > 0.0) {
      c.stat = c.estimate / c.se;
      c.p = std::erfc(std::fabs(c.stat) / std::numbers::sqrt2);
    } else {
      c.stat = c.estimate == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), c.estimate);
      c.p = c.estimate == 0.0 ? 1.0 : 0.0;
    }
    if (c.term == "(Intercept)") fit.mu_alpha = c.estimate;
    fit.fixed_effects.push_back(std::move(c));
  }
  const Eigen::VectorXd resid = d.y - d.x * pr.beta;
  std::vector<double> sums(g.labels.size(), 0.0);
  for (Eigen::Index i = 0; i < d.rows(); ++i) sums[g.index[static_cast<std::size_t>(i)]] += resid(i);
  for (std::size_t j = 0; j < g.labels.size(); ++j) {
    const double nj = static_cast<double>(g.size[j]);
    fit.blups[g.labels[j]] = lambda / (1.0 + lambda * nj) * sums[j];
  }
  return fit;
}

}  // namespace

double reml_criterion(const DesignMatrix& design, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("variance ratio must be finite and >= 0");
  const Groups g = group_rows(design);
  check_inputs(design, g);
  return profile(design, g, lambda).loglik;
}

LmerFit fit_lmer_at_ratio(const DesignMatrix& design, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("variance ratio must be finite and >= 0");
  const Groups g = group_rows(design);
  check_inputs(design, g);
  return finish(design, g, lambda, profile(design, g, lambda));
}

LmerFit fit_random_intercept_lmer(const DesignMatrix& design, const LmerOptions& options) {
  if (options.grid_points < 3 || !(options.log_lambda_min < options.log_lambda_max)) {
    throw ValidationError("mixed model: bad search settings");
  }
  const Groups g = group_rows(design);
  check_inputs(design, g);

  const auto neg = [&](double log_lambda) { return -profile(design, g, std::exp(log_lambda)).loglik; };
  const int m = options.grid_points;
  const double step = (options.log_lambda_max - options.log_lambda_min) / (m - 1);
  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    const double v = neg(options.log_lambda_min + step * i);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  const double lo = options.log_lambda_min + step * std::max(0, best - 1);
  const double hi = options.log_lambda_min + step * std::min(m - 1, best + 1);
  std::uintmax_t iterations = 200;
  const auto [x_min, f_min] =
      boost::math::tools::brent_find_minima(neg, lo, hi, std::numeric_limits<double>::digits / 2, iterations);
  double log_lambda = options.log_lambda_min + step * best;
  if (f_min < best_value) {
    log_lambda = x_min;
    best_value = f_min;
  }
  double lambda = std::exp(log_lambda);

  const Profile at_zero = profile(design, g, 0.0);
  bool converged = true;
  std::string note;
  const double edge = 1e-6 * step;
  if (-at_zero.loglik <= best_value) {
    lambda = 0.0;
    converged = false;
    note = "variance ratio at lower bound (random-intercept variance estimated as zero)";
  } else if (log_lambda - options.log_lambda_min < edge) {
    converged = false;
    note = fmt::format("variance ratio at lower search bound exp({})", options.log_lambda_min);
  } else if (options.log_lambda_max - log_lambda < edge) {
    converged = false;
    note = fmt::format("variance ratio at upper search bound exp({})", options.log_lambda_max);
  }
  LmerFit fit = finish(design, g, lambda, lambda == 0.0 ? at_zero : profile(design, g, lambda));
  fit.converged = converged;
  fit.note = note;
  return fit;
}

}  // namespace valign
