#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "support.hpp"
#include "valign/coefficients.hpp"
#include "valign/design.hpp"
#include "valign/errors.hpp"
#include "valign/lmer.hpp"
#include "valign/ols.hpp"

using namespace valign;

namespace {

struct Rq1Fixture {
  std::vector<AlignmentRun> alignment;
  std::vector<ConsistencyScore> consistency;
  CapabilityTable capability;
  std::map<std::string, std::string> family;
};

Rq1Fixture rq1_fixture(std::size_t families, std::size_t languages, std::size_t models_per_family = 3,
                       std::size_t runs = 3, std::uint64_t seed = 1) {
  Rng rng(seed);
  Rq1Fixture f;
  for (std::size_t fi = 0; fi < families; ++fi) {
    for (std::size_t m = 0; m < models_per_family; ++m) {
      const std::string id = "f" + std::to_string(fi) + "-m" + std::to_string(m);
      f.family[id] = "fam" + std::to_string(fi);
      for (std::size_t l = 0; l < languages; ++l) {
        const std::string lang = "l" + std::to_string(l);
        f.capability.add(id, lang, rng.uniform());
        f.consistency.push_back({id, lang, rng.uniform(), 1.0, rng.uniform(), 3});
        for (std::size_t r = 0; r < runs; ++r) {
          f.alignment.push_back(
              {id, lang, PopulationSpec::Kind::language, "language:" + lang, "r" + std::to_string(r), rng.uniform(), 50});
        }
      }
    }
  }
  return f;
}

std::vector<AlignmentRun> rq2_rows(std::size_t models, const std::vector<std::string>& languages,
                                   const LocalCountryMap& local, std::uint64_t seed, double us_shift = 0.0) {
  Rng rng(seed);
  std::vector<AlignmentRun> rows;
  auto add = [&](const std::string& m, const std::string& l, const std::string& target, double mean) {
    for (int r = 0; r < 4; ++r) {
      rows.push_back({m, l, PopulationSpec::Kind::country, target, "r" + std::to_string(r),
                      mean + rng.normal(0.0, 0.05), 50});
    }
  };
  for (const auto& l : languages) {
    add("random", l, "country:US", 0.0);
    for (const auto& c : local.at(l)) add("random", l, "country:" + c, 0.0);
    for (std::size_t m = 0; m < models; ++m) {
      const std::string id = "model" + std::to_string(m);
      add(id, l, "country:US", 0.3 + us_shift);
      for (const auto& c : local.at(l)) add(id, l, "country:" + c, 0.3);
    }
    // rows that belong to neither side are ignored
    rows.push_back({"model0", l, PopulationSpec::Kind::country, "country:ZZ", "r0", 0.9, 50});
    rows.push_back({"model0", l, PopulationSpec::Kind::global, "global", "r0", 0.9, 50});
  }
  return rows;
}

DesignMatrix permuted(const DesignMatrix& d, std::uint64_t seed) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(d.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  DesignMatrix out = d;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const auto src = perm[static_cast<std::size_t>(i)];
    out.x.row(i) = d.x.row(src);
    out.y(i) = d.y(src);
    if (!d.groups.empty()) out.groups[static_cast<std::size_t>(i)] = d.groups[static_cast<std::size_t>(src)];
  }
  return out;
}

}  // namespace

TEST_CASE("rq1 design column counts") {
  {
    auto f = rq1_fixture(2, 2);
    const auto d = build_rq1_design(f.alignment, f.consistency, f.capability, f.family);
    CHECK(d.cols() == 7);
    CHECK(d.rows() == static_cast<Eigen::Index>(f.alignment.size()));
    CHECK(d.groups.size() == f.alignment.size());
    CHECK(d.columns[0] == "(Intercept)");
    CHECK(d.columns[1] == "consistency:lang=l0");
    CHECK(d.columns[3] == "capability:family=fam0:lang=l0");
  }
  {
    auto f = rq1_fixture(3, 4);
    CHECK(build_rq1_design(f.alignment, f.consistency, f.capability, f.family).cols() == 17);
  }
}

TEST_CASE("rq1 design errors") {
  auto f = rq1_fixture(2, 2);
  SUBCASE("missing consistency") {
    f.consistency.pop_back();
    CHECK_THROWS_AS(build_rq1_design(f.alignment, f.consistency, f.capability, f.family), ValidationError);
  }
  SUBCASE("missing family") {
    f.family.erase(f.family.begin());
    CHECK_THROWS_AS(build_rq1_design(f.alignment, f.consistency, f.capability, f.family), ValidationError);
  }
  SUBCASE("missing capability") {
    CapabilityTable empty;
    CHECK_THROWS_AS(build_rq1_design(f.alignment, f.consistency, empty, f.family), ValidationError);
  }
  SUBCASE("duplicate capability row") {
    CHECK_THROWS_AS(f.capability.add("f0-m0", "l0", 0.5), ValidationError);
  }
  SUBCASE("one model per family leaves the capability columns unidentified") {
    auto g = rq1_fixture(2, 2, 1);
    CHECK_THROWS_AS(build_rq1_design(g.alignment, g.consistency, g.capability, g.family), RankDeficiencyError);
  }
}

TEST_CASE("rank deficiency names the column") {
  auto d = oracle::planted_design(40, {1, 2, 3}, 0.1, 4);
  d.x.conservativeResize(Eigen::NoChange, 4);
  d.x.col(3) = d.x.col(1);
  d.columns.push_back("x1_again");
  try {
    check_full_rank(d);
    FAIL("expected rank deficiency");
  } catch (const RankDeficiencyError& e) {
    CHECK(e.column() == "x1_again");
  }
  CHECK_THROWS_AS(fit_ols(d), RankDeficiencyError);
  d.x.col(3) = 2.0 * d.x.col(1) - 0.5 * d.x.col(0);
  CHECK_THROWS_AS(fit_ols(d), RankDeficiencyError);

  auto thin = oracle::planted_design(3, {1, 2, 3}, 0.1, 4);
  CHECK_THROWS_AS(fit_ols(thin), RankDeficiencyError);
}

TEST_CASE("rq2 design") {
  SUBCASE("one model, one language") {
    const LocalCountryMap local{{"da", {"DK"}}};
    const auto d = build_rq2_design(rq2_rows(1, {"da"}, local, 2), local);
    CHECK(d.cols() == 4);
    CHECK(d.columns == std::vector<std::string>{"(Intercept)", "US", "model=model0:lang=da", "US:model=model0:lang=da"});
    CHECK(d.rows() == 16);
  }
  SUBCASE("nine models, four languages") {
    const LocalCountryMap local{{"da", {"DK"}}, {"nl", {"NL"}}, {"pt", {"PT", "BR"}}, {"en", {"GB", "IE", "AU"}}};
    const auto rows = rq2_rows(9, {"da", "nl", "pt", "en"}, local, 3);
    const auto d = build_rq2_design(rows, local);
    CHECK(d.cols() == 74);
    // English rows: one per local country, Danish rows: Denmark only
    std::size_t en_local = 0, da_local = 0;
    for (const auto& r : rows) {
      if (r.model_id == "model0" && r.run == "r0" && r.level == PopulationSpec::Kind::country &&
          r.target != "country:US" && r.target != "country:ZZ") {
        (r.language == "en" ? en_local : da_local) += r.language == "en" || r.language == "da";
      }
    }
    CHECK(en_local == 3);
    CHECK(da_local == 1);
    const auto fit = fit_ols(d);
    CHECK(coefficient_report(fit, "us_interactions").size() == 36);
  }
  SUBCASE("errors") {
    const LocalCountryMap local{{"da", {"DK"}}};
    auto rows = rq2_rows(1, {"da"}, local, 2);
    CHECK_THROWS_AS(build_rq2_design(rows, LocalCountryMap{{"da", {}}}), ValidationError);
    auto no_us = rows;
    std::erase_if(no_us, [](const AlignmentRun& r) { return r.model_id == "model0" && r.target == "country:US"; });
    CHECK_THROWS_AS(build_rq2_design(no_us, local), ValidationError);
    auto no_base = rows;
    std::erase_if(no_base, [](const AlignmentRun& r) { return r.model_id == "random"; });
    CHECK_THROWS_AS(build_rq2_design(no_base, local), ValidationError);
  }
}

TEST_CASE("ols zero-noise recovery") {
  DesignMatrix d;
  d.columns = {"(Intercept)", "US"};
  d.x.resize(10, 2);
  d.y.resize(10);
  for (int i = 0; i < 10; ++i) {
    d.x(i, 0) = 1;
    d.x(i, 1) = i % 2;
    d.y(i) = 2 + 3 * (i % 2);
  }
  const auto fit = fit_ols(d);
  CHECK(fit.beta(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(fit.beta(1) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-13);
  CHECK(fit.r_squared == doctest::Approx(1.0));
}

TEST_CASE("ols matches the normal-equation oracle and leaves orthogonal residuals") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto d = oracle::planted_design(500, {0.5, -1.0, 2.0, 0.25, 3.0}, 0.7, seed);
    const auto fit = fit_ols(d);
    const auto b = oracle::normal_equations(d.x, d.y);
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      CHECK(std::fabs(fit.beta(j) - b[static_cast<std::size_t>(j)]) <= 1e-8 * std::max(1.0, std::fabs(b[j])));
    }
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      const double rel = std::fabs(d.x.col(j).dot(fit.residuals)) / (d.x.col(j).norm() * fit.residuals.norm());
      CHECK(rel <= 1e-8);
    }
    // classical SE from sigma2 (X'X)^-1, t = estimate / se
    const Eigen::MatrixXd inv = (d.x.transpose() * d.x).inverse();
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      const auto& c = fit.coefficients[static_cast<std::size_t>(j)];
      CHECK(c.se == doctest::Approx(std::sqrt(fit.sigma2 * inv(j, j))).epsilon(1e-9));
      CHECK(c.stat == doctest::Approx(c.estimate / c.se).epsilon(1e-12));
    }
    CHECK(fit.df_residual == 495);
    CHECK(fit.sigma2 == doctest::Approx(fit.residuals.squaredNorm() / 495.0));
  }
}

TEST_CASE("ols diagnostics") {
  auto d = oracle::planted_design(400, {1.0, 2.0}, 0.5, 9);
  const auto homo = fit_ols(d);
  CHECK(homo.diagnostics.breusch_pagan_df == 1);
  CHECK(std::fabs(homo.diagnostics.residual_skewness) < 0.4);
  CHECK(std::fabs(homo.diagnostics.residual_excess_kurtosis) < 0.8);
  // noise whose scale grows with x is detected
  Rng rng(10);
  for (Eigen::Index i = 0; i < d.rows(); ++i) d.y(i) = 1 + 2 * d.x(i, 1) + rng.normal(0.0, 0.2 * std::exp(d.x(i, 1)));
  const auto hetero = fit_ols(d);
  CHECK(hetero.diagnostics.breusch_pagan_p < 1e-4);
  CHECK(homo.diagnostics.breusch_pagan_p > hetero.diagnostics.breusch_pagan_p);
  const auto robust = fit_ols(d, {true});
  CHECK(robust.robust_se);
  CHECK(robust.coefficients[1].se > hetero.coefficients[1].se);
  CHECK(robust.beta == hetero.beta);
}

TEST_CASE("ols estimates do not depend on row order") {
  const auto d = oracle::planted_design(300, {0.1, 0.2, -0.3, 0.4}, 1.0, 77);
  const auto a = fit_ols(d);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto b = fit_ols(permuted(d, s));
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      CHECK(std::fabs(a.beta(j) - b.beta(j)) <= 1e-10);
      CHECK(std::fabs(a.coefficients[j].se - b.coefficients[j].se) <= 1e-10);
    }
  }
}

TEST_CASE("lmer matches the balanced ANOVA REML estimates") {
  int truncated = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<std::vector<double>> values;
    const auto d = oracle::balanced_design(6, 10, 0.5, 1.0, 4.0, seed, &values);
    const auto o = oracle::balanced_reml(values);
    const auto fit = fit_random_intercept_lmer(d);
    CHECK(std::fabs(fit.sigma2 - o.sigma2) <= 1e-6);
    CHECK(std::fabs(fit.sigma_alpha2 - o.sigma_alpha2) <= 1e-6);
    if (o.sigma_alpha2 == 0.0) {
      ++truncated;
      CHECK(fit.lambda == 0.0);
    }
    // blups sum to zero in a balanced design
    double sum = 0;
    for (const auto& [g, b] : fit.blups) sum += b;
    CHECK(std::fabs(sum) <= 1e-9);
    CHECK(fit.n_groups == 6);
    CHECK(fit.sigma2 >= 0.0);
    CHECK(fit.sigma_alpha2 >= 0.0);
  }
  MESSAGE("boundary solutions: " << truncated);
}

TEST_CASE("lmer optimum beats every grid point") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = oracle::planted_design(120, {0.3, 1.0, -0.5}, 0.4, seed, 12, 0.8);
    const auto fit = fit_random_intercept_lmer(d);
    const double best = reml_criterion(d, fit.lambda);
    CHECK(fit.loglik_reml == doctest::Approx(best));
    for (int k = 0; k < 64; ++k) {
      const double lam = std::exp(-12.0 + 24.0 * k / 63.0);
      CHECK(best >= reml_criterion(d, lam) - 1e-9);
    }
    CHECK(fit.converged);
  }
}

TEST_CASE("lmer at a vanishing ratio reproduces OLS") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = oracle::planted_design(80, {1.0, -2.0, 0.5}, 0.3, seed, 8, 0.5);
    const auto lm = fit_lmer_at_ratio(d, 1e-12);
    const auto ols = fit_ols(d);
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      CHECK(std::fabs(lm.beta(j) - ols.beta(j)) <= 1e-6 * std::max(1.0, std::fabs(ols.beta(j))));
    }
  }
}

TEST_CASE("lmer with no between-group variation") {
  // identical group means and zero noise: the random intercept vanishes
  DesignMatrix d;
  d.columns = {"(Intercept)", "x"};
  d.x.resize(24, 2);
  d.y.resize(24);
  for (int i = 0; i < 24; ++i) {
    d.x(i, 0) = 1;
    d.x(i, 1) = (i % 6) - 2.5;
    d.y(i) = 2 + 3 * d.x(i, 1);
    d.groups.push_back("g" + std::to_string(i / 6));
  }
  const auto fit = fit_random_intercept_lmer(d);
  const auto ols = fit_ols(d);
  CHECK(fit.beta(0) == doctest::Approx(ols.beta(0)));
  CHECK(fit.beta(1) == doctest::Approx(ols.beta(1)));
  CHECK(fit.sigma_alpha2 <= 1e-20);
}

TEST_CASE("lmer boundary at the upper bound is flagged") {
  // all variation between groups
  DesignMatrix d;
  d.columns = {"(Intercept)"};
  d.x = Eigen::MatrixXd::Ones(12, 1);
  d.y.resize(12);
  for (int i = 0; i < 12; ++i) {
    d.y(i) = static_cast<double>(i / 3) + 1e-7 * (i % 3);
    d.groups.push_back("g" + std::to_string(i / 3));
  }
  const auto fit = fit_random_intercept_lmer(d);
  CHECK_FALSE(fit.converged);
  CHECK_FALSE(fit.note.empty());
}

TEST_CASE("lmer input checks") {
  auto d = oracle::planted_design(30, {1, 2}, 0.1, 1, 30, 0.0);
  CHECK_THROWS_AS(fit_random_intercept_lmer(d), ValidationError);  // one group
  d.groups.pop_back();
  CHECK_THROWS_AS(fit_random_intercept_lmer(d), ValidationError);
  auto e = oracle::planted_design(30, {1, 2}, 0.1, 1, 10, 0.3);
  e.groups[4].clear();
  CHECK_THROWS_AS(fit_random_intercept_lmer(e), ValidationError);
}

TEST_CASE("lmer estimates do not depend on row order") {
  const auto d = oracle::planted_design(200, {0.2, 1.0, -1.0}, 0.1, 5, 20, 0.7);
  const auto a = fit_random_intercept_lmer(d);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto b = fit_random_intercept_lmer(permuted(d, s));
    for (Eigen::Index j = 0; j < d.cols(); ++j) CHECK(std::fabs(a.beta(j) - b.beta(j)) <= 1e-10);
    CHECK(std::fabs(a.sigma2 - b.sigma2) <= 1e-10);
    // the profile is flat at its maximum, so the ratio is only resolved to
    // about the square root of machine epsilon
    CHECK(std::fabs(a.sigma_alpha2 - b.sigma_alpha2) <= 1e-7 * std::max(1.0, a.sigma_alpha2));
  }
}

TEST_CASE("lmer coverage of planted fixed effects") {
  const std::vector<double> beta{0.4, 1.5, -0.7};
  int covered = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto d = oracle::planted_design(200, beta, 0.1, 1000 + seed, 20, std::sqrt(0.5));
    const auto fit = fit_random_intercept_lmer(d);
    for (std::size_t j = 0; j < beta.size(); ++j) {
      ++total;
      covered += std::fabs(fit.fixed_effects[j].estimate - beta[j]) <= 3 * fit.fixed_effects[j].se;
    }
  }
  CHECK(static_cast<double>(covered) / total >= 0.95);
}

TEST_CASE("wald p-values decrease with |z|") {
  const auto d = oracle::planted_design(150, {0.0, 0.05, 0.1, 0.2, 0.4, 0.8}, 1.0, 3, 15, 0.5);
  const auto fit = fit_random_intercept_lmer(d);
  auto fe = fit.fixed_effects;
  for (const auto& c : fe) CHECK(c.p == doctest::Approx(std::erfc(std::fabs(c.stat) / std::sqrt(2.0))));
  std::sort(fe.begin(), fe.end(), [](const auto& a, const auto& b) { return std::fabs(a.stat) < std::fabs(b.stat); });
  for (std::size_t i = 1; i < fe.size(); ++i) CHECK(fe[i].p <= fe[i - 1].p);
}

TEST_CASE("coefficient reports") {
  auto f = rq1_fixture(2, 2);
  const auto d = build_rq1_design(f.alignment, f.consistency, f.capability, f.family);
  const auto fit = fit_random_intercept_lmer(d);
  CHECK(coefficient_report(fit, "all").size() == 7);
  CHECK(coefficient_report(fit, "capability").size() == 4);
  CHECK(coefficient_report(fit, "consistency").size() == 2);
  CHECK_THROWS_AS(coefficient_report(fit, "bogus"), ValidationError);
  for (const auto& r : coefficient_report(fit, "all")) CHECK(r.significant == (r.p < 0.05));

  std::ostringstream out;
  write_coefficients_csv(out, coefficient_report(fit, "all"));
  CHECK(out.str().rfind("term,estimate,se,stat,p,significant\n", 0) == 0);

  const auto meta = fit_metadata(fit, d);
  CHECK(meta.at("n") == d.rows());
  CHECK(meta.contains("lambda"));
  CHECK(meta.at("df_method").get<std::string>().find("Wald") != std::string::npos);
}

TEST_CASE("alignment runs csv round trip") {
  testing::TempDir dir;
  std::vector<AlignmentRun> rows{{"m", "da", PopulationSpec::Kind::country, "country:DK", "r1", 0.123456789, 50},
                                 {"m", "da", PopulationSpec::Kind::global, "global", "r2", -0.5, 49}};
  std::ostringstream out;
  write_alignment_runs_csv(out, rows);
  testing::write_file(dir / "a.csv", out.str());
  const auto back = read_alignment_runs_csv(dir / "a.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].rho == rows[0].rho);
  CHECK(back[1].level == PopulationSpec::Kind::global);
  CHECK(back[1].n_topics == 49);
}
