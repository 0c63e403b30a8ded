// Acceptance runner: one PASS/FAIL line per criterion. Tolerances and time
// limits are fixed here; the process exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <sys/wait.h>

#include "audit_fixture.hpp"
#include "oracles.hpp"
#include "support.hpp"
#include "valign/annotation.hpp"
#include "valign/csv.hpp"
#include "valign/errors.hpp"
#include "valign/lmer.hpp"
#include "valign/ols.hpp"
#include "valign/pipeline.hpp"
#include "valign/rank_correlation.hpp"
#include "valign/records.hpp"
#include "valign/scoring.hpp"

using namespace valign;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

// ---- helpers -------------------------------------------------------------

SurveyDataset random_survey(Rng& rng) {
  SurveyDataset ds;
  const std::size_t nq = 1 + rng.below(10);
  const std::size_t nr = 1 + rng.below(20);
  for (std::size_t q = 0; q < nq; ++q) {
    QuestionSpec s;
    s.question_id = "q" + std::to_string(q);
    if (rng.bernoulli(0.5)) {
      s.scale_kind = ScaleKind::rating;
      s.scale_min = 1;
      s.scale_max = 2 + static_cast<int>(rng.below(9));
      s.reverse_scored = rng.bernoulli(0.5);
    } else {
      s.scale_kind = ScaleKind::binary_agree;
      s.scale_min = 1;
      s.scale_max = 2;
    }
    s.missing_codes = {-1, 99};
    ds.questions.push_back(s);
  }
  const char* countries[] = {"DK", "US", "NL"};
  for (std::size_t i = 0; i < nr; ++i) {
    Respondent r;
    r.respondent_id = "r" + std::to_string(i);
    r.country = countries[rng.below(3)];
    r.language = r.country == std::string("US") ? "en" : "da";
    r.weight = 0.05 + 5.0 * rng.uniform();
    for (const auto& q : ds.questions) {
      if (rng.bernoulli(0.1)) continue;
      r.answers[q.question_id] =
          rng.bernoulli(0.1) ? 99 : q.scale_min + static_cast<int>(rng.below(q.scale_max - q.scale_min + 1));
    }
    ds.respondents.push_back(r);
  }
  return ds;
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" VALIGN_CLI "' " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string cli_args(const std::string& stage, const fs::path& config, const fs::path& run) {
  return stage + " --config '" + config.string() + "' --run-dir '" + run.string() + "'";
}

void run_stages(const fs::path& config, const fs::path& run, std::optional<std::uint64_t> seed,
                const std::vector<std::string>& stages) {
  std::ostringstream sink;
  StageOptions o;
  o.config_path = config;
  o.run_dir = run;
  o.seed = seed;
  o.log = &sink;
  for (const auto& s : stages) run_stage(s, o);
}

struct CsvRows {
  csv::Table table;
  std::string get(const csv::Row& r, const char* col) const { return r.fields[table.column(col)]; }
};

CsvRows read_csv(const fs::path& p) { return {csv::read_file(p)}; }

// ---- criteria ------------------------------------------------------------

Outcome c1_vps_oracle() {
  Outcome o;
  Rng rng(20240601);
  std::size_t compared = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto ds = random_survey(rng);
    for (const auto& pop : {PopulationSpec::global(), PopulationSpec::country("DK"), PopulationSpec::language("en")}) {
      const auto ref = oracle::vps(ds, pop);
      try {
        const auto v = compute_vps_vector(ds, pop, ds.questions);
        o.require(v.entries.size() == ref.size(), fmt::format("trial {}: entry sets differ", trial));
        for (const auto& [q, x] : ref) {
          const auto it = v.entries.find(q);
          o.require(it != v.entries.end() && std::fabs(it->second - x) <= 1e-12,
                    fmt::format("trial {} {}: {} vs oracle {}", trial, q, it == v.entries.end() ? -1 : it->second, x));
          ++compared;
        }
      } catch (const EmptyPopulationError&) {
        o.require(ref.empty(), fmt::format("trial {}: unexpected empty population", trial));
      }
    }
  }
  if (o.pass) o.detail = fmt::format("{} entries within 1e-12", compared);
  return o;
}

Outcome c2_generation_vps() {
  Outcome o;
  std::vector<StanceLabel> labels;
  const Stance s[] = {Stance::pro, Stance::pro, Stance::pro, Stance::pro, Stance::pro,
                      Stance::pro, Stance::pro, Stance::con, Stance::null, Stance::null};
  for (std::size_t i = 0; i < 10; ++i) labels.push_back({"r", i, s[i]});
  const auto g = compute_generation_vps("r", "q", labels);
  o.require(g.vps.has_value() && *g.vps == 0.875, "7 pro / 1 con / 2 null did not give 0.875");
  std::vector<StanceLabel> nulls;
  for (std::size_t i = 0; i < 10; ++i) nulls.push_back({"r", i, Stance::null});
  std::vector<std::string> diag;
  const auto n = compute_generation_vps("r", "q", nulls, &diag);
  o.require(!n.vps.has_value() && !diag.empty(), "all-null generation was not absent");
  if (o.pass) o.detail = "0.875 exact; all-null absent";
  return o;
}

Outcome c3_spearman() {
  Outcome o;
  Rng rng(99);
  int compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 3 + rng.below(10);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = static_cast<double>(rng.below(5)) / 4.0;
    for (auto& v : y) v = rng.bernoulli(0.5) ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform();
    const bool cx = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
    const bool cy = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (cx || cy) continue;
    ++compared;
    const double rho = spearman_rho(x, y);
    o.require(std::fabs(rho - oracle::spearman(x, y)) <= 1e-12, fmt::format("trial {}: oracle mismatch", trial));
    std::vector<double> fx(n), gy(n);
    for (std::size_t i = 0; i < n; ++i) {
      fx[i] = std::log(x[i] + 0.5) * 10.0 + 3.0;
      gy[i] = std::pow(y[i] + 1.0, 3.0);
    }
    o.require(spearman_rho(fx, gy) == rho, fmt::format("trial {}: not invariant under monotone maps", trial));
  }
  if (o.pass) o.detail = fmt::format("{} tied vectors within 1e-12; monotone invariance exact", compared);
  return o;
}

Outcome c4_lmer() {
  Outcome o;
  double worst_vc = 0, worst_beta = 0;
  int boundary = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<std::vector<double>> values;
    const auto d = oracle::balanced_design(6, 10, 1.0, 1.0, 4.0, 5000 + seed, &values);
    const auto ref = oracle::balanced_reml(values);
    const auto fit = fit_random_intercept_lmer(d);
    boundary += ref.sigma_alpha2 == 0.0;
    worst_vc = std::max({worst_vc, std::fabs(fit.sigma2 - ref.sigma2), std::fabs(fit.sigma_alpha2 - ref.sigma_alpha2)});

    const auto p = oracle::planted_design(90, {0.5, 1.0, -2.0}, 0.5, 7000 + seed, 15, 1.0);
    const auto lm = fit_lmer_at_ratio(p, 1e-12);
    const auto ols = fit_ols(p);
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      worst_beta = std::max(worst_beta, std::fabs(lm.beta(j) - ols.beta(j)) / std::max(1e-300, std::fabs(ols.beta(j))));
    }
  }
  o.require(worst_vc <= 1e-6, fmt::format("variance components off by {:.3g}", worst_vc));
  o.require(worst_beta <= 1e-6, fmt::format("lambda=1e-12 fixed effects off OLS by {:.3g} relative", worst_beta));
  o.detail = fmt::format("max |dVC| = {:.2g}, max rel |dbeta| = {:.2g}, {} boundary fits", worst_vc, worst_beta,
                         boundary);
  return o;
}

Outcome c5_ols() {
  Outcome o;
  const std::vector<double> beta{1.0, -0.5, 2.0, 0.0, 0.75};
  const auto exact = oracle::planted_design(60, beta, 0.0, 3);
  const auto f0 = fit_ols(exact);
  double worst = 0;
  for (std::size_t j = 0; j < beta.size(); ++j) worst = std::max(worst, std::fabs(f0.beta(j) - beta[j]));
  o.require(worst <= 1e-12, fmt::format("zero-noise recovery error {:.3g}", worst));
  o.require(f0.residuals.cwiseAbs().maxCoeff() <= 1e-12, "zero-noise residuals not zero");

  std::size_t covered = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto d = oracle::planted_design(500, beta, 1.3, 100 + seed);
    const auto f = fit_ols(d);
    for (std::size_t j = 0; j < beta.size(); ++j) {
      ++total;
      covered += std::fabs(f.coefficients[j].estimate - beta[j]) <= 2.0 * f.coefficients[j].se;
    }
  }
  const double coverage = static_cast<double>(covered) / static_cast<double>(total);
  o.require(coverage >= 0.93, fmt::format("coverage {:.4f} < 0.93", coverage));
  o.detail = fmt::format("zero-noise error {:.2g}; +-2 SE coverage {:.4f} over {} intervals", worst, coverage, total);
  return o;
}

Outcome c6_alignment_recovery() {
  Outcome o;
  testing::TempDir dir;
  fixture::AuditSpec spec;
  spec.topics = 50;
  spec.respondents = 2000;
  spec.seed = 6;
  spec.countries = {{"AA", "en", 1.0, true}, {"BA", "en", 0.0},  {"BB", "en", 0.3},
                    {"BC", "en", 0.5},       {"BD", "en", 0.7},  {"BE", "en", 0.8}, {"BF", "en", 0.85}};
  spec.languages = {"en"};
  spec.local = {{"en", {"AA"}}};
  spec.models = {{"sim", "f", "country:AA", "", 0.0, 0.05}};
  spec.prompts_per_condition = 150;
  spec.variants_per_topic = 3;
  spec.repeats = 2;
  spec.n_respondents = 10;
  const auto config = fixture::write_audit(dir.path(), spec);
  const auto run = dir / "run";
  run_stages(config, run, std::nullopt, {"ingest", "elicit", "annotate", "score"});

  std::map<std::string, VpsVector> truth;
  for (auto& v : read_vps_csv(run / "ingest/vps.csv")) truth[v.label] = v;
  auto corr = [&](const std::string& a, const std::string& b) {
    std::vector<double> x, y;
    for (const auto& [q, v] : truth.at(a).entries) {
      if (!truth.at(b).contains(q)) continue;
      x.push_back(v);
      y.push_back(truth.at(b).entries.at(q));
    }
    return oracle::spearman(x, y);
  };

  std::map<std::string, double> rho;
  const auto table = read_csv(run / "score/alignment.csv");
  for (const auto& r : table.table.rows) {
    if (table.get(r, "level") == "country") rho[table.get(r, "target")] = std::stod(table.get(r, "rho"));
  }
  const double ra = rho.at("country:AA");
  o.require(ra >= 0.8, fmt::format("rho(A) = {:.3f} < 0.8", ra));
  std::size_t compared = 0;
  double best_other = -1;
  for (const auto& [target, r] : rho) {
    if (target == "country:AA") continue;
    const double c = corr("country:AA", target);
    if (c >= 0.9) continue;
    ++compared;
    best_other = std::max(best_other, r);
    o.require(ra > r, fmt::format("rho(A) = {:.3f} not above rho({}) = {:.3f} (corr {:.2f})", ra, target, r, c));
  }
  o.require(compared >= 5, "too few comparison populations");
  o.detail = fmt::format("rho(A) = {:.3f}, best other = {:.3f} over {} populations", ra, best_other, compared);
  return o;
}

Outcome c7_us_bias() {
  Outcome o;
  std::size_t biased_rows = 0, null_rows = 0, null_positive_sig = 0;
  double min_biased = 1e9, max_p = 0;
  for (int blend_case = 0; blend_case < 2; ++blend_case) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      testing::TempDir dir;
      fixture::AuditSpec spec;
      spec.topics = 50;
      spec.respondents = 500;
      spec.seed = 70 + seed;
      spec.countries = {{"US", "en", 1.0, true}, {"GB", "en", 0.6}, {"DK", "da", 0.3},
                        {"NL", "nl", 0.3},       {"PT", "pt", 0.2}, {"BR", "pt", 0.2}};
      spec.languages = {"en", "da", "nl", "pt"};
      spec.local = {{"en", {"GB"}}};
      const double blend = blend_case == 0 ? 1.0 : 0.0;
      const std::string target = blend_case == 0 ? "country:US" : "";
      spec.models = {{"a-s", "a", "local", target, blend, 0.05, "bernoulli", 0.4},
                     {"a-l", "a", "local", target, blend, 0.05, "bernoulli", 0.8},
                     {"b-s", "b", "local", target, blend, 0.05, "bernoulli", 0.3},
                     {"b-l", "b", "local", target, blend, 0.05, "bernoulli", 0.7}};
      spec.prompts_per_condition = 100;
      spec.repeats = 2;
      spec.baseline_replicates = 100;
      spec.resample_pairs = 5;
      const auto config = fixture::write_audit(dir.path(), spec);
      const auto run = dir / "run";
      run_stages(config, run, std::nullopt, {"ingest", "baseline", "elicit", "annotate", "score", "analyze"});
      const auto coef = read_csv(run / "analyze/rq2_coefficients.csv");
      for (const auto& r : coef.table.rows) {
        const auto term = coef.get(r, "term");
        if (term.rfind("US:", 0) != 0) continue;
        const double est = std::stod(coef.get(r, "estimate"));
        const double p = std::stod(coef.get(r, "p"));
        if (blend_case == 0) {
          ++biased_rows;
          min_biased = std::min(min_biased, est);
          max_p = std::max(max_p, p);
          o.require(est > 0 && p < 0.05,
                    fmt::format("seed {} blend 1: {} = {:.3f} (p = {:.3g})", seed, term, est, p));
        } else {
          ++null_rows;
          if (est > 0 && p < 0.05) {
            ++null_positive_sig;
            o.require(false, fmt::format("seed {} blend 0: {} = {:.3f} significantly positive", seed, term, est));
          }
        }
      }
    }
  }
  o.require(biased_rows == 5 * 16 && null_rows == 5 * 16, "unexpected number of US interaction rows");
  o.detail = fmt::format("blend 1: {} rows, min estimate {:.3f}, max p {:.2g}; blend 0: {} rows, {} positive+significant",
                         biased_rows, min_biased, max_p, null_rows, null_positive_sig);
  return o;
}

Outcome c8_consistency() {
  Outcome o;
  // noiseless simulator through the pipeline
  {
    testing::TempDir dir;
    fixture::AuditSpec spec;
    spec.topics = 30;
    spec.countries = {{"US", "en", 1.0, true}, {"GB", "en", 0.5}, {"DK", "da", 0.2}};
    spec.models = {{"exact", "f", "local", "", 0.0, 0.0, "expected"},
                   {"exact-us", "f", "local", "country:US", 0.5, 0.0, "expected"}};
    spec.prompts_per_condition = 60;
    spec.repeats = 3;
    const auto config = fixture::write_audit(dir.path(), spec);
    run_stages(config, dir / "run", std::nullopt, {"ingest", "elicit", "annotate", "score"});
    const auto t = read_csv(dir / "run/score/consistency.csv");
    double worst = 0;
    for (const auto& r : t.table.rows) worst = std::max(worst, std::fabs(std::stod(t.get(r, "corrected")) - 1.0));
    o.require(t.table.rows.size() == 4, "expected 4 consistency rows");
    o.require(worst <= 1e-9, fmt::format("noiseless corrected consistency off by {:.3g}", worst));
    o.detail = fmt::format("noiseless max |corrected - 1| = {:.2g}", worst);
  }
  // uniform-random latent vectors, fresh per run
  {
    testing::TempDir dir;
    fixture::AuditSpec spec;
    spec.topics = 100;
    spec.respondents = 50;
    spec.countries = {{"US", "en", 1.0, true}, {"GB", "en", 0.5}};
    spec.languages = {"en"};
    spec.models = {{"noise", "f", "random", "", 0.0, 0.0}};
    spec.prompts_per_condition = 100;
    spec.repeats = 2;
    const auto config = fixture::write_audit(dir.path(), spec);
    double sum = 0, sum_abs = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto run = dir / ("run" + std::to_string(seed));
      run_stages(config, run, seed, {"ingest", "elicit", "annotate", "score"});
      const auto t = read_csv(run / "score/consistency.csv");
      const double obs = std::stod(t.get(t.table.rows.at(0), "observed"));
      sum += obs;
      sum_abs += std::fabs(obs);
      fs::remove_all(run);
    }
    const double mean = sum / 50.0;
    o.require(std::fabs(mean) < 0.1, fmt::format("uniform-random mean observed {:.3f}", mean));
    o.detail += fmt::format("; uniform-random mean observed {:.3f} (mean |obs| {:.3f})", mean, sum_abs / 50.0);
  }
  const double c = correct_for_attenuation(0.45, 0.9);
  o.require(c == 0.5, fmt::format("attenuation 0.45/0.9 gave {}", c));
  o.detail += "; 0.45/0.9 -> 0.5 exact";
  return o;
}

class GoldJudge : public StanceJudge {
 public:
  GoldJudge(const std::vector<GoldItem>& gold, std::set<std::size_t> flip) : gold_(gold), flip_(std::move(flip)) {}
  std::optional<Stance> judge(const SubStatement& s, const JudgeContext&, std::vector<std::string>&) override {
    const Stance g = gold_.at(s.index).label;
    return flip_.count(s.index) && g == Stance::pro ? Stance::con : g;
  }

 private:
  const std::vector<GoldItem>& gold_;
  std::set<std::size_t> flip_;
};

Outcome c9_judge_validation() {
  Outcome o;
  std::vector<QuestionSpec> qs;
  for (int t = 0; t < 4; ++t) {
    QuestionSpec q;
    q.question_id = "t" + std::to_string(t);
    q.topic_text = "topic";
    q.pro_statement = "pro";
    q.con_statement = "con";
    qs.push_back(q);
  }
  std::vector<GoldItem> mixed;
  const Stance cycle[] = {Stance::pro, Stance::con, Stance::null, Stance::pro, Stance::con};
  for (std::size_t i = 0; i < 200; ++i) mixed.push_back({"s", "t" + std::to_string(i % 4), cycle[i % 5]});
  GoldJudge same(mixed, {});
  const auto id = validate_judge(mixed, same, qs);
  o.require(id.agreement == 1.0 && id.vps_mae == 0.0,
            fmt::format("identity gave ({}, {})", id.agreement, id.vps_mae));

  std::vector<GoldItem> pro;
  std::set<std::size_t> flip;
  for (std::size_t rec = 0; rec < 4; ++rec) {
    for (std::size_t k = 0; k < 10; ++k) {
      if (k == 7) flip.insert(pro.size());
      pro.push_back({"s", "t" + std::to_string(rec), Stance::pro});
    }
  }
  GoldJudge flipper(pro, flip);
  const auto f = validate_judge(pro, flipper, qs);
  o.require(f.agreement == 0.9 && f.vps_mae == 0.1,
            fmt::format("flip fixture gave ({}, {})", f.agreement, f.vps_mae));
  o.detail = fmt::format("identity ({}, {}); flip fixture ({}, {})", id.agreement, id.vps_mae, f.agreement, f.vps_mae);
  return o;
}

std::map<std::string, std::string> record_set(const fs::path& path) {
  std::map<std::string, std::string> out;
  for (auto r : read_records(path)) {
    r.timestamp.clear();
    out[r.record_id] = to_json(r).dump();
  }
  return out;
}

Outcome c10_resume_and_determinism() {
  Outcome o;
  testing::TempDir dir;
  fixture::AuditSpec spec;
  spec.topics = 30;
  spec.prompts_per_condition = 60;
  const auto config = fixture::write_audit(dir / "in", spec);
  const auto a = dir / "a", b = dir / "b", crashed = dir / "crashed";

  o.require(run_cli(cli_args("all", config, a)) == 0, "first full audit failed");
  o.require(run_cli(cli_args("all", config, b)) == 0, "second full audit failed");
  o.require(run_cli(cli_args("ingest", config, crashed)) == 0, "ingest failed");
  const int crash = run_cli(cli_args("elicit", config, crashed), "VALIGN_CRASH_AFTER_RECORDS=333");
  o.require(crash == 70, fmt::format("crash injection exited {}", crash));
  const std::size_t journaled = read_records(crashed / "elicit/journal.jsonl").size();
  o.require(run_cli(cli_args("elicit", config, crashed)) == 0, "resumed elicit failed");
  const auto oracle = record_set(a / "elicit/records.jsonl");
  o.require(record_set(crashed / "elicit/records.jsonl") == oracle, "resumed record set differs");

  std::size_t files = 0;
  for (const char* rel : {"analyze/rq1_coefficients.csv", "analyze/rq1_fit.json", "analyze/rq2_coefficients.csv",
                          "analyze/rq2_fit.json", "score/alignment.csv", "score/alignment_runs.csv",
                          "score/consistency.csv", "report/summary.txt", "report/fig1_rq1_coefficients.csv",
                          "report/fig2_self_consistency.csv", "report/fig3_capability_alignment.csv",
                          "report/fig4_us_bias.csv"}) {
    ++files;
    o.require(testing::read_file(a / rel) == testing::read_file(b / rel) && !testing::read_file(a / rel).empty(),
              std::string(rel) + " differs between identical audits");
  }
  o.detail = fmt::format("crash after {} journaled of {} records, resumed identical; {} tables byte-identical",
                         journaled, oracle.size(), files);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;  // 0: no runtime limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "value polarity oracle equivalence", 5, c1_vps_oracle},
      {2, "generation value polarity worked example", 0, c2_generation_vps},
      {3, "spearman oracle and monotone invariance", 0, c3_spearman},
      {4, "mixed model REML oracle and OLS limit", 30, c4_lmer},
      {5, "OLS recovery and interval coverage", 30, c5_ols},
      {6, "end-to-end alignment recovery", 120, c6_alignment_recovery},
      {7, "US-bias detection", 180, c7_us_bias},
      {8, "self-consistency calibration", 0, c8_consistency},
      {9, "judge validation harness", 0, c9_judge_validation},
      {10, "resumability and determinism", 0, c10_resume_and_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.limit_s > 0 && secs > c.limit_s) {
      out.detail += fmt::format(" [runtime {:.1f} s exceeds {:.0f} s]", secs, c.limit_s);
      out.pass = false;
    }
    failed += !out.pass;
    std::cout << fmt::format("{} {:>2} {}: {} ({:.2f} s)\n", out.pass ? "PASS" : "FAIL", c.id, c.name, out.detail, secs)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
