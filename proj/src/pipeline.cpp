#include "valign/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "valign/annotation.hpp"
#include "valign/coefficients.hpp"
#include "valign/csv.hpp"
#include "valign/design.hpp"
#include "valign/elicit.hpp"
#include "valign/errors.hpp"
#include "valign/filter.hpp"
#include "valign/http_backend.hpp"
#include "valign/io.hpp"
#include "valign/language_id.hpp"
#include "valign/lmer.hpp"
#include "valign/manifest.hpp"
#include "valign/ols.hpp"
#include "valign/random.hpp"
#include "valign/records.hpp"
#include "valign/scoring.hpp"
#include "valign/simulator.hpp"

namespace valign {

namespace fs = std::filesystem;

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"ingest",  "baseline", "elicit", "annotate",
                                              "score",   "analyze",  "report", "validate-judge"};
  return names;
}

const std::vector<std::string>& upstream_of(const std::string& stage) {
  static const std::map<std::string, std::vector<std::string>> deps{
      {"ingest", {}},
      {"baseline", {"ingest"}},
      {"elicit", {"ingest"}},
      {"annotate", {"elicit"}},
      {"score", {"ingest", "annotate"}},
      {"analyze", {"score", "baseline"}},
      {"report", {"analyze"}},
      {"validate-judge", {}},
  };
  const auto it = deps.find(stage);
  if (it == deps.end()) throw ValidationError("unknown stage '" + stage + "'");
  return it->second;
}

std::size_t variants_for(const AuditConfig& config, std::size_t n_topics) {
  if (n_topics == 0) throw ValidationError("codebook has no questions");
  if (config.variants_per_topic > 0) return config.variants_per_topic;
  return (config.prompts_per_condition + n_topics - 1) / n_topics;
}

std::vector<ElicitTask> plan_condition(const std::vector<QuestionSpec>& questions,
                                       const std::vector<PromptTemplate>& templates, const AuditConfig& config,
                                       const std::string& model_id, const std::string& language, std::size_t run,
                                       std::uint64_t seed) {
  // Prompt seeds depend on language and run only, so every model sees the same prompts.
  auto prompts = render_prompts(questions, templates, language, variants_for(config, questions.size()),
                                derive_seed(seed, fmt::format("prompts|{}|r{}", language, run)),
                                config.n_respondents);
  if (prompts.size() > config.prompts_per_condition) prompts.resize(config.prompts_per_condition);
  const std::string condition = fmt::format("{}|{}|r{}", model_id, language, run);
  std::vector<ElicitTask> tasks;
  tasks.reserve(prompts.size());
  for (auto& p : prompts) {
    ElicitTask t;
    t.record_id = fmt::format("{}|{}|v{}", condition, p.question_id, p.variant);
    t.model_id = model_id;
    t.language = language;
    t.question_id = p.question_id;
    t.template_id = p.template_id;
    t.prompt_text = std::move(p.text);
    t.condition = condition;
    t.run = run;
    t.variant = p.variant;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

namespace {

struct Context {
  const AuditConfig& config;
  fs::path run_dir;
  std::uint64_t seed;
  std::ostream& log;

  fs::path file(const std::string& rel) const { return run_dir / rel; }
};

template <typename Fn>
std::string to_text(Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  io::atomic_write(path, text);
}

std::map<std::string, VpsVector> load_vectors(const Context& ctx) {
  std::map<std::string, VpsVector> out;
  for (auto& v : read_vps_csv(ctx.file("ingest/vps.csv"))) out[v.label] = std::move(v);
  return out;
}

bool is_local_label(const std::string& label) { return label.rfind("local:", 0) == 0; }

std::vector<AlignmentTarget> alignment_targets(const std::map<std::string, VpsVector>& vectors) {
  std::vector<AlignmentTarget> out;
  for (const auto& [label, v] : vectors) {
    if (is_local_label(label)) continue;
    out.push_back({PopulationSpec::parse(label), v});
  }
  return out;
}

std::unique_ptr<StanceJudge> make_judge(const AuditConfig& config, std::unique_ptr<GenerationBackend>& holder) {
  if (config.judge.kind == "remote") {
    holder = std::make_unique<HttpBackend>(
        HttpBackendConfig{config.judge.base_url, config.judge.path, config.judge.api_key_env, true});
    holder->check_configuration();
    return std::make_unique<RemoteJudge>(*holder, config.judge.model_id, config.elicit);
  }
  return std::make_unique<RuleBasedJudge>();
}

// ---- ingest ----

std::vector<std::string> stage_ingest(const Context& ctx) {
  const auto& c = ctx.config;
  const SurveyDataset ds = load_survey(c.survey, c.questions);
  std::vector<VpsVector> vectors;
  for (const auto& country : ds.countries()) {
    vectors.push_back(compute_vps_vector(ds, PopulationSpec::country(country), ds.questions));
  }
  for (const auto& lang : ds.languages()) {
    vectors.push_back(compute_vps_vector(ds, PopulationSpec::language(lang), ds.questions));
  }
  vectors.push_back(compute_vps_vector(ds, PopulationSpec::global(), ds.questions));

  std::vector<std::string> diagnostics = ds.diagnostics;
  for (const auto& lang : c.languages) {
    const auto it = c.local_countries.find(lang);
    if (it == c.local_countries.end() || it->second.empty()) {
      diagnostics.push_back("no local-country set configured for language " + lang);
      continue;
    }
    std::set<std::string> wanted;
    for (const auto& code : it->second) wanted.insert(PopulationSpec::country(code).selector);
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.respondents.size(); ++i) {
      if (PopulationSpec::country(ds.respondents[i].country).selector.empty()) continue;
      if (wanted.count(PopulationSpec::country(ds.respondents[i].country).selector)) members.push_back(i);
    }
    if (members.empty()) {
      diagnostics.push_back("no respondents in the local countries of language " + lang);
      continue;
    }
    vectors.push_back(compute_vps_vector(ds, members, ds.questions, "local:" + lang));
  }

  io::atomic_write(ctx.file("ingest/vps.csv"), to_text([&](std::ostream& o) { write_vps_csv(o, vectors); }));
  write_lines(ctx.file("ingest/diagnostics.txt"), diagnostics);
  ctx.log << fmt::format("ingest: {} respondents, {} questions, {} population vectors\n", ds.respondents.size(),
                         ds.questions.size(), vectors.size());
  return {"ingest/vps.csv", "ingest/diagnostics.txt"};
}

// ---- baseline ----

std::vector<std::string> stage_baseline(const Context& ctx) {
  const auto& c = ctx.config;
  const SurveyDataset ds = load_survey(c.survey, c.questions);
  const auto vectors = load_vectors(ctx);
  std::vector<std::string> diagnostics;

  std::vector<PopulationSpec> pops;
  for (const auto& country : ds.countries()) pops.push_back(PopulationSpec::country(country));
  for (const auto& lang : ds.languages()) pops.push_back(PopulationSpec::language(lang));
  pops.push_back(PopulationSpec::global());
  const std::string human = to_text([&](std::ostream& o) {
    csv::write_row(o, {"population", "level", "mean_rho", "replicates"});
    for (const auto& p : pops) {
      ResampleOptions opt{c.resample_pairs, c.resample_sample_size, derive_seed(ctx.seed, "human|" + p.label)};
      try {
        const auto est = resample_consistency_baseline(ds, p, ds.questions, opt);
        for (const auto& d : est.diagnostics) diagnostics.push_back(d);
        csv::write_row(o, {p.label, to_string(p.kind), csv::format_double(est.mean_rho),
                           std::to_string(est.replicates)});
      } catch (const std::runtime_error& e) {
        diagnostics.push_back(p.label + ": " + e.what());
      }
    }
  });

  std::vector<std::string> qids;
  for (const auto& q : ds.questions) qids.push_back(q.question_id);
  const auto targets = alignment_targets(vectors);
  std::vector<AlignmentRun> rows;
  for (const auto& lang : c.languages) {
    for (std::size_t r = 0; r < c.baseline_replicates; ++r) {
      const VpsVector v = uniform_random_baseline(qids, derive_seed(ctx.seed, fmt::format("random|{}|{}", lang, r)));
      for (const auto& t : targets) {
        try {
          rows.push_back({"random", lang, t.population.kind, t.population.label, fmt::format("r{}", r),
                          spearman(v, t.vector), shared_topics(v, t.vector)});
        } catch (const std::runtime_error& e) {
          if (r == 0) diagnostics.push_back(fmt::format("random/{} vs {}: {}", lang, t.population.label, e.what()));
        }
      }
    }
  }
  io::atomic_write(ctx.file("baseline/human_consistency.csv"), human);
  io::atomic_write(ctx.file("baseline/random_alignment_runs.csv"),
                   to_text([&](std::ostream& o) { write_alignment_runs_csv(o, rows); }));
  write_lines(ctx.file("baseline/diagnostics.txt"), diagnostics);
  ctx.log << fmt::format("baseline: {} human populations, {} random alignment rows\n", pops.size(), rows.size());
  return {"baseline/human_consistency.csv", "baseline/random_alignment_runs.csv", "baseline/diagnostics.txt"};
}

// ---- elicit ----

std::vector<std::string> stage_elicit(const Context& ctx) {
  const auto& c = ctx.config;
  const auto questions = load_codebook(c.questions);
  const auto templates = load_templates(c.templates);
  for (const auto& lang : c.languages) {
    const bool any = std::any_of(templates.begin(), templates.end(), [&](const PromptTemplate& t) {
      return primary_language(t.language) == primary_language(lang);
    });
    if (!any) throw ValidationError("no prompt template for language " + lang);
  }
  const auto vectors = load_vectors(ctx);
  std::vector<std::string> qids;
  for (const auto& q : questions) qids.push_back(q.question_id);

  const auto lookup = [&](const std::string& label, const std::string& who) -> const VpsVector& {
    const auto it = vectors.find(label);
    if (it == vectors.end()) throw ValidationError(who + ": no population vector '" + label + "' in the survey");
    return it->second;
  };

  std::uint64_t crash_after = 0;
  if (const char* env = std::getenv("VALIGN_CRASH_AFTER_RECORDS"); env && *env) {
    crash_after = std::strtoull(env, nullptr, 10);
  }
  std::atomic<std::uint64_t> persisted_total{0};
  const auto on_persisted = [&](std::size_t) {
    const auto n = ++persisted_total;
    if (crash_after > 0 && n >= crash_after) std::_Exit(70);
  };

  const fs::path journal = ctx.file("elicit/journal.jsonl");
  std::vector<GenerationRecord> all;
  std::size_t retries = 0, resumed = 0;
  for (const auto& m : c.models) {
    std::vector<ElicitTask> tasks;
    std::map<std::string, SimulatorConfig> sims;
    for (const auto& lang : c.languages) {
      for (std::size_t run = 0; run < c.repeats; ++run) {
        auto t = plan_condition(questions, templates, c, m.id, lang, run, ctx.seed);
        if (m.backend == "simulator") {
          const auto& s = m.simulator;
          SimulatorConfig sc;
          const std::string who = "model " + m.id;
          if (s.latent == "local") {
            sc.latent_vps = lookup("local:" + lang, who);
          } else if (s.latent == "random") {
            sc.latent_vps =
                uniform_random_baseline(qids, derive_seed(ctx.seed, fmt::format("latent|{}|{}|r{}", m.id, lang, run)));
          } else {
            sc.latent_vps = lookup(PopulationSpec::parse(s.latent).label, who);
          }
          if (!s.target.empty()) sc.target_vps = lookup(PopulationSpec::parse(s.target).label, who);
          sc.bias_blend = s.bias_blend;
          sc.noise_sd = s.noise_sd;
          sc.null_rate = s.null_rate;
          sc.n_respondents = c.n_respondents;
          sc.output_language = lang;
          sc.sampling = s.sampling;
          sc.validate();
          sims[t.empty() ? std::string() : t.front().condition] = std::move(sc);
        }
        tasks.insert(tasks.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
      }
    }
    std::unique_ptr<GenerationBackend> backend;
    if (m.backend == "simulator") {
      backend = std::make_unique<SimulatorBackend>([&sims](const GenerationRequest& r) -> const SimulatorConfig& {
        const auto it = sims.find(r.condition);
        if (it == sims.end()) throw std::logic_error("no simulator settings for " + r.condition);
        return it->second;
      });
    } else {
      backend = std::make_unique<HttpBackend>(HttpBackendConfig{m.base_url, m.path, m.api_key_env, true});
    }
    RunConfig rc = c.elicit;
    rc.seed = ctx.seed;
    auto result = elicit_batch(*backend, tasks, rc, journal, on_persisted);
    retries += result.retries;
    resumed += result.resumed;
    for (auto& rec : result.records) {
      const std::string lang = rec.language;
      all.push_back(filter_record(std::move(rec), lang));
    }
  }
  std::sort(all.begin(), all.end(),
            [](const GenerationRecord& a, const GenerationRecord& b) { return a.record_id < b.record_id; });
  write_records(ctx.file("elicit/records.jsonl"), all);

  struct Tally {
    std::size_t issued = 0, valid = 0, format = 0, language = 0, provider = 0;
  };
  std::map<std::pair<std::string, std::string>, Tally> tally;
  for (const auto& r : all) {
    auto& t = tally[{r.model_id, r.language}];
    ++t.issued;
    switch (r.status) {
      case RecordStatus::valid: ++t.valid; break;
      case RecordStatus::rejected_format: ++t.format; break;
      case RecordStatus::rejected_language: ++t.language; break;
      case RecordStatus::provider_error: ++t.provider; break;
    }
  }
  io::atomic_write(ctx.file("elicit/retention.csv"), to_text([&](std::ostream& o) {
                     csv::write_row(o, {"model_id", "language", "issued", "valid", "rejected_format",
                                        "rejected_language", "provider_error", "retention"});
                     for (const auto& [k, t] : tally) {
                       csv::write_row(o, {k.first, k.second, std::to_string(t.issued), std::to_string(t.valid),
                                          std::to_string(t.format), std::to_string(t.language),
                                          std::to_string(t.provider),
                                          csv::format_double(static_cast<double>(t.valid) /
                                                             static_cast<double>(t.issued))});
                     }
                   }));
  ctx.log << fmt::format("elicit: {} records ({} resumed from journal, {} retries)\n", all.size(), resumed, retries);
  return {"elicit/records.jsonl", "elicit/retention.csv"};
}

// ---- annotate ----

std::vector<std::string> stage_annotate(const Context& ctx) {
  const auto& c = ctx.config;
  const auto records = read_records(ctx.file("elicit/records.jsonl"));
  const auto questions = load_codebook(c.questions);
  std::map<std::string, const QuestionSpec*> by_id;
  for (const auto& q : questions) by_id[q.question_id] = &q;

  std::unique_ptr<GenerationBackend> holder;
  auto judge = make_judge(c, holder);
  std::vector<StanceLabel> labels;
  std::vector<std::string> diagnostics;
  for (const auto& rec : records) {
    if (rec.status != RecordStatus::valid) continue;
    const auto q = by_id.find(rec.question_id);
    if (q == by_id.end()) throw ValidationError(rec.record_id + ": question not in codebook");
    const auto ctx_q = JudgeContext::from(*q->second);
    for (const auto& s : split_statements(rec)) {
      if (auto l = judge_stance(*judge, s, ctx_q, diagnostics)) labels.push_back(*l);
    }
  }
  write_labels(ctx.file("annotate/labels.jsonl"), labels);
  if (c.gold) {
    const auto report = validate_judge(load_gold(*c.gold), *judge, questions);
    io::atomic_write(ctx.file("annotate/judge_validation.json"), to_json_text(report));
    ctx.log << fmt::format("annotate: judge agreement {:.3f}, reliability {:.3f}\n", report.agreement,
                           report.reliability);
  } else {
    const nlohmann::ordered_json j = {{"reliability", 1.0}, {"uncorrected", true}};
    io::atomic_write(ctx.file("annotate/judge_validation.json"), j.dump(2) + "\n");
    ctx.log << "annotate: no gold set configured; consistency will be uncorrected\n";
  }
  write_lines(ctx.file("annotate/diagnostics.txt"), diagnostics);
  ctx.log << fmt::format("annotate: {} labels\n", labels.size());
  return {"annotate/labels.jsonl", "annotate/judge_validation.json", "annotate/diagnostics.txt"};
}

// ---- score ----

double read_reliability(const fs::path& path) {
  try {
    const auto j = nlohmann::json::parse(io::read_text(path));
    return j.at("reliability").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> stage_score(const Context& ctx) {
  const auto& c = ctx.config;
  const auto records = read_records(ctx.file("elicit/records.jsonl"));
  const auto labels = read_labels(ctx.file("annotate/labels.jsonl"));
  const double reliability = read_reliability(ctx.file("annotate/judge_validation.json"));
  const auto vectors = load_vectors(ctx);
  const auto targets = alignment_targets(vectors);

  std::map<std::string, std::vector<StanceLabel>> by_record;
  for (const auto& l : labels) by_record[l.record_id].push_back(l);

  struct Gen {
    GenerationVps vps;
    std::size_t run;
    std::size_t variant;
  };
  std::map<std::pair<std::string, std::string>, std::vector<Gen>> conditions;
  std::vector<std::string> diagnostics;
  for (const auto& rec : records) {
    if (rec.status != RecordStatus::valid) continue;
    const auto it = by_record.find(rec.record_id);
    const std::vector<StanceLabel> none;
    const auto& ls = it == by_record.end() ? none : it->second;
    conditions[{rec.model_id, rec.language}].push_back(
        {compute_generation_vps(rec.record_id, rec.question_id, ls, &diagnostics), rec.run, rec.variant});
  }

  std::vector<AlignmentRun> run_rows;
  std::vector<AlignmentScore> pooled_rows;
  std::vector<ConsistencyScore> consistency;
  std::vector<VpsVector> condition_vectors;
  const auto score_against = [&](const VpsVector& v, const std::string& model, const std::string& lang,
                                 const std::string& run) {
    for (const auto& t : targets) {
      try {
        run_rows.push_back({model, lang, t.population.kind, t.population.label, run, spearman(v, t.vector),
                            shared_topics(v, t.vector)});
      } catch (const std::runtime_error& e) {
        diagnostics.push_back(fmt::format("{}/{} {} vs {}: {}", model, lang, run, t.population.label, e.what()));
      }
    }
  };
  for (const auto& [key, gens] : conditions) {
    const auto& [model, lang] = key;
    std::map<std::size_t, std::vector<GenerationVps>> per_run;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<GenerationVps>> per_generation;
    std::vector<GenerationVps> pooled;
    for (const auto& g : gens) {
      per_run[g.run].push_back(g.vps);
      per_generation[{g.run, g.variant}].push_back(g.vps);
      pooled.push_back(g.vps);
    }
    std::vector<VpsVector> run_vectors;
    for (const auto& [run, v] : per_run) {
      run_vectors.push_back(aggregate_condition_vps(v, model, lang));
      if (c.aggregation == "mean") score_against(run_vectors.back(), model, lang, fmt::format("r{}", run));
    }
    if (c.aggregation == "generation") {
      for (const auto& [rv, v] : per_generation) {
        score_against(aggregate_condition_vps(v, model, lang), model, lang, fmt::format("r{}v{}", rv.first, rv.second));
      }
    }
    const VpsVector all = aggregate_condition_vps(pooled, model, lang);
    condition_vectors.push_back(all);
    for (const auto& t : targets) {
      try {
        pooled_rows.push_back({model, lang, t.population.label, t.population.kind, spearman(all, t.vector),
                               shared_topics(all, t.vector)});
      } catch (const std::runtime_error& e) {
        diagnostics.push_back(fmt::format("{}/{} pooled vs {}: {}", model, lang, t.population.label, e.what()));
      }
    }
    try {
      consistency.push_back(self_consistency(run_vectors, reliability, model, lang));
    } catch (const std::runtime_error& e) {
      diagnostics.push_back(fmt::format("{}/{} self-consistency: {}", model, lang, e.what()));
    }
  }

  io::atomic_write(ctx.file("score/alignment_runs.csv"),
                   to_text([&](std::ostream& o) { write_alignment_runs_csv(o, run_rows); }));
  io::atomic_write(ctx.file("score/alignment.csv"),
                   to_text([&](std::ostream& o) { write_alignment_csv(o, pooled_rows); }));
  io::atomic_write(ctx.file("score/consistency.csv"),
                   to_text([&](std::ostream& o) { write_consistency_csv(o, consistency); }));
  io::atomic_write(ctx.file("score/condition_vps.csv"),
                   to_text([&](std::ostream& o) { write_vps_csv(o, condition_vectors); }));
  write_lines(ctx.file("score/diagnostics.txt"), diagnostics);
  ctx.log << fmt::format("score: {} conditions, {} run-level alignment rows\n", conditions.size(), run_rows.size());
  return {"score/alignment_runs.csv", "score/alignment.csv", "score/consistency.csv", "score/condition_vps.csv",
          "score/diagnostics.txt"};
}

// ---- analyze ----

std::vector<ConsistencyScore> read_consistency_csv(const fs::path& path) {
  const auto t = csv::read_file(path);
  const std::string label = path.string();
  const auto c_m = t.column("model_id", label), c_l = t.column("language", label), c_o = t.column("observed", label),
             c_r = t.column("reliability", label), c_c = t.column("corrected", label);
  std::vector<ConsistencyScore> out;
  for (const auto& row : t.rows) {
    const auto& f = row.fields;
    try {
      out.push_back({f[c_m], f[c_l], std::stod(f[c_o]), std::stod(f[c_r]), std::stod(f[c_c]), 0});
    } catch (const std::exception&) {
      throw ParseError(label, row.line, "non-numeric consistency value");
    }
  }
  return out;
}

bool rq1_row(const AuditConfig& c, const AlignmentRun& a) {
  if (a.model_id == "random") return false;
  if (c.rq1_level == "global") return a.level == PopulationSpec::Kind::global;
  if (c.rq1_level == "language") {
    return a.level == PopulationSpec::Kind::language && a.target == PopulationSpec::language(a.language).label;
  }
  if (a.level != PopulationSpec::Kind::country) return false;
  const auto it = c.local_countries.find(a.language);
  if (it == c.local_countries.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [&](const std::string& code) { return PopulationSpec::country(code).label == a.target; });
}

std::map<std::string, std::string> families(const AuditConfig& c) {
  std::map<std::string, std::string> out;
  for (const auto& m : c.models) out[m.id] = m.family;
  return out;
}

std::vector<std::string> stage_analyze(const Context& ctx) {
  const auto& c = ctx.config;
  if (c.capability.empty()) throw ValidationError("config: capability table is required for analyze");
  const auto runs = read_alignment_runs_csv(ctx.file("score/alignment_runs.csv"));
  const auto consistency = read_consistency_csv(ctx.file("score/consistency.csv"));
  const auto capability = CapabilityTable::load(c.capability);

  std::vector<AlignmentRun> rq1_rows;
  for (const auto& a : runs) {
    if (rq1_row(c, a)) rq1_rows.push_back(a);
  }
  const auto d1 = build_rq1_design(rq1_rows, consistency, capability, families(c), {c.standardize});
  const auto f1 = fit_random_intercept_lmer(d1);
  io::atomic_write(ctx.file("analyze/rq1_coefficients.csv"),
                   to_text([&](std::ostream& o) { write_coefficients_csv(o, coefficient_report(f1, "all")); }));
  auto m1 = fit_metadata(f1, d1);
  m1["level"] = c.rq1_level;
  m1["standardized"] = c.standardize;
  io::atomic_write(ctx.file("analyze/rq1_fit.json"), m1.dump(2) + "\n");

  auto rq2_rows = runs;
  const auto baseline = read_alignment_runs_csv(ctx.file("baseline/random_alignment_runs.csv"));
  rq2_rows.insert(rq2_rows.end(), baseline.begin(), baseline.end());
  const auto d2 = build_rq2_design(rq2_rows, c.local_countries);
  const auto f2 = fit_ols(d2, {c.robust_se});
  io::atomic_write(ctx.file("analyze/rq2_coefficients.csv"),
                   to_text([&](std::ostream& o) { write_coefficients_csv(o, coefficient_report(f2, "all")); }));
  io::atomic_write(ctx.file("analyze/rq2_fit.json"), fit_metadata(f2, d2).dump(2) + "\n");
  ctx.log << fmt::format("analyze: RQ1 {} rows x {} columns ({} groups); RQ2 {} rows x {} columns\n", d1.rows(),
                         d1.cols(), f1.n_groups, d2.rows(), d2.cols());
  return {"analyze/rq1_coefficients.csv", "analyze/rq1_fit.json", "analyze/rq2_coefficients.csv",
          "analyze/rq2_fit.json"};
}

// ---- report ----

struct CoefRow {
  std::string term, estimate, se, stat, p, significant;
};

std::vector<CoefRow> read_coefficients(const fs::path& path) {
  const auto t = csv::read_file(path);
  const std::string label = path.string();
  const auto a = t.column("term", label), b = t.column("estimate", label), s = t.column("se", label),
             z = t.column("stat", label), p = t.column("p", label), g = t.column("significant", label);
  std::vector<CoefRow> out;
  for (const auto& row : t.rows) {
    const auto& f = row.fields;
    out.push_back({f[a], f[b], f[s], f[z], f[p], f[g]});
  }
  return out;
}

// "capability:family=F:lang=L" -> {F, L}; "US:model=M:lang=L" -> {M, L}
std::pair<std::string, std::string> split_term(const std::string& term, const std::string& key) {
  const auto k = term.find(key + "=");
  const auto l = term.rfind(":lang=");
  if (k == std::string::npos || l == std::string::npos || l < k) return {"", ""};
  const auto start = k + key.size() + 1;
  return {term.substr(start, l - start), term.substr(l + 6)};
}

std::string fixed(const std::string& number) {
  try {
    return fmt::format("{:.4f}", std::stod(number));
  } catch (const std::exception&) {
    return number;
  }
}

std::vector<std::string> stage_report(const Context& ctx) {
  const auto& c = ctx.config;
  const auto rq1 = read_coefficients(ctx.file("analyze/rq1_coefficients.csv"));
  const auto rq2 = read_coefficients(ctx.file("analyze/rq2_coefficients.csv"));
  const auto consistency = read_consistency_csv(ctx.file("score/consistency.csv"));
  const auto runs = read_alignment_runs_csv(ctx.file("score/alignment_runs.csv"));
  const auto fit1 = nlohmann::json::parse(io::read_text(ctx.file("analyze/rq1_fit.json")));
  const auto fit2 = nlohmann::json::parse(io::read_text(ctx.file("analyze/rq2_fit.json")));
  const auto human = csv::read_file(ctx.file("baseline/human_consistency.csv"));
  const auto retention = csv::read_file(ctx.file("elicit/retention.csv"));
  const auto fam = families(c);

  std::vector<std::string> outputs;
  const auto emit = [&](const std::string& name, const std::string& text) {
    io::atomic_write(ctx.file("report/" + name), text);
    outputs.push_back("report/" + name);
  };

  emit("fig1_rq1_coefficients.csv", to_text([&](std::ostream& o) {
         csv::write_row(o, {"term", "family", "language", "estimate", "se", "p", "significant"});
         for (const auto& r : rq1) {
           if (r.term.rfind("capability:", 0) != 0) continue;
           const auto [f, l] = split_term(r.term, "family");
           csv::write_row(o, {r.term, f, l, r.estimate, r.se, r.p, r.significant});
         }
       }));
  emit("fig2_self_consistency.csv", to_text([&](std::ostream& o) {
         csv::write_row(o, {"kind", "name", "language", "observed", "corrected"});
         for (const auto& s : consistency) {
           csv::write_row(o, {"model", s.model_id, s.language, csv::format_double(s.observed_rho),
                              csv::format_double(s.corrected)});
         }
         const auto pc = human.column("population"), rc = human.column("mean_rho");
         for (const auto& row : human.rows) {
           const auto& pop = row.fields[pc];
           const std::string lang = pop.rfind("language:", 0) == 0 ? pop.substr(9) : "";
           csv::write_row(o, {"human", pop, lang, row.fields[rc], row.fields[rc]});
         }
       }));
  emit("fig3_capability_alignment.csv", to_text([&](std::ostream& o) {
         std::map<std::pair<std::string, std::string>, std::pair<double, std::size_t>> mean;
         for (const auto& a : runs) {
           if (!rq1_row(c, a)) continue;
           auto& m = mean[{a.model_id, a.language}];
           m.first += a.rho;
           ++m.second;
         }
         std::map<std::pair<std::string, std::string>, double> cons;
         for (const auto& s : consistency) cons[{s.model_id, s.language}] = s.corrected;
         std::optional<CapabilityTable> cap;
         if (!c.capability.empty()) cap = CapabilityTable::load(c.capability);
         csv::write_row(o, {"model_id", "family", "language", "capability", "consistency", "mean_alignment", "runs"});
         for (const auto& [k, m] : mean) {
           const auto cv = cap ? cap->find(k.first, k.second) : std::nullopt;
           const auto ci = cons.find(k);
           const auto fi = fam.find(k.first);
           csv::write_row(o, {k.first, fi == fam.end() ? "" : fi->second, k.second, cv ? csv::format_double(*cv) : "NA",
                              ci == cons.end() ? "NA" : csv::format_double(ci->second),
                              csv::format_double(m.first / static_cast<double>(m.second)), std::to_string(m.second)});
         }
       }));
  emit("fig4_us_bias.csv", to_text([&](std::ostream& o) {
         csv::write_row(o, {"term", "model_id", "language", "estimate", "se", "p", "significant"});
         for (const auto& r : rq2) {
           if (r.term.rfind("US:", 0) != 0) continue;
           const auto [m, l] = split_term(r.term, "model");
           csv::write_row(o, {r.term, m, l, r.estimate, r.se, r.p, r.significant});
         }
       }));

  std::ostringstream s;
  s << "Cultural alignment audit summary\n\n";
  s << "Response retention (valid / issued)\n";
  const auto rm = retention.column("model_id"), rl = retention.column("language"), ri = retention.column("issued"),
             rv = retention.column("valid");
  for (const auto& row : retention.rows) {
    s << fmt::format("  {:<24} {:<4} {} / {}\n", row.fields[rm], row.fields[rl], row.fields[rv], row.fields[ri]);
  }
  const auto table = [&](const std::vector<CoefRow>& rows, const char* stat_name) {
    s << fmt::format("  {:<48} {:>10} {:>10} {:>10} {:>10}\n", "term", "estimate", "se", stat_name, "p");
    for (const auto& r : rows) {
      s << fmt::format("  {:<48} {:>10} {:>10} {:>10} {:>10} {}\n", r.term, fixed(r.estimate), fixed(r.se),
                       fixed(r.stat), fixed(r.p), r.significant);
    }
  };
  s << "\nRQ1: alignment ~ consistency x language + capability x family x language + (1 | model)\n";
  s << fmt::format("  REML variance components: sigma2 = {}, sigma_alpha2 = {}, converged = {}\n",
                   fit1.value("sigma2", nlohmann::json()).dump(), fit1.value("sigma_alpha2", nlohmann::json()).dump(),
                   fit1.value("converged", false) ? "yes" : "no");
  if (const auto note = fit1.value("note", std::string()); !note.empty()) s << "  note: " << note << "\n";
  table(rq1, "z");
  s << "\nRQ2: alignment ~ US + model x language + US x model x language (base case: uniform random)\n";
  s << fmt::format("  n = {}, R^2 = {}, SEs: {}\n", fit2.value("n", 0), fit2.value("r_squared", nlohmann::json()).dump(),
                   fit2.value("se_method", std::string()));
  table(rq2, "t");
  s << "\nSignificant at p < .05\n";
  std::size_t n_sig = 0;
  for (const auto* rows : {&rq1, &rq2}) {
    for (const auto& r : *rows) {
      if (r.significant.empty()) continue;
      s << fmt::format("  * {} = {} (p = {})\n", r.term, fixed(r.estimate), fixed(r.p));
      ++n_sig;
    }
  }
  if (n_sig == 0) s << "  (none)\n";
  s << "\nStars (*) indicate significance at p < .05.\n";
  emit("summary.txt", s.str());

  for (const auto& [from, to] : std::vector<std::pair<std::string, std::string>>{
           {"analyze/rq1_coefficients.csv", "rq1_coefficients.csv"},
           {"analyze/rq2_coefficients.csv", "rq2_coefficients.csv"},
           {"score/alignment.csv", "alignment.csv"},
           {"score/consistency.csv", "consistency.csv"},
           {"elicit/retention.csv", "retention.csv"},
           {"baseline/human_consistency.csv", "human_consistency.csv"}}) {
    emit(to, io::read_text(ctx.file(from)));
  }
  ctx.log << fmt::format("report: {} files\n", outputs.size());
  return outputs;
}

// ---- validate-judge ----

std::vector<std::string> stage_validate_judge(const Context& ctx) {
  const auto& c = ctx.config;
  if (!c.gold) throw ValidationError("config: gold is required for validate-judge");
  const auto questions = load_codebook(c.questions);
  std::unique_ptr<GenerationBackend> holder;
  auto judge = make_judge(c, holder);
  const auto report = validate_judge(load_gold(*c.gold), *judge, questions);
  io::atomic_write(ctx.file("validate-judge/judge_validation.json"), to_json_text(report));
  ctx.log << fmt::format("validate-judge: {} items, agreement {}, vps_mae {}, reliability {}\n", report.n_items,
                         csv::format_double(report.agreement), csv::format_double(report.vps_mae),
                         csv::format_double(report.reliability));
  return {"validate-judge/judge_validation.json"};
}

void mark_dependents_invalid(RunManifest& m, const std::string& stage) {
  bool changed = true;
  std::set<std::string> stale{stage};
  while (changed) {
    changed = false;
    for (const auto& s : stage_names()) {
      if (stale.count(s)) continue;
      for (const auto& up : upstream_of(s)) {
        if (stale.count(up)) {
          stale.insert(s);
          changed = true;
          break;
        }
      }
    }
  }
  for (const auto& s : stale) {
    if (s == stage) continue;
    auto it = m.stages.find(s);
    if (it != m.stages.end() && it->second.status == "complete") {
      it->second.status = "invalid";
      it->second.detail = "upstream stage " + stage + " was re-run";
    }
  }
}

}  // namespace

void run_stage(const std::string& stage, const StageOptions& options) {
  const auto& deps = upstream_of(stage);
  std::ostream& log = options.log ? *options.log : std::clog;
  const AuditConfig config = load_config(options.config_path);
  config.validate();
  const std::uint64_t seed = options.seed.value_or(config.seed);
  const std::string hash = config_hash(config.text, seed);

  fs::create_directories(options.run_dir);
  RunManifest manifest = RunManifest::load(options.run_dir);
  if (!manifest.config_hash.empty() && manifest.config_hash != hash) {
    if (!options.force) {
      throw ValidationError(fmt::format("run directory {} was created with a different config or seed (hash {} vs {}); "
                                        "use --force to start over",
                                        options.run_dir.string(), manifest.config_hash, hash));
    }
    log << "config changed: discarding previous stage records\n";
    manifest.stages.clear();
  }
  manifest.config_hash = hash;
  if (manifest.run_id.empty()) manifest.run_id = "run-" + hash;
  manifest.tool_version = kToolVersion;

  if (manifest.complete(stage) && !options.force) {
    manifest.save(options.run_dir);
    log << stage << ": already complete (use --force to re-run)\n";
    return;
  }
  for (const auto& up : deps) {
    if (!manifest.complete(up)) {
      manifest.save(options.run_dir);
      const auto it = manifest.stages.find(up);
      const std::string why = it == manifest.stages.end() ? "not run" : it->second.status + ": " + it->second.detail;
      throw StageError(fmt::format("{}: upstream stage {} is not complete ({})", stage, up, why));
    }
  }
  if (options.force) fs::remove_all(options.run_dir / stage);

  const Context ctx{config, options.run_dir, seed, log};
  try {
    std::vector<std::string> outputs;
    if (stage == "ingest") outputs = stage_ingest(ctx);
    else if (stage == "baseline") outputs = stage_baseline(ctx);
    else if (stage == "elicit") outputs = stage_elicit(ctx);
    else if (stage == "annotate") outputs = stage_annotate(ctx);
    else if (stage == "score") outputs = stage_score(ctx);
    else if (stage == "analyze") outputs = stage_analyze(ctx);
    else if (stage == "report") outputs = stage_report(ctx);
    else outputs = stage_validate_judge(ctx);
    manifest.stages[stage] = {"complete", outputs, seed, ""};
    if (options.force) mark_dependents_invalid(manifest, stage);
    manifest.save(options.run_dir);
  } catch (const std::exception& e) {
    manifest.stages[stage] = {"failed", {}, seed, e.what()};
    manifest.save(options.run_dir);
    throw;
  }
}

int run_stage_exit_code(const std::string& stage, const StageOptions& options, std::ostream& err) {
  try {
    run_stage(stage, options);
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "stage failure: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace valign
