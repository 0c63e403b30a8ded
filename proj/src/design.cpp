#include "valign/design.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "valign/csv.hpp"
#include "valign/errors.hpp"

namespace valign {

void check_full_rank(const DesignMatrix& design, double tolerance) {
  const auto n = design.rows();
  const auto p = design.cols();
  if (n <= p) {
    throw RankDeficiencyError("", fmt::format("design has {} rows for {} columns; need more rows than columns", n, p));
  }
  // Gram-Schmidt with reorthogonalisation, column by column.
  Eigen::MatrixXd q(n, p);
  Eigen::Index kept = 0;
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXd v = design.x.col(j);
    const double norm0 = v.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = 0; k < kept; ++k) v -= q.col(k).dot(v) * q.col(k);
    }
    const double norm = v.norm();
    if (norm0 == 0.0 || norm <= tolerance * std::max(1.0, norm0)) {
      throw RankDeficiencyError(design.columns[static_cast<std::size_t>(j)],
                                fmt::format("design is rank deficient: column '{}' is a linear combination of "
                                            "earlier columns",
                                            design.columns[static_cast<std::size_t>(j)]));
    }
    q.col(kept++) = v / norm;
  }
}

void write_alignment_runs_csv(std::ostream& out, const std::vector<AlignmentRun>& rows) {
  csv::write_row(out, {"model_id", "language", "level", "target", "run", "rho", "n_topics"});
  for (const auto& r : rows) {
    csv::write_row(out, {r.model_id, r.language, to_string(r.level), r.target, r.run, csv::format_double(r.rho),
                         std::to_string(r.n_topics)});
  }
}

std::vector<AlignmentRun> read_alignment_runs_csv(const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  const std::string label = path.string();
  const auto c_m = t.column("model_id", label), c_l = t.column("language", label), c_lv = t.column("level", label),
             c_t = t.column("target", label), c_r = t.column("run", label), c_rho = t.column("rho", label),
             c_n = t.column("n_topics", label);
  std::vector<AlignmentRun> out;
  for (const auto& row : t.rows) {
    const auto& f = row.fields;
    AlignmentRun a;
    a.model_id = f[c_m];
    a.language = f[c_l];
    if (f[c_lv] == "country") {
      a.level = PopulationSpec::Kind::country;
    } else if (f[c_lv] == "language") {
      a.level = PopulationSpec::Kind::language;
    } else if (f[c_lv] == "global") {
      a.level = PopulationSpec::Kind::global;
    } else {
      throw ParseError(label, row.line, "unknown level '" + f[c_lv] + "'");
    }
    a.target = f[c_t];
    a.run = f[c_r];
    try {
      a.rho = std::stod(f[c_rho]);
      a.n_topics = static_cast<std::size_t>(std::stoul(f[c_n]));
    } catch (const std::exception&) {
      throw ParseError(label, row.line, "rho/n_topics not numeric");
    }
    out.push_back(std::move(a));
  }
  return out;
}

CapabilityTable CapabilityTable::load(const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  const std::string label = path.string();
  const auto c_m = t.column("model_id", label), c_l = t.column("language", label),
             c_c = t.column("capability", label);
  CapabilityTable table;
  for (const auto& row : t.rows) {
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(row.fields[c_c], &used);
      if (used != row.fields[c_c].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(label, row.line, "capability is not a number");
    }
    if (!std::isfinite(v)) throw ParseError(label, row.line, "capability must be finite");
    try {
      table.add(row.fields[c_m], row.fields[c_l], v);
    } catch (const ValidationError& e) {
      throw ParseError(label, row.line, e.what());
    }
  }
  return table;
}

void CapabilityTable::add(const std::string& model_id, const std::string& language, double capability) {
  if (!scores_.emplace(std::make_pair(model_id, language), capability).second) {
    throw ValidationError(fmt::format("duplicate capability row for ({}, {})", model_id, language));
  }
}

std::optional<double> CapabilityTable::find(const std::string& model_id, const std::string& language) const {
  const auto it = scores_.find({model_id, language});
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

namespace {

void standardize_in_place(std::vector<double>& v) {
  if (v.size() < 2) return;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
}

}  // namespace

DesignMatrix build_rq1_design(const std::vector<AlignmentRun>& alignment,
                              const std::vector<ConsistencyScore>& consistency, const CapabilityTable& capability,
                              const std::map<std::string, std::string>& family_of_model,
                              const Rq1Options& options) {
  if (alignment.empty()) throw ValidationError("RQ1 design: no alignment rows");
  std::map<std::pair<std::string, std::string>, double> cons;
  for (const auto& c : consistency) cons[{c.model_id, c.language}] = c.corrected;

  const std::size_t n = alignment.size();
  std::vector<double> x_cons(n), x_cap(n);
  std::vector<std::string> fam(n);
  std::set<std::string> languages;
  std::set<std::pair<std::string, std::string>> family_language;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = alignment[i];
    const auto c = cons.find({a.model_id, a.language});
    if (c == cons.end()) {
      throw ValidationError(fmt::format("RQ1 design: no consistency score for ({}, {})", a.model_id, a.language));
    }
    const auto cap = capability.find(a.model_id, a.language);
    if (!cap) {
      throw ValidationError(fmt::format("RQ1 design: no capability row for ({}, {})", a.model_id, a.language));
    }
    const auto f = family_of_model.find(a.model_id);
    if (f == family_of_model.end() || f->second.empty()) {
      throw ValidationError("RQ1 design: no family for model " + a.model_id);
    }
    if (a.model_id.empty()) throw ValidationError("RQ1 design: empty model id");
    if (!std::isfinite(c->second) || !std::isfinite(*cap)) {
      throw ValidationError(fmt::format("RQ1 design: non-finite covariate for ({}, {})", a.model_id, a.language));
    }
    x_cons[i] = c->second;
    x_cap[i] = *cap;
    fam[i] = f->second;
    languages.insert(a.language);
    family_language.insert({f->second, a.language});
  }
  if (options.standardize) {
    standardize_in_place(x_cons);
    standardize_in_place(x_cap);
  }

  DesignMatrix d;
  d.columns.push_back("(Intercept)");
  for (const auto& l : languages) d.columns.push_back("consistency:lang=" + l);
  for (const auto& [f, l] : family_language) d.columns.push_back("capability:family=" + f + ":lang=" + l);
  d.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d.columns.size()));
  d.y.resize(static_cast<Eigen::Index>(n));
  d.groups.resize(n);
  const auto lang_index = [&](const std::string& l) {
    return static_cast<Eigen::Index>(1 + std::distance(languages.begin(), languages.find(l)));
  };
  const auto fl_index = [&](const std::string& f, const std::string& l) {
    return static_cast<Eigen::Index>(1 + languages.size() +
                                     std::distance(family_language.begin(), family_language.find({f, l})));
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    d.x(r, 0) = 1.0;
    d.x(r, lang_index(alignment[i].language)) = x_cons[i];
    d.x(r, fl_index(fam[i], alignment[i].language)) = x_cap[i];
    d.y(r) = alignment[i].rho;
    d.groups[i] = alignment[i].model_id;
  }
  d.formula = "CA ~ 1 + consistency:language + capability:family:language + (1 | model)";
  check_full_rank(d);
  return d;
}

LocalCountryMap default_local_countries() {
  // English needs a user-supplied set (US excluded).
  return {{"da", {"DK"}}, {"nl", {"NL"}}, {"pt", {"PT", "BR"}}, {"en", {}}};
}

LocalCountryMap load_local_countries(const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  const std::string label = path.string();
  const auto c_l = t.column("language", label), c_c = t.column("country", label);
  LocalCountryMap out;
  for (const auto& row : t.rows) {
    auto& list = out[row.fields[c_l]];
    if (std::find(list.begin(), list.end(), row.fields[c_c]) == list.end()) list.push_back(row.fields[c_c]);
  }
  return out;
}

DesignMatrix build_rq2_design(const std::vector<AlignmentRun>& alignment, const LocalCountryMap& local,
                              const Rq2Options& options) {
  const std::string us_label = PopulationSpec::country(options.us_country).label;
  struct Row {
    const AlignmentRun* a;
    bool us;
  };
  std::vector<Row> rows;
  std::set<std::pair<std::string, std::string>> conditions;
  std::set<std::pair<std::string, std::string>> with_us, with_local;
  std::set<std::string> baseline_languages;
  for (const auto& a : alignment) {
    if (a.level != PopulationSpec::Kind::country) continue;
    const auto loc = local.find(a.language);
    if (loc == local.end() || loc->second.empty()) {
      throw ValidationError("RQ2 design: language '" + a.language + "' has an empty local-country set");
    }
    bool is_local = false;
    for (const auto& c : loc->second) {
      if (PopulationSpec::country(c).label == a.target) is_local = true;
    }
    const bool is_us = a.target == us_label;
    if (!is_us && !is_local) continue;
    rows.push_back({&a, is_us});
    const bool baseline = a.model_id == options.baseline_model;
    if (baseline) {
      baseline_languages.insert(a.language);
    } else {
      conditions.insert({a.model_id, a.language});
    }
    (is_us ? with_us : with_local).insert({a.model_id, a.language});
  }
  if (conditions.empty()) throw ValidationError("RQ2 design: no model rows at country level");
  for (const auto& c : conditions) {
    if (!with_us.count(c)) {
      throw ValidationError(fmt::format("RQ2 design: missing US rows for ({}, {})", c.first, c.second));
    }
    if (!with_local.count(c)) {
      throw ValidationError(fmt::format("RQ2 design: missing local rows for ({}, {})", c.first, c.second));
    }
  }
  if (baseline_languages.empty()) throw ValidationError("RQ2 design: no baseline rows (base case)");

  DesignMatrix d;
  d.columns = {"(Intercept)", "US"};
  for (const auto& [m, l] : conditions) d.columns.push_back("model=" + m + ":lang=" + l);
  for (const auto& [m, l] : conditions) d.columns.push_back("US:model=" + m + ":lang=" + l);
  const auto n = static_cast<Eigen::Index>(rows.size());
  d.x = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(d.columns.size()));
  d.y.resize(n);
  const auto k = static_cast<Eigen::Index>(conditions.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    d.x(i, 0) = 1.0;
    d.x(i, 1) = r.us ? 1.0 : 0.0;
    const auto it = conditions.find({r.a->model_id, r.a->language});
    if (it != conditions.end()) {
      const auto c = static_cast<Eigen::Index>(std::distance(conditions.begin(), it));
      d.x(i, 2 + c) = 1.0;
      if (r.us) d.x(i, 2 + k + c) = 1.0;
    }
    d.y(i) = r.a->rho;
  }
  d.formula = "CA ~ 1 + US + model:language + US:model:language (base case: uniform random VPS)";
  check_full_rank(d);
  return d;
}

}  // namespace valign
