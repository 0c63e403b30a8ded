#include "valign/ground_truth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <unordered_set>

#include <fmt/format.h>

#include "valign/csv.hpp"
#include "valign/errors.hpp"
#include "valign/random.hpp"
#include "valign/rank_correlation.hpp"

namespace valign {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<int> parse_int(std::string_view text) {
  const std::string t = trim(text);
  int value = 0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (!t.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || t.empty()) return std::nullopt;
  return value;
}

std::optional<double> parse_double(std::string_view text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool parse_bool(std::string_view text, bool& out) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "1" || t == "true" || t == "yes") {
    out = true;
    return true;
  }
  if (t == "0" || t == "false" || t == "no" || t.empty()) {
    out = false;
    return true;
  }
  return false;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

}  // namespace

void QuestionSpec::validate() const {
  if (question_id.empty()) throw ValidationError("question with empty question_id");
  if (scale_min >= scale_max) {
    throw ValidationError(fmt::format("question {}: scale_min {} must be below scale_max {}", question_id,
                                      scale_min, scale_max));
  }
  for (int code : missing_codes) {
    if (code >= scale_min && code <= scale_max) {
      throw ValidationError(fmt::format("question {}: missing code {} lies inside the valid scale [{}, {}]",
                                        question_id, code, scale_min, scale_max));
    }
  }
}

const QuestionSpec* SurveyDataset::find_question(const std::string& id) const {
  for (const auto& q : questions) {
    if (q.question_id == id) return &q;
  }
  return nullptr;
}

std::set<std::string> SurveyDataset::countries() const {
  std::set<std::string> out;
  for (const auto& r : respondents) out.insert(r.country);
  return out;
}

std::set<std::string> SurveyDataset::languages() const {
  std::set<std::string> out;
  for (const auto& r : respondents) out.insert(r.language);
  return out;
}

PopulationSpec PopulationSpec::country(std::string code) {
  code = upper(std::move(code));
  return {Kind::country, code, "country:" + code};
}

PopulationSpec PopulationSpec::language(std::string tag) {
  tag = lower(std::move(tag));
  return {Kind::language, tag, "language:" + tag};
}

PopulationSpec PopulationSpec::global() { return {Kind::global, "", "global"}; }

PopulationSpec PopulationSpec::parse(const std::string& text) {
  if (text == "global") return global();
  const auto colon = text.find(':');
  if (colon != std::string::npos && colon + 1 < text.size()) {
    const std::string kind = text.substr(0, colon);
    const std::string sel = text.substr(colon + 1);
    if (kind == "country") return country(sel);
    if (kind == "language") return language(sel);
  }
  throw ValidationError("invalid population '" + text + "' (expected country:XX, language:xx or global)");
}

bool PopulationSpec::matches(const Respondent& r) const {
  switch (kind) {
    case Kind::global:
      return true;
    case Kind::country:
      return upper(r.country) == selector;
    case Kind::language:
      return lower(r.language) == selector;
  }
  return false;
}

std::string to_string(PopulationSpec::Kind kind) {
  switch (kind) {
    case PopulationSpec::Kind::country:
      return "country";
    case PopulationSpec::Kind::language:
      return "language";
    case PopulationSpec::Kind::global:
      return "global";
  }
  return "?";
}

std::vector<QuestionSpec> load_codebook(const std::filesystem::path& codebook_file) {
  const auto table = csv::read_file(codebook_file);
  const std::string label = codebook_file.string();
  const auto c_id = table.column("question_id", label);
  const auto c_kind = table.column("scale_kind", label);
  const auto c_min = table.column("scale_min", label);
  const auto c_max = table.column("scale_max", label);
  const auto c_rev = table.column("reverse_scored", label);
  const auto c_miss = table.column("missing_codes", label);
  const auto c_topic = table.column("topic_text", label);
  const auto c_pro = table.column("pro_statement", label);
  const auto c_con = table.column("con_statement", label);

  std::vector<QuestionSpec> out;
  std::unordered_set<std::string> seen;
  for (const auto& row : table.rows) {
    const auto& f = row.fields;
    QuestionSpec q;
    q.question_id = trim(f[c_id]);
    const std::string kind = lower(trim(f[c_kind]));
    if (kind == "binary_agree") {
      q.scale_kind = ScaleKind::binary_agree;
    } else if (kind == "rating") {
      q.scale_kind = ScaleKind::rating;
    } else {
      throw ParseError(label, row.line, "unknown scale_kind '" + kind + "'");
    }
    const auto mn = parse_int(f[c_min]);
    const auto mx = parse_int(f[c_max]);
    if (!mn || !mx) throw ParseError(label, row.line, "scale_min/scale_max must be integers");
    q.scale_min = *mn;
    q.scale_max = *mx;
    if (!parse_bool(f[c_rev], q.reverse_scored)) {
      throw ParseError(label, row.line, "reverse_scored must be a boolean");
    }
    std::string_view codes = f[c_miss];
    while (!codes.empty()) {
      const auto semi = codes.find(';');
      const auto piece = codes.substr(0, semi);
      if (!trim(piece).empty()) {
        const auto code = parse_int(piece);
        if (!code) throw ParseError(label, row.line, "missing_codes must be ';'-separated integers");
        q.missing_codes.insert(*code);
      }
      if (semi == std::string_view::npos) break;
      codes.remove_prefix(semi + 1);
    }
    q.topic_text = f[c_topic];
    q.pro_statement = f[c_pro];
    q.con_statement = f[c_con];
    try {
      q.validate();
    } catch (const ValidationError& e) {
      throw ParseError(label, row.line, e.what());
    }
    if (!seen.insert(q.question_id).second) {
      throw ParseError(label, row.line, "duplicate question_id '" + q.question_id + "'");
    }
    out.push_back(std::move(q));
  }
  return out;
}

SurveyDataset load_survey(const std::filesystem::path& respondent_file,
                          const std::filesystem::path& codebook_file) {
  SurveyDataset ds;
  ds.questions = load_codebook(codebook_file);

  const auto table = csv::read_file(respondent_file);
  const std::string label = respondent_file.string();
  const auto c_id = table.column("respondent_id", label);
  const auto c_country = table.column("country", label);
  const auto c_lang = table.column("language", label);
  const auto c_weight = table.column("weight", label);

  std::vector<std::pair<std::size_t, std::string>> question_cols;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i == c_id || i == c_country || i == c_lang || i == c_weight) continue;
    const std::string qid = trim(table.header[i]);
    if (!ds.find_question(qid)) {
      throw ValidationError(fmt::format("{}: unknown question_id '{}' (not in codebook {})", label, qid,
                                        codebook_file.string()));
    }
    question_cols.emplace_back(i, qid);
  }

  std::unordered_set<std::string> ids;
  for (const auto& row : table.rows) {
    const auto& f = row.fields;
    Respondent r;
    r.respondent_id = trim(f[c_id]);
    r.country = trim(f[c_country]);
    r.language = trim(f[c_lang]);
    if (r.respondent_id.empty()) throw ParseError(label, row.line, "empty respondent_id");
    if (r.country.empty() || r.language.empty()) {
      throw ParseError(label, row.line, "country and language must be non-empty");
    }
    const auto w = parse_double(f[c_weight]);
    if (!w || !std::isfinite(*w)) throw ParseError(label, row.line, "weight is not a number");
    if (!ids.insert(r.respondent_id).second) {
      throw ParseError(label, row.line, "duplicate respondent_id '" + r.respondent_id + "'");
    }
    if (*w <= 0.0) {
      ds.diagnostics.push_back(fmt::format("{}:{}: respondent '{}' rejected: non-positive weight {}", label,
                                           row.line, r.respondent_id, *w));
      continue;
    }
    r.weight = *w;
    for (const auto& [col, qid] : question_cols) {
      if (trim(f[col]).empty()) continue;
      const auto code = parse_int(f[col]);
      if (!code) {
        throw ParseError(label, row.line, fmt::format("answer to {} is not an integer: '{}'", qid, f[col]));
      }
      r.answers.emplace(qid, *code);
    }
    ds.respondents.push_back(std::move(r));
  }
  return ds;
}

std::optional<int> binarize_response(int raw_code, const QuestionSpec& spec) {
  if (spec.missing_codes.count(raw_code)) return std::nullopt;
  if (raw_code < spec.scale_min || raw_code > spec.scale_max) return std::nullopt;
  int stance = 0;
  if (spec.scale_kind == ScaleKind::binary_agree) {
    // lowest code is "agree", highest is "disagree"
    if (raw_code == spec.scale_min) {
      stance = 1;
    } else if (raw_code == spec.scale_max) {
      stance = 0;
    } else {
      return std::nullopt;
    }
  } else {
    // compare 2*raw against min+max to stay in integers
    const long twice = 2L * raw_code;
    const long mid2 = static_cast<long>(spec.scale_min) + spec.scale_max;
    if (twice == mid2) return std::nullopt;
    stance = twice > mid2 ? 1 : 0;
  }
  return spec.reverse_scored ? 1 - stance : stance;
}

VpsVector compute_vps_vector(const SurveyDataset& dataset, const std::vector<std::size_t>& members,
                             const std::vector<QuestionSpec>& questions, const std::string& label) {
  VpsVector out;
  out.label = label;
  for (const auto& q : questions) {
    double weight_total = 0.0;
    double weight_pro = 0.0;
    std::size_t count = 0;
    for (std::size_t idx : members) {
      const auto& r = dataset.respondents[idx];
      const auto it = r.answers.find(q.question_id);
      if (it == r.answers.end()) continue;
      const auto stance = binarize_response(it->second, q);
      if (!stance) continue;
      weight_total += r.weight;
      if (*stance == 1) weight_pro += r.weight;
      ++count;
    }
    if (count == 0) continue;
    out.entries[q.question_id] = std::clamp(weight_pro / weight_total, 0.0, 1.0);
    out.counts[q.question_id] = count;
  }
  return out;
}

VpsVector compute_vps_vector(const SurveyDataset& dataset, const PopulationSpec& population,
                             const std::vector<QuestionSpec>& questions) {
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < dataset.respondents.size(); ++i) {
    if (population.matches(dataset.respondents[i])) members.push_back(i);
  }
  if (members.empty()) throw EmptyPopulationError("population " + population.label + " selects no respondents");
  auto out = compute_vps_vector(dataset, members, questions, population.label);
  if (out.entries.empty()) {
    throw EmptyPopulationError("population " + population.label + " has no valid answers to any question");
  }
  return out;
}

ConsistencyEstimate resample_consistency_baseline(const SurveyDataset& dataset,
                                                  const PopulationSpec& population,
                                                  const std::vector<QuestionSpec>& questions,
                                                  const ResampleOptions& options) {
  if (options.replicate_pairs < 2) throw ValidationError("resampling needs at least 2 replicate pairs");
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < dataset.respondents.size(); ++i) {
    if (population.matches(dataset.respondents[i])) members.push_back(i);
  }
  if (members.empty()) throw EmptyPopulationError("population " + population.label + " selects no respondents");
  const std::size_t m = options.sample_size ? options.sample_size : members.size();

  ConsistencyEstimate est;
  est.population = population.label;
  std::vector<std::size_t> sample_a(m), sample_b(m);
  for (std::size_t b = 0; b < options.replicate_pairs; ++b) {
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(b)));
    for (auto& s : sample_a) s = members[rng.below(members.size())];
    for (auto& s : sample_b) s = members[rng.below(members.size())];
    const auto va = compute_vps_vector(dataset, sample_a, questions, population.label);
    const auto vb = compute_vps_vector(dataset, sample_b, questions, population.label);
    std::vector<double> xa, xb;
    for (const auto& [q, v] : va.entries) {
      const auto it = vb.entries.find(q);
      if (it == vb.entries.end()) continue;
      xa.push_back(v);
      xb.push_back(it->second);
    }
    try {
      est.per_replicate.push_back(spearman_rho(xa, xb));
    } catch (const std::runtime_error& e) {
      est.diagnostics.push_back(fmt::format("replicate {} skipped: {}", b, e.what()));
    }
  }
  if (est.per_replicate.empty()) {
    throw UndefinedCorrelationError("all " + std::to_string(options.replicate_pairs) +
                                    " resampling replicates were skipped for " + population.label);
  }
  est.replicates = est.per_replicate.size();
  double sum = 0.0;
  for (double r : est.per_replicate) sum += r;
  est.mean_rho = sum / static_cast<double>(est.replicates);
  return est;
}

void write_vps_csv(std::ostream& out, const std::vector<VpsVector>& vectors) {
  csv::write_row(out, {"population", "question_id", "vps", "count"});
  for (const auto& v : vectors) {
    for (const auto& [q, value] : v.entries) {
      const auto c = v.counts.find(q);
      csv::write_row(out, {v.label, q, csv::format_double(value),
                           std::to_string(c == v.counts.end() ? 0 : c->second)});
    }
  }
}

std::vector<VpsVector> read_vps_csv(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const std::string label = path.string();
  const auto c_pop = table.column("population", label);
  const auto c_q = table.column("question_id", label);
  const auto c_v = table.column("vps", label);
  const auto c_n = table.column("count", label);
  std::vector<VpsVector> out;
  std::map<std::string, std::size_t> index;
  for (const auto& row : table.rows) {
    const auto& pop = row.fields[c_pop];
    auto [it, inserted] = index.emplace(pop, out.size());
    if (inserted) out.push_back(VpsVector{pop, {}, {}});
    const auto v = parse_double(row.fields[c_v]);
    const auto n = parse_int(row.fields[c_n]);
    if (!v || *v < 0.0 || *v > 1.0 || !n || *n < 0) throw ParseError(label, row.line, "invalid vps/count");
    out[it->second].entries[row.fields[c_q]] = *v;
    out[it->second].counts[row.fields[c_q]] = static_cast<std::size_t>(*n);
  }
  return out;
}

}  // namespace valign
