#include "valign/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "valign/csv.hpp"
#include "valign/errors.hpp"
#include "valign/filter.hpp"
#include "valign/io.hpp"
#include "valign/stance_lexicon.hpp"

namespace valign {

std::string to_string(Stance stance) {
  switch (stance) {
    case Stance::pro:
      return "pro";
    case Stance::con:
      return "con";
    case Stance::null:
      return "null";
  }
  return "null";
}

std::optional<Stance> parse_stance(std::string_view text) {
  std::string t;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(static_cast<char>(std::tolower(c)));
  }
  if (t == "pro") return Stance::pro;
  if (t == "con") return Stance::con;
  if (t == "null") return Stance::null;
  return std::nullopt;
}

std::vector<SubStatement> split_statements(const GenerationRecord& record) {
  std::vector<SubStatement> units;
  bool open = false;
  std::string_view text = record.response_text;
  auto strip = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  while (!text.empty() || open) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto marker = enumeration_marker_length(line)) {
      units.push_back({record.record_id, units.size(), std::string(strip(line.substr(*marker)))});
      open = true;
    } else if (strip(line).empty()) {
      open = false;
    } else if (open) {
      units.back().text += " ";
      units.back().text += strip(line);
    }
    if (nl == std::string_view::npos) break;
  }
  if (units.empty()) {
    throw std::logic_error("record " + record.record_id +
                           ": no enumerated answer units; records reaching annotation must pass the format filter");
  }
  return units;
}

// ---------------------------------------------------------------------------
// Rule-based judge

namespace {

constexpr std::string_view kBreak = "|";

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        static_cast<unsigned char>(text[i + 2]) == 0x99) {
      cur.push_back('\'');  // right single quotation mark
      i += 2;
    } else if (std::isalnum(c) || c >= 0x80 || (c == '\'' && !cur.empty())) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      if (c == ',' || c == '.' || c == ';' || c == ':' || c == '!' || c == '?') {
        if (out.empty() || out.back() != kBreak) out.emplace_back(kBreak);
      }
    }
  }
  flush();
  return out;
}

struct JudgeVocabulary {
  std::set<std::string> stop;
  std::set<std::string> negations;
  std::set<std::string> pro_cues;
  std::set<std::string> con_cues;
  std::vector<std::vector<std::string>> null_markers;

  JudgeVocabulary() {
    for (const auto& lex : all_lexicons()) {
      stop.insert(lex.stopwords.begin(), lex.stopwords.end());
      negations.insert(lex.negations.begin(), lex.negations.end());
      pro_cues.insert(lex.pro_cues.begin(), lex.pro_cues.end());
      con_cues.insert(lex.con_cues.begin(), lex.con_cues.end());
      for (const auto& m : lex.null_markers) null_markers.push_back(tokenize(m));
    }
  }
};

const JudgeVocabulary& vocabulary() {
  static const JudgeVocabulary v;
  return v;
}

// Negators that follow the verb they negate ("jeg støtter det ikke").
const std::set<std::string> kPostNegators = {"ikke", "niet"};

bool stems_match(const std::string& a, const std::string& b) {
  if (a == b) return true;
  const auto& shorter = a.size() < b.size() ? a : b;
  const auto& longer = a.size() < b.size() ? b : a;
  return shorter.size() >= 4 && longer.compare(0, shorter.size(), shorter) == 0;
}

struct Feature {
  std::string token;
  bool negated = false;
};

std::vector<Feature> features(const std::vector<std::string>& tokens) {
  const auto& voc = vocabulary();
  std::vector<Feature> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t == kBreak || voc.stop.count(t) || voc.negations.count(t)) continue;
    bool negated = false;
    for (std::size_t back = 1; back <= 3 && back <= i; ++back) {
      const auto& prev = tokens[i - back];
      if (prev == kBreak) break;
      if (voc.negations.count(prev)) negated = !negated;
    }
    for (std::size_t fwd = 1; fwd <= 2 && i + fwd < tokens.size(); ++fwd) {
      const auto& nxt = tokens[i + fwd];
      if (nxt == kBreak) break;
      if (kPostNegators.count(nxt)) {
        negated = !negated;
        break;
      }
    }
    out.push_back({t, negated});
  }
  return out;
}

bool contains_sequence(const std::vector<std::string>& tokens, const std::vector<std::string>& seq) {
  if (seq.empty() || seq.size() > tokens.size()) return false;
  return std::search(tokens.begin(), tokens.end(), seq.begin(), seq.end()) != tokens.end();
}

bool has_feature(const std::vector<Feature>& set, const Feature& f, bool same_polarity) {
  return std::any_of(set.begin(), set.end(), [&](const Feature& g) {
    return stems_match(g.token, f.token) && (g.negated == f.negated) == same_polarity;
  });
}

// Exemplar features not shared (with the same polarity) by the other exemplar.
std::vector<Feature> distinctive(const std::vector<Feature>& mine, const std::vector<Feature>& other) {
  std::vector<Feature> out;
  for (const auto& f : mine) {
    if (!has_feature(other, f, true)) out.push_back(f);
  }
  return out;
}

}  // namespace

std::optional<Stance> RuleBasedJudge::judge(const SubStatement& statement, const JudgeContext& context,
                                            std::vector<std::string>&) {
  const auto& voc = vocabulary();
  const auto tokens = tokenize(statement.text);
  for (const auto& marker : voc.null_markers) {
    if (contains_sequence(tokens, marker)) return Stance::null;
  }
  const auto stmt = features(tokens);
  const auto pro_all = features(tokenize(context.pro_statement));
  const auto con_all = features(tokenize(context.con_statement));
  const auto pro_ex = distinctive(pro_all, con_all);
  const auto con_ex = distinctive(con_all, pro_all);

  double pro_hits = 0.0, con_hits = 0.0;
  double pro_cue = 0.0, con_cue = 0.0;
  for (const auto& f : stmt) {
    if (has_feature(pro_ex, f, true)) pro_hits += 1.0;
    if (has_feature(pro_ex, f, false)) con_hits += 1.0;
    if (has_feature(con_ex, f, true)) con_hits += 1.0;
    if (has_feature(con_ex, f, false)) pro_hits += 1.0;
    if (voc.pro_cues.count(f.token)) (f.negated ? con_cue : pro_cue) += 1.0;
    if (voc.con_cues.count(f.token)) (f.negated ? pro_cue : con_cue) += 1.0;
  }
  const double norm = static_cast<double>(std::max<std::size_t>(1, std::max(pro_ex.size(), con_ex.size())));
  const double pro = pro_hits / norm + pro_cue;
  const double con = con_hits / norm + con_cue;
  if (pro > con) return Stance::pro;
  if (con > pro) return Stance::con;
  return Stance::null;
}

// ---------------------------------------------------------------------------
// Remote judge

const char* const kJudgeInstructionTemplate =
    "You are annotating answers from a hypothetical survey.\n"
    "Topic: {topic}\n"
    "Example of a supportive (pro) answer: {pro}\n"
    "Example of an opposing (con) answer: {con}\n"
    "Classify the stance of the following answer towards the topic. "
    "Reply with exactly one word: pro, con, or null (null when the answer takes no clear side).\n"
    "Answer: {statement}";

std::string render_judge_prompt(const SubStatement& statement, const JudgeContext& context) {
  std::string out = kJudgeInstructionTemplate;
  auto put = [&](std::string_view key, const std::string& value) {
    const auto pos = out.find(key);
    if (pos != std::string::npos) out.replace(pos, key.size(), value);
  };
  put("{topic}", context.topic_text);
  put("{pro}", context.pro_statement);
  put("{con}", context.con_statement);
  put("{statement}", statement.text);
  return out;
}

Stance coerce_judge_output(std::string_view output, std::vector<std::string>& diagnostics) {
  std::string word;
  for (char c : output) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalpha(u)) {
      word.push_back(static_cast<char>(std::tolower(u)));
    } else if (!word.empty()) {
      break;
    }
  }
  if (auto s = parse_stance(word)) return *s;
  diagnostics.push_back(fmt::format("judge output '{}' is not pro/con/null; coerced to null",
                                    std::string(output.substr(0, 60))));
  return Stance::null;
}

std::optional<Stance> RemoteJudge::judge(const SubStatement& statement, const JudgeContext& context,
                                         std::vector<std::string>& diagnostics) {
  GenerationRequest request;
  request.model_id = model_id_;
  request.prompt_text = render_judge_prompt(statement, context);
  request.temperature = 0.0;
  request.timeout = run_config_.timeout;
  request.record_id = statement.record_id;
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= run_config_.max_retries; ++attempt) {
    try {
      return coerce_judge_output(backend_.generate(request).text, diagnostics);
    } catch (const std::exception& e) {
      last_error = e.what();
      if (attempt < run_config_.max_retries) std::this_thread::sleep_for(retry_delay(run_config_, attempt, 0.5));
    }
  }
  diagnostics.push_back(fmt::format("{}#{} left unlabeled: judge unreachable ({})", statement.record_id,
                                    statement.index, last_error));
  return std::nullopt;
}

std::optional<StanceLabel> judge_stance(StanceJudge& judge, const SubStatement& statement,
                                        const JudgeContext& context, std::vector<std::string>& diagnostics) {
  if (context.topic_text.empty() || context.pro_statement.empty() || context.con_statement.empty()) {
    throw ValidationError("judge context for " + statement.record_id +
                          " needs topic_text, pro_statement and con_statement");
  }
  const auto label = judge.judge(statement, context, diagnostics);
  if (!label) return std::nullopt;
  return StanceLabel{statement.record_id, statement.index, *label};
}

// ---------------------------------------------------------------------------
// Gold-set validation

std::vector<GoldItem> load_gold(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const std::string label = path.string();
  const auto c_s = table.column("statement", label);
  const auto c_t = table.column("topic_id", label);
  const auto c_l = table.column("label", label);
  std::vector<GoldItem> out;
  for (const auto& row : table.rows) {
    const auto stance = parse_stance(row.fields[c_l]);
    if (!stance) throw ParseError(label, row.line, "label must be pro, con or null");
    if (row.fields[c_s].empty()) throw ParseError(label, row.line, "empty statement");
    out.push_back({row.fields[c_s], row.fields[c_t], *stance});
  }
  if (out.empty()) throw ValidationError(label + ": gold set is empty");
  return out;
}

ValidationReport validate_judge(const std::vector<GoldItem>& gold, StanceJudge& judge,
                                const std::vector<QuestionSpec>& questions) {
  if (gold.empty()) throw ValidationError("gold set is empty");
  ValidationReport report;
  struct Counts {
    std::size_t gold_pro = 0, gold_con = 0, judge_pro = 0, judge_con = 0;
  };
  std::map<std::string, Counts> by_topic;
  std::size_t matches = 0, polar = 0, polar_matches = 0;

  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto& item = gold[i];
    const auto q = std::find_if(questions.begin(), questions.end(),
                                [&](const QuestionSpec& s) { return s.question_id == item.topic_id; });
    if (q == questions.end()) {
      throw ValidationError("gold item " + std::to_string(i + 1) + " references unknown topic_id '" +
                            item.topic_id + "'");
    }
    const SubStatement st{"gold:" + item.topic_id, i, item.statement};
    const auto label = judge_stance(judge, st, JudgeContext::from(*q), report.diagnostics);
    if (!label) {
      ++report.n_unlabeled;
      continue;
    }
    ++report.n_items;
    const auto g = static_cast<std::size_t>(item.label);
    const auto j = static_cast<std::size_t>(label->label);
    ++report.confusion[g][j];
    if (g == j) ++matches;
    if (item.label != Stance::null) {
      ++polar;
      if (g == j) ++polar_matches;
    }
    auto& c = by_topic[item.topic_id];
    if (item.label == Stance::pro) ++c.gold_pro;
    if (item.label == Stance::con) ++c.gold_con;
    if (label->label == Stance::pro) ++c.judge_pro;
    if (label->label == Stance::con) ++c.judge_con;
  }
  if (report.n_items == 0) throw std::runtime_error("judge produced no labels for the gold set");
  report.agreement = static_cast<double>(matches) / static_cast<double>(report.n_items);
  report.reliability = polar ? static_cast<double>(polar_matches) / static_cast<double>(polar) : 0.0;

  long double mae_sum = 0.0L;
  for (const auto& [topic, c] : by_topic) {
    const auto dg = c.gold_pro + c.gold_con;
    const auto dj = c.judge_pro + c.judge_con;
    if (dg == 0 || dj == 0) {
      report.diagnostics.push_back("topic " + topic + " excluded from vps_mae: undefined value polarity");
      continue;
    }
    // |a/b - c/d| = |ad - cb| / bd, exact in integers
    const long long num = static_cast<long long>(c.judge_pro * dg) - static_cast<long long>(c.gold_pro * dj);
    mae_sum += static_cast<long double>(num < 0 ? -num : num) / static_cast<long double>(dg * dj);
    ++report.n_records;
  }
  report.vps_mae = report.n_records ? static_cast<double>(mae_sum / report.n_records) : 0.0;
  return report;
}

std::string to_json_text(const ValidationReport& r) {
  nlohmann::ordered_json j;
  j["n_items"] = r.n_items;
  j["n_unlabeled"] = r.n_unlabeled;
  j["agreement"] = r.agreement;
  j["vps_mae"] = r.vps_mae;
  j["n_records"] = r.n_records;
  j["reliability"] = r.reliability;
  j["confusion_order"] = {"pro", "con", "null"};
  j["confusion"] = r.confusion;
  j["diagnostics"] = r.diagnostics;
  return j.dump(2) + "\n";
}

void write_labels(const std::filesystem::path& path, const std::vector<StanceLabel>& labels) {
  std::ostringstream ss;
  for (const auto& l : labels) {
    nlohmann::ordered_json j;
    j["record_id"] = l.record_id;
    j["index"] = l.index;
    j["label"] = to_string(l.label);
    ss << j.dump() << '\n';
  }
  io::atomic_write(path, ss.str());
}

std::vector<StanceLabel> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open labels file: " + path.string());
  std::vector<StanceLabel> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError(path.string(), lineno, "malformed JSON label");
    const auto label = parse_stance(j.at("label").get<std::string>());
    if (!label) throw ParseError(path.string(), lineno, "label must be pro, con or null");
    out.push_back({j.at("record_id").get<std::string>(), j.at("index").get<std::size_t>(), *label});
  }
  return out;
}

}  // namespace valign
