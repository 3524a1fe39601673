#include "gpmix/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "gpmix/csv.hpp"

namespace gpmix {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_na(std::string_view s) {
  s = trim(s);
  return s.empty() || s == "NA";
}

}  // namespace

DataError::DataError(const std::string& what, std::size_t line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      line_(line) {}

std::string_view to_string(Paradigm v) {
  switch (v) {
    case Paradigm::ET: return "ET";
    case Paradigm::SPR: return "SPR";
    case Paradigm::BSPR: return "BSPR";
    case Paradigm::MAZE: return "MAZE";
  }
  return "?";
}
std::string_view to_string(Task v) {
  switch (v) {
    case Task::JUDGMENT: return "JUDGMENT";
    case Task::QUESTION: return "QUESTION";
    case Task::NONE: return "NONE";
  }
  return "?";
}
std::string_view to_string(Construction v) {
  return v == Construction::NPZ ? "NPZ" : "MVRR";
}
std::string_view to_string(DisambType v) {
  switch (v) {
    case DisambType::COMMA: return "COMMA";
    case DisambType::RELATIVE_CLAUSE: return "RELATIVE_CLAUSE";
    case DisambType::ANIMACY: return "ANIMACY";
  }
  return "?";
}
std::string_view to_string(Ambiguity v) {
  return v == Ambiguity::AMBIGUOUS ? "AMBIGUOUS" : "UNAMBIGUOUS";
}
std::string_view to_string(Regression v) {
  switch (v) {
    case Regression::YES: return "YES";
    case Regression::NO: return "NO";
    case Regression::NA: return "NA";
  }
  return "?";
}
std::string_view to_string(Outcome v) {
  switch (v) {
    case Outcome::GOOD: return "GOOD";
    case Outcome::BAD: return "BAD";
    case Outcome::NA: return "NA";
  }
  return "?";
}
std::string_view to_string(TrialType t) {
  switch (t) {
    case TrialType::GOOD_NOREG: return "GOOD_NOREG";
    case TrialType::GOOD_REG: return "GOOD_REG";
    case TrialType::BAD_NOREG: return "BAD_NOREG";
    case TrialType::BAD_REG: return "BAD_REG";
  }
  return "?";
}

std::optional<Paradigm> parse_paradigm(std::string_view s) {
  const std::string u = upper(trim(s));
  if (u == "ET") return Paradigm::ET;
  if (u == "SPR") return Paradigm::SPR;
  if (u == "BSPR") return Paradigm::BSPR;
  if (u == "MAZE") return Paradigm::MAZE;
  return std::nullopt;
}
std::optional<Task> parse_task(std::string_view s) {
  const std::string u = upper(trim(s));
  if (u == "JUDGMENT") return Task::JUDGMENT;
  if (u == "QUESTION") return Task::QUESTION;
  if (u == "NONE") return Task::NONE;
  return std::nullopt;
}
std::optional<Construction> parse_construction(std::string_view s) {
  const std::string u = upper(trim(s));
  if (u == "NPZ") return Construction::NPZ;
  if (u == "MVRR") return Construction::MVRR;
  return std::nullopt;
}
std::optional<DisambType> parse_disamb_type(std::string_view s) {
  const std::string u = upper(trim(s));
  if (u == "COMMA") return DisambType::COMMA;
  if (u == "RELATIVE_CLAUSE") return DisambType::RELATIVE_CLAUSE;
  if (u == "ANIMACY") return DisambType::ANIMACY;
  return std::nullopt;
}
std::optional<Ambiguity> parse_ambiguity(std::string_view s) {
  const std::string u = upper(trim(s));
  if (u == "AMBIGUOUS") return Ambiguity::AMBIGUOUS;
  if (u == "UNAMBIGUOUS") return Ambiguity::UNAMBIGUOUS;
  return std::nullopt;
}
std::optional<Regression> parse_regression(std::string_view s) {
  const std::string u = upper(trim(s));
  if (u == "YES") return Regression::YES;
  if (u == "NO") return Regression::NO;
  if (u == "NA") return Regression::NA;
  return std::nullopt;
}
std::optional<Outcome> parse_outcome(std::string_view s) {
  const std::string u = upper(trim(s));
  if (u == "GOOD" || u == "ACCEPT" || u == "NO") return Outcome::GOOD;
  if (u == "BAD" || u == "REJECT" || u == "YES") return Outcome::BAD;
  if (u == "NA") return Outcome::NA;
  return std::nullopt;
}

std::string check_trial(const Trial& t) {
  if (t.study_id.empty() || t.participant_id.empty() || t.item_id.empty()) {
    return "empty identifier";
  }
  if (!(t.rt_crit > 0.0) || !(t.rt_spill > 0.0) || !std::isfinite(t.rt_crit) ||
      !std::isfinite(t.rt_spill)) {
    return "reading times must be positive and finite";
  }
  if (t.len_crit < 1 || t.len_spill < 1) return "region lengths must be >= 1";
  if (!regressions_possible(t.paradigm) && t.regression != Regression::NA) {
    return std::string(to_string(t.paradigm)) + " trials cannot have regressions (must be NA)";
  }
  if (t.paradigm == Paradigm::MAZE && t.task != Task::NONE) {
    return "MAZE trials have no end-of-trial task";
  }
  if (t.task != Task::NONE && t.outcome == Outcome::NA) {
    return "task " + std::string(to_string(t.task)) + " requires a GOOD/BAD outcome";
  }
  if (t.task == Task::NONE && t.outcome != Outcome::NA) {
    return "outcome must be NA when there is no task";
  }
  if (t.construction == Construction::NPZ && t.disamb_type != DisambType::COMMA) {
    return "NPZ items are disambiguated by COMMA";
  }
  if (t.construction == Construction::MVRR && t.disamb_type == DisambType::COMMA) {
    return "MVRR items use RELATIVE_CLAUSE or ANIMACY disambiguation";
  }
  for (const auto& s : {t.surp_crit, t.surp_spill}) {
    if (s && (!std::isfinite(*s) || *s < 0.0)) return "surprisal must be finite and >= 0";
  }
  return {};
}

bool in_rt_window(const Trial& t) {
  return t.rt_crit >= kMinRtMs && t.rt_crit <= kMaxRtMs && t.rt_spill >= kMinRtMs &&
         t.rt_spill <= kMaxRtMs;
}

TrialSet::TrialSet(std::vector<Trial> trials, std::size_t n_excluded)
    : trials_(std::move(trials)), n_excluded_(n_excluded) {
  std::unordered_map<std::string, std::size_t> pmap;
  std::unordered_map<std::string, std::size_t> imap;
  std::set<std::tuple<std::string, std::string, std::string>> keys;
  participant_of_.reserve(trials_.size());
  item_of_.reserve(trials_.size());
  for (std::size_t i = 0; i < trials_.size(); ++i) {
    const Trial& t = trials_[i];
    if (auto err = check_trial(t); !err.empty()) {
      throw DataError("trial " + std::to_string(i) + ": " + err);
    }
    if (!keys.emplace(t.participant_id, t.item_id, t.study_id).second) {
      throw DataError("duplicate trial (participant " + t.participant_id + ", item " + t.item_id +
                      ", study " + t.study_id + ")");
    }
    auto [pit, pnew] = pmap.emplace(t.participant_id, participant_ids_.size());
    if (pnew) participant_ids_.push_back(t.participant_id);
    auto [iit, inew] = imap.emplace(t.item_id, item_ids_.size());
    if (inew) item_ids_.push_back(t.item_id);
    participant_of_.push_back(pit->second);
    item_of_.push_back(iit->second);
  }
}

bool TrialSet::all_have_surprisal() const {
  return std::all_of(trials_.begin(), trials_.end(),
                     [](const Trial& t) { return t.has_surprisal(); });
}

TrialSet parse_trials(std::string_view text) {
  const auto ls = csv::lines(text);
  if (ls.empty() || ls.front() != kTrialCsvHeader) {
    throw DataError("missing or unexpected header; expected: " + std::string(kTrialCsvHeader), 1);
  }
  std::vector<Trial> trials;
  std::size_t excluded = 0;
  std::set<std::tuple<std::string, std::string, std::string>> keys;
  for (std::size_t li = 1; li < ls.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (trim(ls[li]).empty()) continue;
    const auto f = csv::split_record(ls[li]);
    if (f.size() != 16) {
      throw DataError("expected 16 fields, found " + std::to_string(f.size()), line_no);
    }
    auto need = [&](auto opt, const char* column) {
      if (!opt) throw DataError("invalid value in column " + std::string(column), line_no);
      return *opt;
    };
    Trial t;
    t.study_id = std::string(trim(f[0]));
    t.participant_id = std::string(trim(f[1]));
    t.item_id = std::string(trim(f[2]));
    t.paradigm = need(parse_paradigm(f[3]), "paradigm");
    t.task = need(parse_task(f[4]), "task");
    t.construction = need(parse_construction(f[5]), "construction");
    t.disamb_type = need(parse_disamb_type(f[6]), "disamb_type");
    t.ambiguity = need(parse_ambiguity(f[7]), "ambiguity");
    t.rt_crit = need(csv::parse_double(f[8]), "rt_crit");
    t.rt_spill = need(csv::parse_double(f[9]), "rt_spill");
    t.regression = need(parse_regression(f[10]), "regression");
    t.outcome = need(parse_outcome(f[11]), "outcome");
    t.len_crit = static_cast<int>(need(csv::parse_long(f[12]), "len_crit"));
    t.len_spill = static_cast<int>(need(csv::parse_long(f[13]), "len_spill"));
    if (!is_na(f[14])) t.surp_crit = need(csv::parse_double(f[14]), "surp_crit");
    if (!is_na(f[15])) t.surp_spill = need(csv::parse_double(f[15]), "surp_spill");
    if (auto err = check_trial(t); !err.empty()) throw DataError(err, line_no);
    if (!keys.emplace(t.participant_id, t.item_id, t.study_id).second) {
      throw DataError("duplicate trial (participant " + t.participant_id + ", item " + t.item_id +
                          ", study " + t.study_id + ")",
                      line_no);
    }
    if (!in_rt_window(t)) {
      ++excluded;
      continue;
    }
    trials.push_back(std::move(t));
  }
  return TrialSet(std::move(trials), excluded);
}

std::string serialize_trials(const TrialSet& ts) {
  std::string out(kTrialCsvHeader);
  out += '\n';
  auto opt = [](const std::optional<double>& v) {
    return v ? csv::format_double(*v) : std::string("NA");
  };
  for (const Trial& t : ts.trials()) {
    out += t.study_id + ',' + t.participant_id + ',' + t.item_id + ',';
    out += std::string(to_string(t.paradigm)) + ',' + std::string(to_string(t.task)) + ',';
    out += std::string(to_string(t.construction)) + ',' + std::string(to_string(t.disamb_type)) +
           ',' + std::string(to_string(t.ambiguity)) + ',';
    out += csv::format_double(t.rt_crit) + ',' + csv::format_double(t.rt_spill) + ',';
    out += std::string(to_string(t.regression)) + ',' + std::string(to_string(t.outcome)) + ',';
    out += std::to_string(t.len_crit) + ',' + std::to_string(t.len_spill) + ',';
    out += opt(t.surp_crit) + ',' + opt(t.surp_spill) + '\n';
  }
  return out;
}

TrialSet read_trials_file(const std::string& path) {
  std::string text;
  try {
    text = csv::read_file(path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  return parse_trials(text);
}

void write_trials_file(const TrialSet& ts, const std::string& path) {
  csv::write_file(path, serialize_trials(ts));
}

void SurprisalTable::insert(const SurprisalKey& key, double surp_crit, double surp_spill) {
  if (!std::isfinite(surp_crit) || !std::isfinite(surp_spill) || surp_crit < 0.0 ||
      surp_spill < 0.0) {
    throw DataError("surprisal for item " + key.item_id + " must be finite and >= 0");
  }
  if (!rows_.emplace(key, std::make_pair(surp_crit, surp_spill)).second) {
    throw DataError("duplicate surprisal key (" + key.item_id + ", " +
                    std::string(to_string(key.ambiguity)) + ", " +
                    std::string(to_string(key.disamb_type)) + ")");
  }
}

const std::pair<double, double>* SurprisalTable::find(const SurprisalKey& key) const {
  auto it = rows_.find(key);
  return it == rows_.end() ? nullptr : &it->second;
}

SurprisalTable parse_surprisal_table(std::string_view text, bool in_bits) {
  const auto ls = csv::lines(text);
  if (ls.empty() || ls.front() != kSurprisalCsvHeader) {
    throw DataError("missing or unexpected surprisal header; expected: " +
                        std::string(kSurprisalCsvHeader),
                    1);
  }
  const double scale = in_bits ? std::log(2.0) : 1.0;
  SurprisalTable st;
  for (std::size_t li = 1; li < ls.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (trim(ls[li]).empty()) continue;
    const auto f = csv::split_record(ls[li]);
    if (f.size() != 5) {
      throw DataError("expected 5 fields, found " + std::to_string(f.size()), line_no);
    }
    auto amb = parse_ambiguity(f[1]);
    auto dis = parse_disamb_type(f[2]);
    auto sc = csv::parse_double(f[3]);
    auto ss = csv::parse_double(f[4]);
    if (!amb || !dis || !sc || !ss) throw DataError("malformed surprisal row", line_no);
    try {
      st.insert({std::string(trim(f[0])), *amb, *dis}, *sc * scale, *ss * scale);
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    }
  }
  return st;
}

std::string serialize_surprisal_table(const SurprisalTable& st) {
  std::string out(kSurprisalCsvHeader);
  out += '\n';
  for (const auto& [key, v] : st.rows()) {
    out += key.item_id + ',' + std::string(to_string(key.ambiguity)) + ',' +
           std::string(to_string(key.disamb_type)) + ',' + csv::format_double(v.first) + ',' +
           csv::format_double(v.second) + '\n';
  }
  return out;
}

TrialSet attach_surprisal(const TrialSet& ts, const SurprisalTable& st, bool strict) {
  std::vector<Trial> out = ts.trials();
  for (Trial& t : out) {
    const SurprisalKey key{t.item_id, t.ambiguity, t.disamb_type};
    const auto* v = st.find(key);
    if (v == nullptr) {
      if (strict) {
        throw DataError("no surprisal for (item_id=" + t.item_id +
                        ", ambiguity=" + std::string(to_string(t.ambiguity)) +
                        ", disamb_type=" + std::string(to_string(t.disamb_type)) + ")");
      }
      continue;
    }
    if (!std::isfinite(v->first) || !std::isfinite(v->second)) {
      throw DataError("non-finite surprisal for item " + t.item_id);
    }
    t.surp_crit = v->first;
    t.surp_spill = v->second;
  }
  return TrialSet(std::move(out), ts.n_excluded());
}

std::optional<TrialType> trial_type_of(const Trial& t) {
  if (t.outcome == Outcome::NA) return std::nullopt;
  bool reg = false;
  if (regressions_possible(t.paradigm)) {
    if (t.regression == Regression::NA) return std::nullopt;
    reg = t.regression == Regression::YES;
  }
  if (t.outcome == Outcome::GOOD) return reg ? TrialType::GOOD_REG : TrialType::GOOD_NOREG;
  return reg ? TrialType::BAD_REG : TrialType::BAD_NOREG;
}

bool trial_type_possible(Paradigm p, Task task, TrialType type) {
  if (task == Task::NONE) return false;
  const bool reg = type == TrialType::GOOD_REG || type == TrialType::BAD_REG;
  return !reg || regressions_possible(p);
}

std::string condition_label(const Trial& t) {
  return std::string(to_string(t.construction)) + '/' + std::string(to_string(t.disamb_type)) +
         '/' + std::string(to_string(t.ambiguity));
}

std::vector<std::string> DatasetSummary::studies() const {
  std::vector<std::string> out;
  for (const auto& c : cells) {
    if (out.empty() || out.back() != c.study_id) out.push_back(c.study_id);
  }
  return out;
}

DatasetSummary summarize_dataset(const TrialSet& ts) {
  if (ts.empty()) throw DataError("cannot summarize an empty trial set");
  std::map<std::pair<std::string, std::string>, CellSummary> cells;
  for (const Trial& t : ts.trials()) {
    auto& c = cells[{t.study_id, condition_label(t)}];
    if (c.n_trials == 0) {
      c.study_id = t.study_id;
      c.condition = condition_label(t);
      c.paradigm = t.paradigm;
      c.task = t.task;
    }
    ++c.n_trials;
    c.mean_rt_crit += t.rt_crit;
    c.mean_rt_spill += t.rt_spill;
    if (auto type = trial_type_of(t)) {
      ++c.n_classified;
      ++c.type_counts[static_cast<std::size_t>(*type)];
    }
  }
  DatasetSummary out;
  for (auto& [key, c] : cells) {
    c.mean_rt_crit /= static_cast<double>(c.n_trials);
    c.mean_rt_spill /= static_cast<double>(c.n_trials);
    if (c.n_classified > 0) {
      for (std::size_t k = 0; k < 4; ++k) {
        c.type_proportions[k] =
            static_cast<double>(c.type_counts[k]) / static_cast<double>(c.n_classified);
      }
    }
    out.cells.push_back(c);
  }
  return out;
}

}  // namespace gpmix
