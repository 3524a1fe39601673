#pragma once

// Trial-level data schema, CSV ingestion with the RT exclusion window,
// surprisal joins and per-cell dataset summaries.

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace gpmix {

enum class Paradigm { ET, SPR, BSPR, MAZE };
enum class Task { JUDGMENT, QUESTION, NONE };
enum class Construction { NPZ, MVRR };
enum class DisambType { COMMA, RELATIVE_CLAUSE, ANIMACY };
enum class Ambiguity { AMBIGUOUS, UNAMBIGUOUS };
enum class Regression { YES, NO, NA };
// GOOD = accept / correct "no"; BAD = reject / incorrect "yes".
enum class Outcome { GOOD, BAD, NA };

std::string_view to_string(Paradigm v);
std::string_view to_string(Task v);
std::string_view to_string(Construction v);
std::string_view to_string(DisambType v);
std::string_view to_string(Ambiguity v);
std::string_view to_string(Regression v);
std::string_view to_string(Outcome v);

std::optional<Paradigm> parse_paradigm(std::string_view s);
std::optional<Task> parse_task(std::string_view s);
std::optional<Construction> parse_construction(std::string_view s);
std::optional<DisambType> parse_disamb_type(std::string_view s);
std::optional<Ambiguity> parse_ambiguity(std::string_view s);
std::optional<Regression> parse_regression(std::string_view s);
/// Accepts GOOD/BAD/NA plus the raw ACCEPT/REJECT and NO/YES spellings.
std::optional<Outcome> parse_outcome(std::string_view s);

/// Rereading is only possible in eye tracking and bidirectional SPR.
constexpr bool regressions_possible(Paradigm p) {
  return p == Paradigm::ET || p == Paradigm::BSPR;
}

inline constexpr double kMinRtMs = 150.0;
inline constexpr double kMaxRtMs = 5000.0;

struct Trial {
  std::string study_id;
  std::string participant_id;
  std::string item_id;
  Paradigm paradigm = Paradigm::SPR;
  Task task = Task::NONE;
  Construction construction = Construction::NPZ;
  DisambType disamb_type = DisambType::COMMA;
  Ambiguity ambiguity = Ambiguity::UNAMBIGUOUS;
  double rt_crit = 0.0;
  double rt_spill = 0.0;
  Regression regression = Regression::NA;
  Outcome outcome = Outcome::NA;
  int len_crit = 1;
  int len_spill = 1;
  std::optional<double> surp_crit;
  std::optional<double> surp_spill;

  bool has_surprisal() const { return surp_crit.has_value() && surp_spill.has_value(); }
  friend bool operator==(const Trial&, const Trial&) = default;
};

/// Thrown for schema violations; `line()` is the 1-based CSV line or 0.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Checks the enum-combination and range invariants of a single trial.
/// Returns an empty string when valid, otherwise a description.
std::string check_trial(const Trial& t);

bool in_rt_window(const Trial& t);

/// Immutable ordered collection of trials with dense participant/item indices
/// (assigned in order of first appearance).
class TrialSet {
 public:
  TrialSet() = default;
  /// Throws DataError on invalid trials or duplicate
  /// (participant_id, item_id, study_id) keys.
  explicit TrialSet(std::vector<Trial> trials, std::size_t n_excluded = 0);

  const std::vector<Trial>& trials() const { return trials_; }
  const Trial& operator[](std::size_t i) const { return trials_[i]; }
  std::size_t size() const { return trials_.size(); }
  bool empty() const { return trials_.empty(); }

  std::size_t participant_index(std::size_t trial) const { return participant_of_[trial]; }
  std::size_t item_index(std::size_t trial) const { return item_of_[trial]; }
  std::size_t n_participants() const { return participant_ids_.size(); }
  std::size_t n_items() const { return item_ids_.size(); }
  const std::vector<std::string>& participant_ids() const { return participant_ids_; }
  const std::vector<std::string>& item_ids() const { return item_ids_; }

  /// Rows dropped by the RT window during parsing.
  std::size_t n_excluded() const { return n_excluded_; }
  bool all_have_surprisal() const;

 private:
  std::vector<Trial> trials_;
  std::vector<std::size_t> participant_of_;
  std::vector<std::size_t> item_of_;
  std::vector<std::string> participant_ids_;
  std::vector<std::string> item_ids_;
  std::size_t n_excluded_ = 0;
};

inline constexpr std::string_view kTrialCsvHeader =
    "study_id,participant_id,item_id,paradigm,task,construction,disamb_type,ambiguity,"
    "rt_crit,rt_spill,regression,outcome,len_crit,len_spill,surp_crit,surp_spill";

inline constexpr std::string_view kSurprisalCsvHeader =
    "item_id,ambiguity,disamb_type,surp_crit,surp_spill";

/// Parses the trial CSV. Rows with either RT outside [150, 5000] ms are
/// dropped and counted; anything malformed throws DataError with its line.
TrialSet parse_trials(std::string_view csv);
std::string serialize_trials(const TrialSet& ts);

TrialSet read_trials_file(const std::string& path);
void write_trials_file(const TrialSet& ts, const std::string& path);

struct SurprisalKey {
  std::string item_id;
  Ambiguity ambiguity = Ambiguity::UNAMBIGUOUS;
  DisambType disamb_type = DisambType::COMMA;
  auto operator<=>(const SurprisalKey&) const = default;
};

class SurprisalTable {
 public:
  /// Throws DataError on duplicate keys or negative / non-finite values.
  void insert(const SurprisalKey& key, double surp_crit, double surp_spill);
  const std::pair<double, double>* find(const SurprisalKey& key) const;
  std::size_t size() const { return rows_.size(); }
  const std::map<SurprisalKey, std::pair<double, double>>& rows() const { return rows_; }

 private:
  std::map<SurprisalKey, std::pair<double, double>> rows_;
};

/// `in_bits` converts values to nats on ingest.
SurprisalTable parse_surprisal_table(std::string_view csv, bool in_bits = false);
std::string serialize_surprisal_table(const SurprisalTable& st);

/// Returns a copy of `ts` with surprisal columns filled from `st`. With
/// strict=false, unmatched trials keep their previous (possibly unset)
/// surprisal values.
TrialSet attach_surprisal(const TrialSet& ts, const SurprisalTable& st, bool strict = true);

/// Joint end-of-trial category used for trial-type tables.
enum class TrialType { GOOD_NOREG, GOOD_REG, BAD_NOREG, BAD_REG };
inline constexpr std::array<TrialType, 4> kAllTrialTypes = {
    TrialType::GOOD_NOREG, TrialType::GOOD_REG, TrialType::BAD_NOREG, TrialType::BAD_REG};
std::string_view to_string(TrialType t);

/// Trial type, or nullopt when the outcome (or a possible regression) is
/// missing. SPR trials count as "no regression".
std::optional<TrialType> trial_type_of(const Trial& t);
/// Whether the paradigm/task cell can produce this trial type at all.
bool trial_type_possible(Paradigm p, Task task, TrialType type);

/// Condition label, e.g. "NPZ/COMMA/AMBIGUOUS".
std::string condition_label(const Trial& t);

struct CellSummary {
  std::string study_id;
  std::string condition;
  Paradigm paradigm = Paradigm::SPR;
  Task task = Task::NONE;
  std::size_t n_trials = 0;
  double mean_rt_crit = 0.0;
  double mean_rt_spill = 0.0;
  std::size_t n_classified = 0;
  std::array<std::size_t, 4> type_counts{};
  std::array<double, 4> type_proportions{};
};

struct DatasetSummary {
  std::vector<CellSummary> cells;  // sorted by (study, condition)
  std::vector<std::string> studies() const;
};

DatasetSummary summarize_dataset(const TrialSet& ts);

}  // namespace gpmix
