#pragma once

// Posterior predictive checks: datasets replicated from posterior draws on
// the observed design, and trial-type proportion tables per study and
// condition.

#include <cstdint>
#include <string>
#include <vector>

#include "gpmix/data.hpp"
#include "gpmix/sampler.hpp"

namespace gpmix {

inline constexpr std::size_t kDefaultReplicates = 500;

/// Simulates `n_reps` datasets on the design frame of `ts`, each from one
/// retained draw (evenly spaced over the concatenated chains) with that
/// draw's participant and item effects. The draws must come from an MPT-family
/// fit of `ts`; `with_surprisal` selects the hybrid layout. Deterministic in
/// `seed` regardless of thread count.
std::vector<TrialSet> replicate(const PosteriorDraws& pd, const TrialSet& ts, bool with_surprisal,
                                std::size_t n_reps, std::uint64_t seed);

struct ProportionRow {
  std::string study_id;
  std::string condition;
  TrialType trial_type = TrialType::GOOD_NOREG;
  double observed = 0.0;
  double pred_mean = 0.0;
  double pred_lo = 0.0;  // 2.5% quantile
  double pred_hi = 0.0;  // 97.5% quantile

  bool covered() const { return observed >= pred_lo && observed <= pred_hi; }
};

struct ProportionTable {
  std::vector<ProportionRow> rows;  // by study, condition, then trial type
  /// "study/condition" cells skipped because no trial has a classifiable
  /// outcome (e.g. Maze without a task).
  std::vector<std::string> empty_cells;

  double coverage() const;
  std::string to_csv() const;
};

/// Cells are (study, condition); rows cover the trial types the cell's
/// paradigm and task can produce. Throws std::invalid_argument if
/// `replicates` is empty or a replicate's cells differ from the observed
/// ones.
ProportionTable trial_type_table(const TrialSet& observed, const std::vector<TrialSet>& replicates);

}  // namespace gpmix
