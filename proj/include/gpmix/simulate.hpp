#pragma once

// Generative simulation of complete synthetic datasets.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gpmix/data.hpp"
#include "gpmix/hier.hpp"
#include "gpmix/rtmix.hpp"
#include "gpmix/tree.hpp"

namespace gpmix {

using Rng = std::mt19937_64;

/// Deterministic stream seed for a (seed, a, b, c) counter tuple.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

struct StudyBlock {
  std::string study_id;
  Paradigm paradigm = Paradigm::SPR;
  Task task = Task::NONE;
  std::size_t n_participants = 1;
  std::size_t n_items = 1;
  double mvrr_fraction = 0.0;     // share of items that are MV/RR
  double animacy_fraction = 0.5;  // share of MV/RR items disambiguated by animacy
  int len_crit_min = 6;
  int len_crit_max = 12;
  int len_spill_min = 4;
  int len_spill_max = 10;
};

struct DesignSpec {
  std::vector<StudyBlock> blocks;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument if a block has no participants or items,
  /// fewer than two participants (ambiguity must be balanced within item),
  /// an empty length range or a fraction outside [0, 1].
  void validate() const;
  std::size_t n_participants() const;
  std::size_t n_items() const;
};

/// 50 participants by 24 items in four paradigm blocks: ET with questions,
/// SPR with questions, BSPR with judgments and Maze without a task.
DesignSpec recovery_design(std::uint64_t seed);

/// Population-level parameters from which random effects are drawn.
struct PopulationParams {
  std::vector<double> pop;  // kNumPop - 1 entries, or kNumPop with a surprisal slope
  std::array<double, mpt::kNumParticipantEffects> log_tau_participant{};
  std::array<double, mpt::kNumItemEffects> log_tau_item{};
  std::array<double, mpt::kNumParticipantCpc> cpc_participant{};
  std::array<double, mpt::kNumItemCpc> cpc_item{};

  bool with_surprisal() const { return pop.size() == mpt::kNumPop; }
};

/// Reference ground truth for recovery studies. Costs are given as
/// millisecond differences and converted to the log-location scale.
PopulationParams reference_parameters();

/// Reference region length (characters) for millisecond conversions.
inline constexpr double kReferenceLength = 8.0;

struct PathRecord {
  Branches branches;
  RegionComponent crit;
  RegionComponent spill;
};

struct SimulatedTrial {
  Trial trial;
  PathRecord path;
};

/// Samples a latent path by sequential branch draws, then reading times and
/// the end-of-trial response. Only the design fields of `frame` are read.
SimulatedTrial simulate_trial(const ProcessProbs& pp, const RtParams& rp, const Trial& frame,
                              Rng& rng);
/// Same, with the trial's parameters assembled from `cp`.
SimulatedTrial simulate_trial(const ConstrainedParams& cp, const Trial& frame,
                              std::size_t participant, std::size_t item, Rng& rng);

struct TallyCell {
  std::string study_id;
  std::string condition;
  std::size_t n_trials = 0;
  std::size_t n_classified = 0;
  std::array<std::size_t, 4> type_counts{};
};

struct GroundTruth {
  std::uint64_t seed = 0;
  bool with_surprisal = false;
  std::vector<std::string> names;
  std::vector<double> coordinates;  // full coordinate vector, dataset order
  std::size_t n_top_level = 0;
  std::vector<PathRecord> paths;    // one per retained trial
  std::vector<TallyCell> tallies;   // sorted by (study, condition)
  std::size_t n_excluded = 0;

  std::string to_json() const;
  static GroundTruth from_json(const std::string& text);
};

struct SimulationResult {
  TrialSet trials;
  SurprisalTable surprisal;
  GroundTruth truth;
};

/// Draws random effects, then every trial of the design. Trials outside the
/// reading-time window are dropped, as in preprocessing. Deterministic in
/// ds.seed and independent of scheduling.
SimulationResult simulate_dataset(const PopulationParams& params, const DesignSpec& ds);

/// Replicates a dataset on the design frame of `frames` using the parameter
/// point `cp` (random effects included). No trials are dropped.
TrialSet simulate_on_frame(const ConstrainedParams& cp, const TrialSet& frames, std::uint64_t seed);

}  // namespace gpmix
