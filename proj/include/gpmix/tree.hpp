#pragma once

// Multinomial processing tree over the latent reading processes.
//
// Branch order, from the root:
//   base regression -> attention -> garden-pathing -> overt reanalysis ->
//   postponement (covert only) -> reanalysis success -> pragmatic inference
//
// Branches that cannot occur for a paradigm/task are absent from the tree
// (no regressions in SPR/Maze, no inference outside question tasks) and any
// branch whose probability is exactly zero is pruned.
//
// Reading-time component per region:
//   inattentive                      (C1, C1)
//   attentive, no garden path        (C2, C2)
//   garden path, covert, in situ     (C4, C2)
//   garden path, covert, postponed   (C3, C4)
//   garden path, overt regression    (C5, C2)
// A baseline regression adds regression_cost at the critical region.

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gpmix/data.hpp"
#include "gpmix/dual.hpp"

namespace gpmix {

template <class T>
struct BasicProcessProbs {
  T p_attentive{};
  T p_gp{};
  T p_overt{};
  T p_postpone{};
  T p_success_o{};
  T p_success_c{};
  T p_infer{};
  T p_base_regress{};
};
using ProcessProbs = BasicProcessProbs<double>;

/// Throws std::invalid_argument when a probability is outside [0, 1] or the
/// paradigm forbids a non-zero regression probability.
void validate_process_probs(const ProcessProbs& pp, Paradigm paradigm);

enum class Component { C1 = 1, C2, C3, C4, C5 };

struct RegionComponent {
  Component comp = Component::C1;
  bool plus_regression_cost = false;  // baseline regression add-on
  friend bool operator==(const RegionComponent&, const RegionComponent&) = default;
};

/// Which way each branch went; nullopt for branches not on the path.
struct Branches {
  std::optional<bool> base_regress;
  std::optional<bool> attentive;
  std::optional<bool> gp;
  std::optional<bool> overt;
  std::optional<bool> postpone;
  std::optional<bool> success;
  std::optional<bool> infer;
  friend bool operator==(const Branches&, const Branches&) = default;
};

template <class T>
struct PathVisit {
  Branches branches;
  T prob;
  RegionComponent crit;
  RegionComponent spill;
  double p_good = 0.0;  // P(GOOD | path); 0.5 when guessing
  bool regression_observed = false;
};

struct Observation {
  Outcome outcome = Outcome::NA;
  Regression regression = Regression::NA;
  friend bool operator==(const Observation&, const Observation&) = default;
};

inline Observation observation_of(const Trial& t) { return {t.outcome, t.regression}; }

/// P(observation | path) with missing components marginalized.
inline double observation_factor(double p_good, bool regression_observed, const Observation& o) {
  double f = 1.0;
  if (o.outcome == Outcome::GOOD) f = p_good;
  if (o.outcome == Outcome::BAD) f = 1.0 - p_good;
  if (o.regression == Regression::YES && !regression_observed) return 0.0;
  if (o.regression == Regression::NO && regression_observed) return 0.0;
  return f;
}

/// Calls `visit(const PathVisit<T>&)` once per root-to-leaf path.
template <class T, class Visitor>
void for_each_path(const BasicProcessProbs<T>& pp, Paradigm paradigm, Task task, Visitor&& visit) {
  const bool reg_possible = regressions_possible(paradigm);
  const bool use_infer = task == Task::QUESTION;
  const T one(1.0);

  auto nonzero = [](const T& p) { return value_of(p) != 0.0; };

  // Success / inference sub-branches below a reanalysis attempt.
  auto reanalysis_leaves = [&](PathVisit<T> v, const T& p_success) {
    const T prefix = v.prob;
    v.branches.success = true;
    const T ps = prefix * p_success;
    if (nonzero(ps)) {
      if (use_infer) {
        PathVisit<T> w = v;
        w.branches.infer = true;
        w.prob = ps * pp.p_infer;
        w.p_good = 0.0;
        if (nonzero(w.prob)) visit(w);
        w.branches.infer = false;
        w.prob = ps * (one - pp.p_infer);
        w.p_good = 1.0;
        if (nonzero(w.prob)) visit(w);
      } else {
        v.prob = ps;
        v.p_good = 1.0;
        visit(v);
      }
    }
    v.branches.success = false;
    v.branches.infer.reset();
    v.prob = prefix * (one - p_success);
    v.p_good = 0.0;
    if (nonzero(v.prob)) visit(v);
  };

  for (int b = 0; b < 2; ++b) {
    const bool base = b == 1;
    if (base && !reg_possible) continue;
    PathVisit<T> root{};
    T pb = one;
    if (reg_possible) {
      root.branches.base_regress = base;
      pb = base ? pp.p_base_regress : one - pp.p_base_regress;
      if (!nonzero(pb)) continue;
    }

    // Inattentive reading, guessed response.
    {
      PathVisit<T> v = root;
      v.branches.attentive = false;
      v.prob = pb * (one - pp.p_attentive);
      v.crit = {Component::C1, base};
      v.spill = {Component::C1, false};
      v.p_good = 0.5;
      v.regression_observed = base;
      if (nonzero(v.prob)) visit(v);
    }

    const T pa = pb * pp.p_attentive;
    if (!nonzero(pa)) continue;
    PathVisit<T> att = root;
    att.branches.attentive = true;
    att.regression_observed = base;

    // Attentive, correct initial analysis.
    {
      PathVisit<T> v = att;
      v.branches.gp = false;
      v.crit = {Component::C2, base};
      v.spill = {Component::C2, false};
      const T p0 = pa * (one - pp.p_gp);
      if (nonzero(p0)) {
        if (use_infer) {
          v.branches.infer = true;
          v.prob = p0 * pp.p_infer;
          v.p_good = 0.0;
          if (nonzero(v.prob)) visit(v);
          v.branches.infer = false;
          v.prob = p0 * (one - pp.p_infer);
          v.p_good = 1.0;
          if (nonzero(v.prob)) visit(v);
        } else {
          v.prob = p0;
          v.p_good = 1.0;
          visit(v);
        }
      }
    }

    const T pg = pa * pp.p_gp;
    if (!nonzero(pg)) continue;
    PathVisit<T> gp = att;
    gp.branches.gp = true;

    T p_covert = pg;
    if (reg_possible) {
      PathVisit<T> v = gp;
      v.branches.overt = true;
      v.prob = pg * pp.p_overt;
      v.crit = {Component::C5, base};
      v.spill = {Component::C2, false};
      v.regression_observed = true;
      if (nonzero(v.prob)) reanalysis_leaves(v, pp.p_success_o);
      gp.branches.overt = false;
      p_covert = pg * (one - pp.p_overt);
    }
    if (!nonzero(p_covert)) continue;

    {
      PathVisit<T> v = gp;
      v.branches.postpone = false;
      v.prob = p_covert * (one - pp.p_postpone);
      v.crit = {Component::C4, base};
      v.spill = {Component::C2, false};
      if (nonzero(v.prob)) reanalysis_leaves(v, pp.p_success_c);
    }
    {
      PathVisit<T> v = gp;
      v.branches.postpone = true;
      v.prob = p_covert * pp.p_postpone;
      v.crit = {Component::C3, base};
      v.spill = {Component::C4, false};
      if (nonzero(v.prob)) reanalysis_leaves(v, pp.p_success_c);
    }
  }
}

struct LatentPath {
  Branches branches;
  double prob = 0.0;
  RegionComponent crit;
  RegionComponent spill;
  std::array<double, 2> outcome_dist{0.5, 0.5};  // P(GOOD), P(BAD)
  bool regression_observed = false;
  std::string expression;  // product of branch probabilities, by name
};

/// Exhaustive, mutually exclusive list of latent paths.
std::vector<LatentPath> enumerate_paths(const ProcessProbs& pp, Paradigm paradigm, Task task);

/// Probability distribution over the observable categories of a cell.
/// ET/BSPR with a task: 4 categories; SPR with a task: 2; without a task the
/// outcome dimension is absent (Maze: a single degenerate category).
struct OutcomeDist {
  std::vector<std::pair<Observation, double>> categories;
  /// Probability of `o`, or 0 when it is not a category of this cell.
  double prob(const Observation& o) const;
};

std::vector<Observation> observable_categories(Paradigm paradigm, Task task);

OutcomeDist event_probabilities(const ProcessProbs& pp, Paradigm paradigm, Task task);

/// P(incorrect "yes", no regression) for the question task, written out term
/// by term as a closed-form sum over the four generating path families.
double p_yes_no_regress(const ProcessProbs& pp);

/// Posterior responsibilities over the paths consistent with an observation
/// (reading times ignored). Throws std::domain_error for a zero-probability
/// observation.
std::vector<std::pair<LatentPath, double>> path_posterior(const ProcessProbs& pp,
                                                          Paradigm paradigm, Task task,
                                                          const Observation& observed);

}  // namespace gpmix
