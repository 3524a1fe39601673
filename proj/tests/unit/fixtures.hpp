#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "gpmix/hier.hpp"
#include "gpmix/rtmix.hpp"
#include "gpmix/tree.hpp"
#include "gpmix/simulate.hpp"

namespace gpmix::testing {

/// Four two-participant blocks (ET, SPR, BSPR, Maze) with a few items each.
inline DesignSpec small_design(std::uint64_t seed, std::size_t items_per_block = 3,
                               std::size_t participants_per_block = 2) {
  DesignSpec ds;
  ds.seed = seed;
  ds.blocks = {
      {"et", Paradigm::ET, Task::QUESTION, participants_per_block, items_per_block, 0.0},
      {"spr", Paradigm::SPR, Task::JUDGMENT, participants_per_block, items_per_block, 0.5},
      {"bspr", Paradigm::BSPR, Task::JUDGMENT, participants_per_block, items_per_block, 0.67},
      {"maze", Paradigm::MAZE, Task::NONE, participants_per_block, items_per_block, 0.0},
  };
  return ds;
}

inline PopulationParams truth_with_surprisal(double slope) {
  PopulationParams pp = reference_parameters();
  pp.pop.push_back(slope);
  return pp;
}

/// Truth coordinates jittered by Normal(0, sd).
inline std::vector<double> jitter(const std::vector<double>& base, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  std::vector<double> out = base;
  for (double& v : out) v += n(rng);
  return out;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}


/// Composite Simpson weights for n (even) intervals of width h.
inline std::vector<double> simpson_weights(int n, double h) {
  std::vector<double> w(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) w[static_cast<std::size_t>(k)] = (k == 0 || k == n ? 1.0 : (k % 2 ? 4.0 : 2.0)) * h / 3.0;
  return w;
}

/// Total probability mass of a trial cell: the joint reading-time density
/// summed over the observable categories, integrated over
/// [shift, shift + 20000] ms in both regions. The integral runs over
/// log(rt - shift) with a Simpson rule on n intervals per axis.
inline double joint_mass(Trial frame, const ProcessProbs& pp, const RtParams& rp, int n = 400) {
  const double loc = rp.mu + rp.len_slope * std::max(frame.len_crit, frame.len_spill);
  const double top = rp.att_cost + rp.gp_cost + rp.reanalysis_cost + 2.0 * rp.regression_cost;
  const double lo = loc - std::abs(rp.len_slope) * 20.0 - 9.0 * rp.sigma2;
  const double hi = std::min(std::log(20000.0), loc + top + 9.0 * rp.sigma2);
  const double h = (hi - lo) / n;
  const auto w = simpson_weights(n, h);
  std::vector<double> x(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) x[static_cast<std::size_t>(k)] = std::exp(lo + h * k);
  double total = 0.0;
  for (const Observation& o : observable_categories(frame.paradigm, frame.task)) {
    frame.outcome = o.outcome;
    frame.regression = o.regression;
    for (std::size_t a = 0; a < x.size(); ++a) {
      frame.rt_crit = rp.shift + x[a];
      double row = 0.0;
      for (std::size_t b = 0; b < x.size(); ++b) {
        frame.rt_spill = rp.shift + x[b];
        const LogDensity ld = trial_loglik(frame, pp, rp);
        if (ld.ok()) row += w[b] * std::exp(ld.value) * x[b];
      }
      total += w[a] * row * x[a];
    }
  }
  return total;
}

}  // namespace gpmix::testing
