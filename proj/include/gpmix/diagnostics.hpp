#pragma once

// Rank-normalized split R-hat and effective sample sizes.

#include <span>
#include <string>
#include <vector>

#include "gpmix/sampler.hpp"

namespace gpmix {

struct ParamDiagnostics {
  std::string name;
  double rhat = 0.0;  // max of raw, rank-normalized and folded split R-hat; NaN if degenerate
  double ess_bulk = 0.0;
  double ess_tail = 0.0;
  bool degenerate = false;  // some chain never moved
};

struct Diagnostics {
  std::vector<ParamDiagnostics> params;
  int n_divergent = 0;
  double max_rhat = 0.0;  // over non-degenerate parameters
  double min_ess_bulk = 0.0;
  std::size_t n_degenerate = 0;

  /// Every R-hat defined and below `threshold`.
  bool converged(double threshold = 1.05) const;
};

/// Linear-interpolation quantile of ascending values (R type 7).
double quantile_sorted(std::span<const double> sorted, double p);
/// Sorts a copy and returns its type-7 quantile.
double quantile(std::vector<double> values, double p);

/// Chains are given as equal-length draw sequences of one parameter.
double split_rhat(const std::vector<std::vector<double>>& chains);
double ess_bulk(const std::vector<std::vector<double>>& chains);
double ess_tail(const std::vector<std::vector<double>>& chains);
/// Effective sample size of the raw sequences (no splitting or ranking).
double ess_basic(const std::vector<std::vector<double>>& chains);

/// Requires at least two chains with 100 retained draws each for R-hat; with
/// fewer, R-hat is reported as NaN.
Diagnostics diagnostics(const PosteriorDraws& pd);

}  // namespace gpmix
