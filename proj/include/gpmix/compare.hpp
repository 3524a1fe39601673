#pragma once

// Model construction by kind, pointwise log-likelihood matrices, Pareto
// smoothed importance sampling leave-one-out estimates and elpd differences.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gpmix/data.hpp"
#include "gpmix/hier.hpp"
#include "gpmix/kernels.hpp"
#include "gpmix/model.hpp"
#include "gpmix/sampler.hpp"

namespace gpmix {

/// Throws DataError when a surprisal-based kind meets trials without
/// surprisal values.
std::unique_ptr<Model> make_model(ModelKind kind, const TrialSet& ts, const PriorConfig& priors = {},
                                  Execution exec = Execution::Parallel);

/// Unnormalized log posterior of `kind` on `ts` at coordinates `theta`.
double log_posterior(std::span<const double> theta, const TrialSet& ts, ModelKind kind,
                     const PriorConfig& priors = {}, std::span<double> grad = {});

/// Dense row-major draws x trials matrix.
struct LogLikMatrix {
  std::size_t n_draws = 0;
  std::size_t n_trials = 0;
  std::vector<double> values;

  LogLikMatrix() = default;
  LogLikMatrix(std::size_t draws, std::size_t trials)
      : n_draws(draws), n_trials(trials), values(draws * trials) {}
  double& operator()(std::size_t s, std::size_t i) { return values[s * n_trials + i]; }
  double operator()(std::size_t s, std::size_t i) const { return values[s * n_trials + i]; }
  std::vector<double> column(std::size_t i) const;
};

/// Row s holds the trial log-likelihoods at retained draw s (chains
/// concatenated). Throws std::invalid_argument on a dimension mismatch.
LogLikMatrix pointwise_loglik(const PosteriorDraws& pd, const Model& model);

class DegenerateSample : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct GpdFit {
  double k = 0.0;
  double sigma = 0.0;
};

/// Generalized Pareto fit to exceedances above a threshold. Profile
/// likelihood over a grid of theta = -k/sigma values (Zhang and Stephens
/// 2009), averaged with posterior-like weights, followed by shrinking k
/// towards 0.5 with the weight of 10 pseudo-observations:
///   k <- (n k + 5) / (n + 10).
/// Positive k means a heavy tail. Needs at least 5 values.
GpdFit gpd_fit(std::span<const double> exceedances);

/// Quantile function of the generalized Pareto distribution.
double gpd_quantile(double p, double k, double sigma);

enum class KFlag { Ok, High, Degenerate };

struct LooResult {
  double elpd_hat = 0.0;
  double se = 0.0;
  std::vector<double> pointwise;  // elpd_i
  std::vector<double> pareto_k;   // NaN when the tail is degenerate
  std::vector<KFlag> k_flag;

  std::size_t n_high_k() const;
  std::size_t n_degenerate() const;
  std::string to_json() const;
};

inline constexpr double kParetoKThreshold = 0.7;

/// Smoothed, truncated and normalized log importance weights for one trial
/// given the draws' log-likelihoods. Returns k through `k_out`.
std::vector<double> psis_log_weights(std::span<const double> loglik, double* k_out = nullptr);

/// Needs at least 100 draws and finite entries.
LooResult psis_loo(const LogLikMatrix& ll);

struct ElpdDiff {
  double diff = 0.0;
  double se = 0.0;
};

/// Sum and standard error of the pointwise differences a - b.
ElpdDiff elpd_diff(const LooResult& a, const LooResult& b);

}  // namespace gpmix
