#pragma once

// Mixture-free competitors: lognormal reading-time regression with
// participant random effects, plus Bernoulli regressions for the rereading
// flag and the end-of-trial response. The surprisal variant adds a
// surprisal slope to every measure, with a participant-varying slope for
// reading times.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "gpmix/data.hpp"
#include "gpmix/hier.hpp"
#include "gpmix/model.hpp"

namespace gpmix {

struct RegressionParams {
  double rt_intercept = 0.0;
  double len_slope = 0.0;
  double surp_slope = 0.0;
  double rt_sigma = 1.0;
  std::array<double, 2> regression_intercept{};  // ET, BSPR
  double regression_surp_slope = 0.0;
  std::array<double, 2> outcome_intercept{};     // JUDGMENT, QUESTION
  double outcome_surp_slope = 0.0;
  double participant_intercept = 0.0;
  double participant_surp_slope = 0.0;
};

/// Log-probability of a trial: lognormal densities of both reading times and
/// Bernoulli log-masses of the observed regression flag and response. With
/// `use_surprisal` false every surprisal term is dropped. Throws DataError
/// if surprisal is required but missing.
double regression_loglik(const Trial& trial, const RegressionParams& rp, bool use_surprisal);

namespace reg {

enum Coord : int {
  kRtIntercept,
  kLenSlope,
  kLogRtSigma,
  kRegInterceptEt,
  kRegInterceptBspr,
  kOutInterceptJudgment,
  kOutInterceptQuestion,
  kLogTauIntercept,
  kNumBaseline,
  // surprisal model only
  kSurpSlope = kNumBaseline,
  kRegSurpSlope,
  kOutSurpSlope,
  kLogTauSlope,
  kCpc,
  kNumSurprisal
};

}  // namespace reg

class RegressionModel final : public Model {
 public:
  RegressionModel(TrialSet ts, bool use_surprisal, PriorConfig priors = {});

  std::size_t dim() const override;
  std::vector<std::string> names() const override;
  double log_density(std::span<const double> theta, std::span<double> grad) const override;
  std::size_t n_obs() const override { return ts_.size(); }
  void pointwise_loglik(std::span<const double> theta, std::span<double> out) const override;
  std::size_t n_dispersed() const override { return n_fixed(); }

  bool use_surprisal() const { return use_surprisal_; }
  std::size_t n_fixed() const { return use_surprisal_ ? reg::kNumSurprisal : reg::kNumBaseline; }
  std::size_t effects_per_participant() const { return use_surprisal_ ? 2 : 1; }
  /// Natural-scale parameters for one participant.
  RegressionParams params_for(std::span<const double> theta, std::size_t participant) const;
  double log_prior(std::span<const double> theta, std::span<double> grad) const;

 private:
  TrialSet ts_;
  bool use_surprisal_;
  PriorConfig priors_;
};

}  // namespace gpmix
