#pragma once

// Log-posterior kernels for the hierarchical MPT mixture.
//
// Each trial's likelihood is differentiated with respect to its local
// linear predictors; those partials are then mapped back onto the
// population coordinates and the non-centered random effects.
//
// Two executions are provided. The serial reference differentiates the
// templated trial likelihood with forward-mode dual numbers in a plain
// loop. The parallel kernel uses closed-form partials (path
// responsibilities times branch and component scores), computes them under
// OpenMP into a per-trial buffer and reduces the buffer in trial order, so
// its results do not depend on the thread count.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "gpmix/data.hpp"
#include "gpmix/hier.hpp"
#include "gpmix/model.hpp"

namespace gpmix {

enum class Execution { Serial, Parallel };

struct TrialPartials {
  double loglik = 0.0;
  std::array<double, mpt::kNumLocal> d_eta{};
  DensityStatus status = DensityStatus::Ok;
};

/// Log-likelihood of one trial and its partials with respect to the local
/// linear predictors, by forward-mode differentiation.
TrialPartials trial_partials(const Trial& trial, const LocalEta& eta);
/// Same quantities from closed-form partials.
TrialPartials trial_partials_analytic(const Trial& trial, const LocalEta& eta);

class MptModel final : public Model {
 public:
  MptModel(TrialSet ts, bool with_surprisal, PriorConfig priors = {},
           Execution exec = Execution::Parallel);

  std::size_t dim() const override { return layout_.dim(); }
  std::vector<std::string> names() const override { return layout_.names(); }
  double log_density(std::span<const double> theta, std::span<double> grad) const override;
  std::size_t n_obs() const override { return ts_.size(); }
  void pointwise_loglik(std::span<const double> theta, std::span<double> out) const override;
  std::size_t n_dispersed() const override { return layout_.z_participant(0, 0); }
  std::string rejection_reason(std::span<const double> theta) const override;

  /// Sum of trial log-likelihoods without the prior.
  double log_likelihood(std::span<const double> theta, std::span<double> grad) const;

  const MptLayout& layout() const { return layout_; }
  const TrialSet& trials() const { return ts_; }
  const PriorConfig& priors() const { return priors_; }
  Execution execution() const { return exec_; }
  void set_execution(Execution e) { exec_ = e; }

 private:
  TrialSet ts_;
  MptLayout layout_;
  PriorConfig priors_;
  Execution exec_;
};

}  // namespace gpmix
