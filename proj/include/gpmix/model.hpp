#pragma once

// Abstract log-density target consumed by the sampler, and a conjugate
// normal toy model with closed-form posterior and leave-one-out quantities.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gpmix/data.hpp"
#include "gpmix/hier.hpp"

namespace gpmix {

class Model {
 public:
  virtual ~Model() = default;

  virtual std::size_t dim() const = 0;
  virtual std::vector<std::string> names() const = 0;

  /// Unnormalized log posterior density on the coordinate scale. When `grad`
  /// is non-empty it is overwritten with the gradient. A rejected point
  /// returns -infinity with an all-zero gradient; NaN is never returned.
  virtual double log_density(std::span<const double> theta, std::span<double> grad) const = 0;

  /// Number of observations (trials) for pointwise log-likelihoods.
  virtual std::size_t n_obs() const = 0;
  virtual void pointwise_loglik(std::span<const double> theta, std::span<double> out) const = 0;

  /// The first `n_dispersed()` coordinates are initialized Uniform(-2, 2);
  /// the rest start at zero.
  virtual std::size_t n_dispersed() const { return dim(); }

  /// Human-readable reason a point is rejected; empty if it is not.
  virtual std::string rejection_reason(std::span<const double> theta) const;
};

/// y_i ~ Normal(theta, sigma^2) with known sigma; theta ~ Normal(m0, s0^2).
class ConjugateNormalModel final : public Model {
 public:
  ConjugateNormalModel(std::vector<double> y, double sigma, double prior_mean, double prior_sd);

  std::size_t dim() const override { return 1; }
  std::vector<std::string> names() const override { return {"theta"}; }
  double log_density(std::span<const double> theta, std::span<double> grad) const override;
  std::size_t n_obs() const override { return y_.size(); }
  void pointwise_loglik(std::span<const double> theta, std::span<double> out) const override;

  double posterior_mean() const;
  double posterior_sd() const;
  /// log p(y_i | y_{-i}) by closed form.
  double exact_loo_point(std::size_t i) const;
  /// log p(y_i | y), the in-sample posterior predictive log-density.
  double posterior_predictive_lpdf(std::size_t i) const;
  /// Posterior expectation of log p(y_i | theta).
  double expected_loglik(std::size_t i) const;

  const std::vector<double>& y() const { return y_; }

 private:
  std::vector<double> y_;
  double sigma_;
  double m0_;
  double s0_;
};

}  // namespace gpmix
