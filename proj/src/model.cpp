#include "gpmix/model.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace gpmix {

std::string Model::rejection_reason(std::span<const double> theta) const {
  const double lp = log_density(theta, {});
  if (std::isfinite(lp)) return {};
  return "log density is not finite";
}

ConjugateNormalModel::ConjugateNormalModel(std::vector<double> y, double sigma, double prior_mean,
                                           double prior_sd)
    : y_(std::move(y)), sigma_(sigma), m0_(prior_mean), s0_(prior_sd) {
  if (!(sigma_ > 0.0) || !(s0_ > 0.0)) throw std::invalid_argument("scales must be positive");
}

double ConjugateNormalModel::log_density(std::span<const double> theta,
                                         std::span<double> grad) const {
  const double t = theta[0];
  double lp = normal_lpdf(t, m0_, s0_);
  double g = -(t - m0_) / (s0_ * s0_);
  for (double yi : y_) {
    lp += normal_lpdf(yi, t, sigma_);
    g += (yi - t) / (sigma_ * sigma_);
  }
  if (!grad.empty()) grad[0] = g;
  return lp;
}

void ConjugateNormalModel::pointwise_loglik(std::span<const double> theta,
                                            std::span<double> out) const {
  for (std::size_t i = 0; i < y_.size(); ++i) out[i] = normal_lpdf(y_[i], theta[0], sigma_);
}

namespace {

struct NormalPosterior {
  double mean;
  double var;
};

NormalPosterior posterior(double sum, double n, double sigma, double m0, double s0) {
  const double prec = 1.0 / (s0 * s0) + n / (sigma * sigma);
  const double mean = (m0 / (s0 * s0) + sum / (sigma * sigma)) / prec;
  return {mean, 1.0 / prec};
}

}  // namespace

double ConjugateNormalModel::posterior_mean() const {
  const double sum = std::accumulate(y_.begin(), y_.end(), 0.0);
  return posterior(sum, static_cast<double>(y_.size()), sigma_, m0_, s0_).mean;
}

double ConjugateNormalModel::posterior_sd() const {
  const double sum = std::accumulate(y_.begin(), y_.end(), 0.0);
  return std::sqrt(posterior(sum, static_cast<double>(y_.size()), sigma_, m0_, s0_).var);
}

double ConjugateNormalModel::exact_loo_point(std::size_t i) const {
  const double sum = std::accumulate(y_.begin(), y_.end(), 0.0) - y_[i];
  const auto post = posterior(sum, static_cast<double>(y_.size() - 1), sigma_, m0_, s0_);
  return normal_lpdf(y_[i], post.mean, std::sqrt(post.var + sigma_ * sigma_));
}

double ConjugateNormalModel::posterior_predictive_lpdf(std::size_t i) const {
  const double sum = std::accumulate(y_.begin(), y_.end(), 0.0);
  const auto post = posterior(sum, static_cast<double>(y_.size()), sigma_, m0_, s0_);
  return normal_lpdf(y_[i], post.mean, std::sqrt(post.var + sigma_ * sigma_));
}

double ConjugateNormalModel::expected_loglik(std::size_t i) const {
  const double sum = std::accumulate(y_.begin(), y_.end(), 0.0);
  const auto post = posterior(sum, static_cast<double>(y_.size()), sigma_, m0_, s0_);
  const double r = y_[i] - post.mean;
  return -0.5 * (r * r + post.var) / (sigma_ * sigma_) - std::log(sigma_) - detail::kHalfLog2Pi;
}

}  // namespace gpmix
