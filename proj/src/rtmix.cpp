#include "gpmix/rtmix.hpp"

namespace gpmix {

double comp_location(const ComponentSpec& spec, const RtParams& rp, double region_len,
                     double surprisal) {
  return rp.mu + rp.len_slope * region_len + rp.surp_slope * surprisal + spec.cost_offset(rp);
}

LogDensity comp_logpdf(double rt, const ComponentSpec& spec, const RtParams& rp, double region_len,
                       double surprisal) {
  const double x = rt - rp.shift;
  if (!(x > 0.0)) return {-std::numeric_limits<double>::infinity(), DensityStatus::BelowShift};
  const double sigma = spec.scale(rp);
  const double lx = std::log(x);
  return {detail::lognormal_lpdf(lx, comp_location(spec, rp, region_len, surprisal), sigma,
                                 std::log(sigma)),
          DensityStatus::Ok};
}

double comp_mean(const ComponentSpec& spec, const RtParams& rp, double region_len,
                 double surprisal) {
  const double s = spec.scale(rp);
  return rp.shift + std::exp(comp_location(spec, rp, region_len, surprisal) + 0.5 * s * s);
}

double comp_median(const ComponentSpec& spec, const RtParams& rp, double region_len,
                   double surprisal) {
  return rp.shift + std::exp(comp_location(spec, rp, region_len, surprisal));
}

LogDensity trial_loglik(const Trial& trial, const ProcessProbs& pp, const RtParams& rp) {
  DensityStatus status = DensityStatus::Ok;
  const double v = trial_loglik_t(trial, pp, rp, status);
  return {v, status};
}

}  // namespace gpmix
