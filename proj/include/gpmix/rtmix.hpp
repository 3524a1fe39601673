#pragma once

// Shifted-lognormal mixture likelihood.
//
// Component locations on the log scale:
//   C1  mu                                   scale sigma1
//   C2  mu + att                             scale sigma2
//   C3  mu + att + gp                        scale sigma2
//   C4  mu + att + gp + reanalysis           scale sigma2
//   C5  mu + att + gp + regression           scale sigma2
// plus len_slope * region length (characters), plus surp_slope * surprisal
// for the hybrid model, plus regression_cost again at the critical region of
// a baseline-regression path.

#include <cmath>
#include <limits>
#include <numbers>

#include "gpmix/data.hpp"
#include "gpmix/tree.hpp"

namespace gpmix {

template <class T>
struct BasicRtParams {
  T mu{};
  T sigma1{};
  T sigma2{};
  T shift{};
  T att_cost{};
  T gp_cost{};
  T reanalysis_cost{};
  T regression_cost{};
  T len_slope{};
  T surp_slope{};
};
using RtParams = BasicRtParams<double>;

struct ComponentSpec {
  Component id = Component::C1;
  bool add_base_regression_cost = false;

  template <class T>
  T cost_offset(const BasicRtParams<T>& rp) const {
    T loc(0.0);
    if (id != Component::C1) loc = loc + rp.att_cost;
    if (id == Component::C3 || id == Component::C4 || id == Component::C5) loc = loc + rp.gp_cost;
    if (id == Component::C4) loc = loc + rp.reanalysis_cost;
    if (id == Component::C5) loc = loc + rp.regression_cost;
    if (add_base_regression_cost) loc = loc + rp.regression_cost;
    return loc;
  }
  template <class T>
  const T& scale(const BasicRtParams<T>& rp) const {
    return id == Component::C1 ? rp.sigma1 : rp.sigma2;
  }
};

inline ComponentSpec spec_of(const RegionComponent& rc) {
  return {rc.comp, rc.plus_regression_cost};
}

enum class DensityStatus { Ok, BelowShift, ImpossibleObservation };

struct LogDensity {
  double value = -std::numeric_limits<double>::infinity();
  DensityStatus status = DensityStatus::Ok;
  bool ok() const { return status == DensityStatus::Ok; }
};

/// Log-density of one region's RT under a single component. rt <= shift is
/// reported as DensityStatus::BelowShift with value -inf.
LogDensity comp_logpdf(double rt, const ComponentSpec& spec, const RtParams& rp, double region_len,
                       double surprisal = 0.0);

/// Log-scale location of a component for a region of the given length.
double comp_location(const ComponentSpec& spec, const RtParams& rp, double region_len,
                     double surprisal = 0.0);

/// shift + exp(location + scale^2 / 2)
double comp_mean(const ComponentSpec& spec, const RtParams& rp, double region_len,
                 double surprisal = 0.0);
/// shift + exp(location)
double comp_median(const ComponentSpec& spec, const RtParams& rp, double region_len,
                   double surprisal = 0.0);

namespace detail {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

template <class T>
inline T lognormal_lpdf(const T& log_x, const T& loc, const T& sigma, const T& log_sigma) {
  const T z = (log_x - loc) / sigma;
  return -log_x - log_sigma - kHalfLog2Pi - 0.5 * (z * z);
}

}  // namespace detail

/// Joint log-likelihood of a trial: reading times at both regions plus the
/// observed end-of-trial category, summed over latent paths. Missing
/// outcome / regression values are marginalized.
template <class T>
T trial_loglik_t(const Trial& trial, const BasicProcessProbs<T>& pp, const BasicRtParams<T>& rp,
                 DensityStatus& status) {
  using std::exp;
  using std::log;
  status = DensityStatus::Ok;
  const T x_c = trial.rt_crit - rp.shift;
  const T x_s = trial.rt_spill - rp.shift;
  if (!(value_of(x_c) > 0.0) || !(value_of(x_s) > 0.0)) {
    status = DensityStatus::BelowShift;
    return T(-std::numeric_limits<double>::infinity());
  }
  const T lx_c = log(x_c);
  const T lx_s = log(x_s);
  T base_c = rp.mu + rp.len_slope * static_cast<double>(trial.len_crit);
  T base_s = rp.mu + rp.len_slope * static_cast<double>(trial.len_spill);
  if (trial.surp_crit) base_c = base_c + rp.surp_slope * *trial.surp_crit;
  if (trial.surp_spill) base_s = base_s + rp.surp_slope * *trial.surp_spill;
  const T log_sigma1 = log(rp.sigma1);
  const T log_sigma2 = log(rp.sigma2);

  struct Entry {
    RegionComponent crit;
    RegionComponent spill;
    T weight;
  };
  std::array<Entry, 16> entries{};
  int n = 0;
  const Observation obs = observation_of(trial);
  for_each_path(pp, trial.paradigm, trial.task, [&](const PathVisit<T>& v) {
    const double f = observation_factor(v.p_good, v.regression_observed, obs);
    if (f == 0.0) return;
    for (int k = 0; k < n; ++k) {
      if (entries[k].crit == v.crit && entries[k].spill == v.spill) {
        entries[k].weight = entries[k].weight + v.prob * f;
        return;
      }
    }
    entries[n++] = Entry{v.crit, v.spill, v.prob * f};
  });

  std::array<T, 16> terms{};
  int m = 0;
  double max_term = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    if (!(value_of(entries[k].weight) > 0.0)) continue;
    const ComponentSpec sc = spec_of(entries[k].crit);
    const ComponentSpec ss = spec_of(entries[k].spill);
    const bool c1 = sc.id == Component::C1;
    const bool s1 = ss.id == Component::C1;
    T t = log(entries[k].weight) +
          detail::lognormal_lpdf(lx_c, base_c + sc.cost_offset(rp), sc.scale(rp),
                                 c1 ? log_sigma1 : log_sigma2) +
          detail::lognormal_lpdf(lx_s, base_s + ss.cost_offset(rp), ss.scale(rp),
                                 s1 ? log_sigma1 : log_sigma2);
    max_term = std::max(max_term, value_of(t));
    terms[m++] = t;
  }
  if (m == 0) {
    status = DensityStatus::ImpossibleObservation;
    return T(-std::numeric_limits<double>::infinity());
  }
  if (!std::isfinite(max_term)) {
    status = DensityStatus::ImpossibleObservation;
    return T(-std::numeric_limits<double>::infinity());
  }
  T sum(0.0);
  for (int k = 0; k < m; ++k) sum = sum + exp(terms[k] - max_term);
  return log(sum) + max_term;
}

LogDensity trial_loglik(const Trial& trial, const ProcessProbs& pp, const RtParams& rp);

}  // namespace gpmix
