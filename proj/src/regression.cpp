#include "gpmix/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gpmix/corr.hpp"

namespace gpmix {

using namespace reg;

namespace {

double log_bernoulli(bool yes, double eta) { return yes ? log_inv_logit(eta) : log_inv_logit(-eta); }

int regression_slot(Paradigm p) { return p == Paradigm::ET ? 0 : 1; }
int outcome_slot(Task t) { return t == Task::JUDGMENT ? 0 : 1; }

}  // namespace

double regression_loglik(const Trial& t, const RegressionParams& rp, bool use_surprisal) {
  if (use_surprisal && !t.has_surprisal()) {
    throw DataError("trial " + t.participant_id + "/" + t.item_id +
                    " lacks surp_crit/surp_spill required by the surprisal model");
  }
  const double sc = use_surprisal ? *t.surp_crit : 0.0;
  const double ss = use_surprisal ? *t.surp_spill : 0.0;
  const double slope = use_surprisal ? rp.surp_slope + rp.participant_surp_slope : 0.0;
  const double base = rp.rt_intercept + rp.participant_intercept;
  const double loc_c = base + rp.len_slope * t.len_crit + slope * sc;
  const double loc_s = base + rp.len_slope * t.len_spill + slope * ss;
  const double ls = std::log(rp.rt_sigma);
  double ll = detail::lognormal_lpdf(std::log(t.rt_crit), loc_c, rp.rt_sigma, ls) +
              detail::lognormal_lpdf(std::log(t.rt_spill), loc_s, rp.rt_sigma, ls);
  if (t.regression != Regression::NA) {
    const double eta = rp.regression_intercept[regression_slot(t.paradigm)] +
                       (use_surprisal ? rp.regression_surp_slope * sc : 0.0);
    ll += log_bernoulli(t.regression == Regression::YES, eta);
  }
  if (t.outcome != Outcome::NA) {
    const double eta = rp.outcome_intercept[outcome_slot(t.task)] +
                       (use_surprisal ? rp.outcome_surp_slope * sc : 0.0);
    ll += log_bernoulli(t.outcome == Outcome::GOOD, eta);
  }
  return ll;
}

RegressionModel::RegressionModel(TrialSet ts, bool use_surprisal, PriorConfig priors)
    : ts_(std::move(ts)), use_surprisal_(use_surprisal), priors_(priors) {
  priors_.validate();
  if (use_surprisal_) {
    for (std::size_t t = 0; t < ts_.size(); ++t) {
      if (!ts_[t].surp_crit) {
        throw DataError("missing column surp_crit for the surprisal model (trial " + std::to_string(t + 1) + ")");
      }
      if (!ts_[t].surp_spill) {
        throw DataError("missing column surp_spill for the surprisal model (trial " + std::to_string(t + 1) + ")");
      }
    }
  }
}

std::size_t RegressionModel::dim() const {
  return n_fixed() + ts_.n_participants() * effects_per_participant();
}

std::vector<std::string> RegressionModel::names() const {
  std::vector<std::string> out = {"rt_intercept",          "len_slope",
                                  "log_rt_sigma",          "logit_regression_et",
                                  "logit_regression_bspr", "logit_good_judgment",
                                  "logit_good_question",   "log_tau_participant.intercept"};
  if (use_surprisal_) {
    for (const char* n : {"surp_slope", "regression_surp_slope", "outcome_surp_slope",
                          "log_tau_participant.surp_slope", "cpc_participant.0"}) {
      out.emplace_back(n);
    }
  }
  for (std::size_t p = 0; p < ts_.n_participants(); ++p) {
    out.push_back("z_participant." + std::to_string(p) + ".intercept");
    if (use_surprisal_) out.push_back("z_participant." + std::to_string(p) + ".surp_slope");
  }
  return out;
}

RegressionParams RegressionModel::params_for(std::span<const double> theta, std::size_t p) const {
  RegressionParams rp;
  rp.rt_intercept = theta[kRtIntercept];
  rp.len_slope = theta[kLenSlope];
  rp.rt_sigma = guarded_exp(theta[kLogRtSigma]);
  rp.regression_intercept = {theta[kRegInterceptEt], theta[kRegInterceptBspr]};
  rp.outcome_intercept = {theta[kOutInterceptJudgment], theta[kOutInterceptQuestion]};
  const std::size_t zb = n_fixed() + p * effects_per_participant();
  const double tau0 = guarded_exp(theta[kLogTauIntercept]);
  rp.participant_intercept = tau0 * theta[zb];
  if (use_surprisal_) {
    rp.surp_slope = theta[kSurpSlope];
    rp.regression_surp_slope = theta[kRegSurpSlope];
    rp.outcome_surp_slope = theta[kOutSurpSlope];
    const double tau1 = guarded_exp(theta[kLogTauSlope]);
    const double l10 = std::tanh(theta[kCpc]);
    const double l11 = std::sqrt(1.0 - l10 * l10);
    rp.participant_surp_slope = tau1 * (l10 * theta[zb] + l11 * theta[zb + 1]);
  }
  return rp;
}

double RegressionModel::log_prior(std::span<const double> theta, std::span<double> grad) const {
  const bool g = !grad.empty();
  const PriorConfig& pr = priors_;
  double lp = 0.0;
  auto normal = [&](std::size_t k, double mean, double sd) {
    lp += normal_lpdf(theta[k], mean, sd);
    if (g) grad[k] -= (theta[k] - mean) / (sd * sd);
  };
  auto scale = [&](std::size_t k) {
    const double t = guarded_exp(theta[k]);
    lp += half_normal_lpdf(t, pr.re_scale_sd) + theta[k];
    if (g) grad[k] += (std::abs(theta[k]) <= kExpClamp ? -t * t / (pr.re_scale_sd * pr.re_scale_sd) : 0.0) + 1.0;
  };
  normal(kRtIntercept, pr.rt_intercept_mean, pr.rt_intercept_sd);
  normal(kLenSlope, 0.0, pr.len_slope_sd);
  normal(kLogRtSigma, pr.log_rt_sigma_mean, pr.log_sigma_sd);
  for (int k : {kRegInterceptEt, kRegInterceptBspr, kOutInterceptJudgment, kOutInterceptQuestion}) {
    normal(k, 0.0, pr.logit_sd);
  }
  scale(kLogTauIntercept);
  if (use_surprisal_) {
    normal(kSurpSlope, 0.0, pr.surp_slope_sd);
    normal(kRegSurpSlope, 0.0, pr.bernoulli_surp_slope_sd);
    normal(kOutSurpSlope, 0.0, pr.bernoulli_surp_slope_sd);
    scale(kLogTauSlope);
    std::array<Dual<1>, 1> y = {Dual<1>::variable(theta[kCpc], 0)};
    const auto chol = cholesky_corr_constrain<2, Dual<1>>(y);
    const Dual<1> l = lkj_corr_cholesky_lpdf<2, Dual<1>>(chol.L, pr.lkj_eta) + chol.log_jacobian;
    lp += l.v;
    if (g) grad[kCpc] += l.d[0];
  }
  for (std::size_t k = n_fixed(); k < dim(); ++k) {
    lp += -0.5 * theta[k] * theta[k] - detail::kHalfLog2Pi;
    if (g) grad[k] -= theta[k];
  }
  return lp;
}

double RegressionModel::log_density(std::span<const double> theta, std::span<double> grad) const {
  const bool want = !grad.empty();
  if (want) std::fill(grad.begin(), grad.end(), 0.0);
  auto reject = [&] {
    if (want) std::fill(grad.begin(), grad.end(), 0.0);
    return -std::numeric_limits<double>::infinity();
  };
  if (!std::all_of(theta.begin(), theta.end(), [](double v) { return std::isfinite(v); })) return reject();

  const double sigma = guarded_exp(theta[kLogRtSigma]);
  const double tau0 = guarded_exp(theta[kLogTauIntercept]);
  const double tau1 = use_surprisal_ ? guarded_exp(theta[kLogTauSlope]) : 0.0;
  const double l10 = use_surprisal_ ? std::tanh(theta[kCpc]) : 0.0;
  const double l11 = std::sqrt(1.0 - l10 * l10);
  const std::size_t kpp = effects_per_participant();

  // d loglik / d (participant intercept, participant slope)
  std::vector<std::array<double, 2>> du(ts_.n_participants(), {0.0, 0.0});
  double ll = 0.0;
  double d_sigma = 0.0;
  for (std::size_t t = 0; t < ts_.size(); ++t) {
    const Trial& tr = ts_[t];
    const std::size_t p = ts_.participant_index(t);
    const RegressionParams rp = params_for(theta, p);
    ll += regression_loglik(tr, rp, use_surprisal_);
    if (!want) continue;
    const double slope = rp.surp_slope + rp.participant_surp_slope;
    const double base = rp.rt_intercept + rp.participant_intercept;
    for (bool crit : {true, false}) {
      const double len = crit ? tr.len_crit : tr.len_spill;
      const double s = use_surprisal_ ? (crit ? *tr.surp_crit : *tr.surp_spill) : 0.0;
      const double z = (std::log(crit ? tr.rt_crit : tr.rt_spill) - base - rp.len_slope * len - slope * s) / sigma;
      const double dloc = z / sigma;
      grad[kRtIntercept] += dloc;
      grad[kLenSlope] += dloc * len;
      du[p][0] += dloc;
      if (use_surprisal_) {
        grad[kSurpSlope] += dloc * s;
        du[p][1] += dloc * s;
      }
      d_sigma += (z * z - 1.0) / sigma;
    }
    const double sc = use_surprisal_ ? *tr.surp_crit : 0.0;
    if (tr.regression != Regression::NA) {
      const int slot = regression_slot(tr.paradigm);
      const double eta = rp.regression_intercept[slot] + rp.regression_surp_slope * sc;
      const double r = (tr.regression == Regression::YES ? 1.0 : 0.0) - inv_logit(eta);
      grad[slot == 0 ? kRegInterceptEt : kRegInterceptBspr] += r;
      if (use_surprisal_) grad[kRegSurpSlope] += r * sc;
    }
    if (tr.outcome != Outcome::NA) {
      const int slot = outcome_slot(tr.task);
      const double eta = rp.outcome_intercept[slot] + rp.outcome_surp_slope * sc;
      const double r = (tr.outcome == Outcome::GOOD ? 1.0 : 0.0) - inv_logit(eta);
      grad[slot == 0 ? kOutInterceptJudgment : kOutInterceptQuestion] += r;
      if (use_surprisal_) grad[kOutSurpSlope] += r * sc;
    }
  }
  if (!std::isfinite(ll)) return reject();
  if (want) {
    if (std::abs(theta[kLogRtSigma]) <= kExpClamp) grad[kLogRtSigma] += d_sigma * sigma;
    const bool c0 = std::abs(theta[kLogTauIntercept]) <= kExpClamp;
    const bool c1 = use_surprisal_ && std::abs(theta[kLogTauSlope]) <= kExpClamp;
    const double dl10 = 1.0 - l10 * l10;
    const double dl11 = -l10 * dl10 / l11;
    for (std::size_t p = 0; p < ts_.n_participants(); ++p) {
      const std::size_t zb = n_fixed() + p * kpp;
      const double z0 = theta[zb];
      grad[zb] += du[p][0] * tau0;
      if (c0) grad[kLogTauIntercept] += du[p][0] * tau0 * z0;
      if (use_surprisal_) {
        const double z1 = theta[zb + 1];
        grad[zb] += du[p][1] * tau1 * l10;
        grad[zb + 1] += du[p][1] * tau1 * l11;
        if (c1) grad[kLogTauSlope] += du[p][1] * tau1 * (l10 * z0 + l11 * z1);
        grad[kCpc] += du[p][1] * tau1 * (dl10 * z0 + dl11 * z1);
      }
    }
  }
  const double lp = log_prior(theta, grad);
  if (!std::isfinite(lp)) return reject();
  return ll + lp;
}

void RegressionModel::pointwise_loglik(std::span<const double> theta, std::span<double> out) const {
  if (out.size() != ts_.size()) throw std::invalid_argument("output span has wrong length");
  const auto n = static_cast<std::ptrdiff_t>(ts_.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    out[ut] = regression_loglik(ts_[ut], params_for(theta, ts_.participant_index(ut)), use_surprisal_);
  }
}

}  // namespace gpmix
