#include "gpmix/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gpmix/corr.hpp"
#include "gpmix/csv.hpp"
#include "gpmix/dual.hpp"
#include "gpmix/rtmix.hpp"

namespace gpmix {

using namespace mpt;

TrialPartials trial_partials(const Trial& trial, const LocalEta& eta) {
  using D = Dual<kNumLocal>;
  std::array<D, kNumLocal> x;
  for (int k = 0; k < kNumLocal; ++k) x[k] = D::variable(eta[k], k);
  const auto pp = process_probs_from_eta(x, trial.paradigm, trial.task);
  const auto rp = rt_params_from_eta(x);
  TrialPartials out;
  const D ll = trial_loglik_t(trial, pp, rp, out.status);
  out.loglik = ll.v;
  if (out.status == DensityStatus::Ok && !std::isfinite(ll.v)) {
    out.status = DensityStatus::ImpossibleObservation;
  }
  if (out.status == DensityStatus::Ok) out.d_eta = ll.d;
  return out;
}

namespace {

// Scores of one region's log-density with respect to its location, scale
// and the shift.
struct RegionScore {
  double d_loc;
  double d_scale;
  double d_shift;
  double log_density;
};

RegionScore region_score(double log_x, double x, double loc, double scale) {
  const double z = (log_x - loc) / scale;
  return {z / scale, (z * z - 1.0) / scale, (1.0 + z / scale) / x,
          detail::lognormal_lpdf(log_x, loc, scale, std::log(scale))};
}

double branch_score(const std::optional<bool>& taken, double p) {
  return *taken ? 1.0 - p : -p;
}

}  // namespace

TrialPartials trial_partials_analytic(const Trial& trial, const LocalEta& eta) {
  TrialPartials out;
  const ProcessProbs pp = process_probs_from_eta(eta, trial.paradigm, trial.task);
  const RtParams rp = rt_params_from_eta(eta);
  const double x_c = trial.rt_crit - rp.shift;
  const double x_s = trial.rt_spill - rp.shift;
  if (!(x_c > 0.0) || !(x_s > 0.0)) {
    out.status = DensityStatus::BelowShift;
    out.loglik = -std::numeric_limits<double>::infinity();
    return out;
  }
  const double lx_c = std::log(x_c);
  const double lx_s = std::log(x_s);
  const double surp_c = trial.surp_crit.value_or(0.0);
  const double surp_s = trial.surp_spill.value_or(0.0);
  const double base_c = rp.mu + rp.len_slope * trial.len_crit + rp.surp_slope * surp_c;
  const double base_s = rp.mu + rp.len_slope * trial.len_spill + rp.surp_slope * surp_s;

  struct Term {
    Branches branches;
    RegionComponent crit;
    RegionComponent spill;
    double log_weight;
  };
  std::array<Term, 64> terms;
  int n = 0;
  const Observation obs = observation_of(trial);
  for_each_path(pp, trial.paradigm, trial.task, [&](const PathVisit<double>& v) {
    const double f = observation_factor(v.p_good, v.regression_observed, obs);
    const double w = v.prob * f;
    if (!(w > 0.0)) return;
    terms[n++] = Term{v.branches, v.crit, v.spill, std::log(w)};
  });

  // Region log-densities per component signature; at most five distinct
  // components plus the regression add-on per region.
  struct Cached {
    RegionComponent rc;
    RegionScore score;
  };
  std::array<Cached, 12> cache_c, cache_s;
  int nc = 0, ns = 0;
  auto score_of = [&](const RegionComponent& rc, bool crit) -> const RegionScore& {
    auto& cache = crit ? cache_c : cache_s;
    int& count = crit ? nc : ns;
    for (int k = 0; k < count; ++k) {
      if (cache[k].rc == rc) return cache[k].score;
    }
    const ComponentSpec spec = spec_of(rc);
    const double loc = (crit ? base_c : base_s) + spec.cost_offset(rp);
    cache[count] = {rc, region_score(crit ? lx_c : lx_s, crit ? x_c : x_s, loc, spec.scale(rp))};
    return cache[count++].score;
  };

  std::array<double, 64> log_terms;
  double max_term = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    log_terms[k] = terms[k].log_weight + score_of(terms[k].crit, true).log_density +
                   score_of(terms[k].spill, false).log_density;
    max_term = std::max(max_term, log_terms[k]);
  }
  if (n == 0 || !std::isfinite(max_term)) {
    out.status = DensityStatus::ImpossibleObservation;
    out.loglik = -std::numeric_limits<double>::infinity();
    return out;
  }
  double sum = 0.0;
  for (int k = 0; k < n; ++k) sum += std::exp(log_terms[k] - max_term);
  out.loglik = max_term + std::log(sum);

  auto& g = out.d_eta;
  double g_shift = 0.0, g_sigma1 = 0.0, g_sigma2 = 0.0;
  double g_att = 0.0, g_gp = 0.0, g_rean = 0.0, g_reg = 0.0;
  for (int k = 0; k < n; ++k) {
    const double r = std::exp(log_terms[k] - out.loglik);
    const Branches& b = terms[k].branches;
    if (b.base_regress) g[kEtaBaseRegress] += r * branch_score(b.base_regress, pp.p_base_regress);
    if (b.attentive) g[kEtaAttentive] += r * branch_score(b.attentive, pp.p_attentive);
    if (b.gp) g[kEtaGp] += r * branch_score(b.gp, pp.p_gp);
    if (b.overt) g[kEtaOvert] += r * branch_score(b.overt, pp.p_overt);
    if (b.postpone) g[kEtaPostpone] += r * branch_score(b.postpone, pp.p_postpone);
    if (b.success) {
      if (b.overt.value_or(false)) {
        g[kEtaSuccessO] += r * branch_score(b.success, pp.p_success_o);
      } else {
        g[kEtaSuccessC] += r * branch_score(b.success, pp.p_success_c);
      }
    }
    if (b.infer) g[kEtaInfer] += r * branch_score(b.infer, pp.p_infer);

    for (bool crit : {true, false}) {
      const RegionComponent& rc = crit ? terms[k].crit : terms[k].spill;
      const RegionScore& sc = score_of(rc, crit);
      const double dl = r * sc.d_loc;
      g[kEtaMu] += dl;
      g[kEtaLenSlope] += dl * (crit ? trial.len_crit : trial.len_spill);
      g[kEtaSurpSlope] += dl * (crit ? surp_c : surp_s);
      if (rc.comp != Component::C1) g_att += dl;
      if (rc.comp == Component::C3 || rc.comp == Component::C4 || rc.comp == Component::C5) g_gp += dl;
      if (rc.comp == Component::C4) g_rean += dl;
      if (rc.comp == Component::C5) g_reg += dl;
      if (rc.plus_regression_cost) g_reg += dl;
      (rc.comp == Component::C1 ? g_sigma1 : g_sigma2) += r * sc.d_scale;
      g_shift += r * sc.d_shift;
    }
  }
  // d exp(eta) / d eta, zero where the coordinate was clamped
  auto dexp = [](double e) { return std::abs(e) <= kExpClamp ? std::exp(e) : 0.0; };
  g[kEtaLogAtt] = g_att * dexp(eta[kEtaLogAtt]);
  g[kEtaLogGp] = g_gp * dexp(eta[kEtaLogGp]);
  g[kEtaLogReanalysis] = g_rean * dexp(eta[kEtaLogReanalysis]);
  g[kEtaLogRegression] = g_reg * dexp(eta[kEtaLogRegression]);
  g[kEtaLogShift] = g_shift * dexp(eta[kEtaLogShift]);
  g[kEtaLogSigma1] = (g_sigma1 + g_sigma2) * dexp(eta[kEtaLogSigma1]);
  g[kEtaLogSigmaDiff] = g_sigma2 * dexp(eta[kEtaLogSigmaDiff]);
  // Probabilities fixed at zero by design carry no gradient.
  if (!regressions_possible(trial.paradigm)) {
    g[kEtaOvert] = 0.0;
    g[kEtaBaseRegress] = 0.0;
  }
  if (trial.task != Task::QUESTION) g[kEtaInfer] = 0.0;
  return out;
}

namespace {

constexpr int KP = kNumParticipantEffects;
constexpr int KI = kNumItemEffects;

// Parameter-dependent quantities shared by every trial.
struct Frame {
  std::span<const double> pop;
  std::array<double, KP> tau_p{};
  std::array<double, KI> tau_i{};
  std::array<bool, KP> tau_p_clamped{};
  std::array<bool, KI> tau_i_clamped{};
  std::array<double, KP * KP> L_p{};
  std::array<double, KI * KI> L_i{};
  std::vector<std::array<double, KP>> u;
  std::vector<std::array<double, KI>> v;
};

Frame make_frame(const MptLayout& layout, std::span<const double> theta) {
  Frame f;
  f.pop = theta.subspan(0, layout.n_pop());
  for (int e = 0; e < KP; ++e) {
    const double x = theta[layout.log_tau_participant(e)];
    f.tau_p[e] = guarded_exp(x);
    f.tau_p_clamped[e] = std::abs(x) > kExpClamp;
  }
  for (int e = 0; e < KI; ++e) {
    const double x = theta[layout.log_tau_item(e)];
    f.tau_i[e] = guarded_exp(x);
    f.tau_i_clamped[e] = std::abs(x) > kExpClamp;
  }
  std::array<double, kNumParticipantCpc> yp{};
  for (int k = 0; k < kNumParticipantCpc; ++k) yp[k] = theta[layout.cpc_participant(k)];
  std::array<double, kNumItemCpc> yi{};
  for (int k = 0; k < kNumItemCpc; ++k) yi[k] = theta[layout.cpc_item(k)];
  f.L_p = cholesky_corr_constrain<KP, double>(yp).L;
  f.L_i = cholesky_corr_constrain<KI, double>(yi).L;

  f.u.resize(layout.n_participants());
  for (std::size_t p = 0; p < layout.n_participants(); ++p) {
    for (int e = 0; e < KP; ++e) {
      double s = 0.0;
      for (int j = 0; j <= e; ++j) s += f.L_p[e * KP + j] * theta[layout.z_participant(p, j)];
      f.u[p][e] = f.tau_p[e] * s;
    }
  }
  f.v.resize(layout.n_items());
  for (std::size_t i = 0; i < layout.n_items(); ++i) {
    for (int e = 0; e < KI; ++e) {
      double s = 0.0;
      for (int j = 0; j <= e; ++j) s += f.L_i[e * KI + j] * theta[layout.z_item(i, j)];
      f.v[i][e] = f.tau_i[e] * s;
    }
  }
  return f;
}

// Gradient accumulators: population coordinates directly, random effects
// through their per-group partials d loglik / d u.
struct Accum {
  double loglik = 0.0;
  std::vector<double> pop;
  std::vector<std::array<double, KP>> du;
  std::vector<std::array<double, KI>> dv;

  explicit Accum(const MptLayout& layout)
      : pop(layout.n_pop(), 0.0), du(layout.n_participants()), dv(layout.n_items()) {}
};

void accumulate(const Trial& t, std::size_t p, std::size_t i, const TrialPartials& tp,
                const Frame& f, bool with_surprisal, Accum& a) {
  const auto& g = tp.d_eta;
  const bool amb = t.ambiguity == Ambiguity::AMBIGUOUS;
  const bool mvrr = t.construction == Construction::MVRR;
  const bool animacy = t.disamb_type == DisambType::ANIMACY;
  const bool et = t.paradigm == Paradigm::ET;
  auto& P = a.pop;

  a.loglik += tp.loglik;
  P[kLogitAttentive] += g[kEtaAttentive];
  P[kLogitGp] += g[kEtaGp];
  if (amb) {
    P[kBeta1] += g[kEtaGp];
    if (mvrr) P[kBeta2] += g[kEtaGp];
    if (animacy) P[kBetaAnimacy] += g[kEtaGp];
  }
  P[kLogitOvert] += g[kEtaOvert];
  if (et && std::abs(f.pop[kLogEtOvertSurplus]) <= kExpClamp) {
    P[kLogEtOvertSurplus] += g[kEtaOvert] * std::exp(f.pop[kLogEtOvertSurplus]);
  }
  P[kLogitPostpone] += g[kEtaPostpone];
  P[kLogitSuccessO] += g[kEtaSuccessO];
  if (mvrr) P[kBeta3] += g[kEtaSuccessO];
  P[kLogitSuccessC] += g[kEtaSuccessC];
  if (mvrr) P[kBeta4] += g[kEtaSuccessC];
  P[kLogitInfer] += g[kEtaInfer];
  P[kLogitBaseRegress] += g[kEtaBaseRegress];
  if (et) P[kBeta5] += g[kEtaBaseRegress];
  P[kMu] += g[kEtaMu];
  P[kLogSigma1] += g[kEtaLogSigma1];
  P[kLogSigmaDiff] += g[kEtaLogSigmaDiff];
  P[kLogShift] += g[kEtaLogShift];
  if (et) P[kLogitEtShift] += g[kEtaLogShift] * inv_logit(-f.pop[kLogitEtShift]);
  P[kLogAttCost] += g[kEtaLogAtt];
  P[kLogGpCost] += g[kEtaLogGp];
  P[kLogReanalysisCost] += g[kEtaLogReanalysis];
  P[kLogRegressionCost] += g[kEtaLogRegression];
  if (et) P[kLogitEtRegressionCost] += g[kEtaLogRegression] * inv_logit(-f.pop[kLogitEtRegressionCost]);
  P[kLenSlope] += g[kEtaLenSlope];
  if (with_surprisal) P[kSurpSlope] += g[kEtaSurpSlope];

  auto& du = a.du[p];
  du[kReShift] += g[kEtaLogShift];
  du[kReAttentive] += g[kEtaAttentive];
  du[kReOvert] += g[kEtaOvert];
  du[kRePostpone] += g[kEtaPostpone];
  du[kReInfer] += g[kEtaInfer];
  du[kReBaseRegress] += g[kEtaBaseRegress];
  du[kReGp] += g[kEtaGp];
  auto& dv = a.dv[i];
  dv[kReItemGp] += g[kEtaGp];
  dv[kReItemInfer] += g[kEtaInfer];
}

// Maps d loglik / d u (per group) to z, log tau and the CPC coordinates of
// one random-effect block.
template <int K>
void backprop_block(std::span<const double> theta, std::span<double> grad,
                    const std::array<double, K>& tau, const std::array<bool, K>& clamped,
                    const std::vector<std::array<double, K>>& u,
                    const std::vector<std::array<double, K>>& du, auto z_index,
                    auto log_tau_index, std::size_t cpc_begin) {
  constexpr int M = kNumCpc<K>;
  std::array<double, K * K> dL{};
  std::array<double, K> dlogtau{};
  std::array<double, M> y{};
  for (int k = 0; k < M; ++k) y[k] = theta[cpc_begin + k];
  const auto L = cholesky_corr_constrain<K, double>(y).L;
  for (std::size_t g = 0; g < u.size(); ++g) {
    std::array<double, K> w{};
    for (int e = 0; e < K; ++e) {
      w[e] = du[g][e] * tau[e];
      dlogtau[e] += du[g][e] * u[g][e];
    }
    for (int j = 0; j < K; ++j) {
      double s = 0.0;
      for (int e = j; e < K; ++e) s += L[e * K + j] * w[e];
      grad[z_index(g, j)] += s;
    }
    for (int e = 0; e < K; ++e) {
      for (int j = 0; j <= e; ++j) dL[e * K + j] += w[e] * theta[z_index(g, j)];
    }
  }
  for (int e = 0; e < K; ++e) {
    if (!clamped[e]) grad[log_tau_index(e)] += dlogtau[e];
  }
  if constexpr (M > 0) {
    std::array<Dual<M>, M> yd;
    for (int k = 0; k < M; ++k) yd[k] = Dual<M>::variable(y[k], k);
    const auto Ld = cholesky_corr_constrain<K, Dual<M>>(yd).L;
    for (int e = 0; e < K; ++e) {
      for (int j = 0; j <= e; ++j) {
        if (dL[e * K + j] == 0.0) continue;
        for (int k = 0; k < M; ++k) grad[cpc_begin + k] += dL[e * K + j] * Ld[e * K + j].d[k];
      }
    }
  }
}

void finish_gradient(const MptLayout& layout, std::span<const double> theta, const Frame& f,
                     const Accum& a, std::span<double> grad) {
  for (std::size_t k = 0; k < layout.n_pop(); ++k) grad[k] += a.pop[k];
  backprop_block<KP>(
      theta, grad, f.tau_p, f.tau_p_clamped, f.u, a.du,
      [&](std::size_t g, int e) { return layout.z_participant(g, e); },
      [&](int e) { return layout.log_tau_participant(e); }, layout.cpc_participant(0));
  backprop_block<KI>(
      theta, grad, f.tau_i, f.tau_i_clamped, f.v, a.dv,
      [&](std::size_t g, int e) { return layout.z_item(g, e); },
      [&](int e) { return layout.log_tau_item(e); }, layout.cpc_item(0));
}

LocalEta eta_for(const Frame& f, bool with_surprisal, const Trial& t, std::size_t p,
                 std::size_t i) {
  return local_eta(f.pop, with_surprisal, std::span<const double, KP>(f.u[p]),
                   std::span<const double, KI>(f.v[i]), t);
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

double reject(std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  return -std::numeric_limits<double>::infinity();
}

}  // namespace

MptModel::MptModel(TrialSet ts, bool with_surprisal, PriorConfig priors, Execution exec)
    : ts_(std::move(ts)),
      layout_(with_surprisal, ts_.n_participants(), ts_.n_items()),
      priors_(priors),
      exec_(exec) {
  priors_.validate();
  if (with_surprisal) {
    for (std::size_t t = 0; t < ts_.size(); ++t) {
      const char* missing = !ts_[t].surp_crit ? "surp_crit" : (!ts_[t].surp_spill ? "surp_spill" : nullptr);
      if (missing) {
        throw DataError(std::string("missing column ") + missing + " required by the surprisal term (trial " +
                        std::to_string(t + 1) + ")");
      }
    }
  }
}

double MptModel::log_likelihood(std::span<const double> theta, std::span<double> grad) const {
  if (theta.size() != layout_.dim()) throw std::invalid_argument("coordinate vector has wrong dimension");
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  if (!all_finite(theta)) return reject(grad);

  const Frame f = make_frame(layout_, theta);
  const bool ws = layout_.with_surprisal();
  const std::size_t n = ts_.size();
  Accum acc(layout_);

  if (exec_ == Execution::Serial) {
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t p = ts_.participant_index(t);
      const std::size_t i = ts_.item_index(t);
      const TrialPartials tp = trial_partials(ts_[t], eta_for(f, ws, ts_[t], p, i));
      if (tp.status != DensityStatus::Ok) return reject(grad);
      accumulate(ts_[t], p, i, tp, f, ws, acc);
    }
  } else {
    std::vector<TrialPartials> buf(n);
    const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < sn; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      buf[ut] = trial_partials_analytic(ts_[ut], eta_for(f, ws, ts_[ut], ts_.participant_index(ut),
                                                ts_.item_index(ut)));
    }
    for (std::size_t t = 0; t < n; ++t) {
      if (buf[t].status != DensityStatus::Ok) return reject(grad);
      accumulate(ts_[t], ts_.participant_index(t), ts_.item_index(t), buf[t], f, ws, acc);
    }
  }
  if (!std::isfinite(acc.loglik)) return reject(grad);
  if (want_grad) {
    finish_gradient(layout_, theta, f, acc, grad);
    if (!all_finite(grad)) return reject(grad);
  }
  return acc.loglik;
}

double MptModel::log_density(std::span<const double> theta, std::span<double> grad) const {
  const double ll = log_likelihood(theta, grad);
  if (!std::isfinite(ll)) return ll;
  const double lp = log_prior(layout_, theta, priors_, grad);
  if (!std::isfinite(lp)) return reject(grad);
  return ll + lp;
}

void MptModel::pointwise_loglik(std::span<const double> theta, std::span<double> out) const {
  if (out.size() != ts_.size()) throw std::invalid_argument("output span has wrong length");
  const Frame f = make_frame(layout_, theta);
  const bool ws = layout_.with_surprisal();
  const auto sn = static_cast<std::ptrdiff_t>(ts_.size());
#pragma omp parallel for schedule(static) if (exec_ == Execution::Parallel)
  for (std::ptrdiff_t t = 0; t < sn; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const LocalEta eta = eta_for(f, ws, ts_[ut], ts_.participant_index(ut), ts_.item_index(ut));
    const auto pp = process_probs_from_eta(eta, ts_[ut].paradigm, ts_[ut].task);
    const auto rp = rt_params_from_eta(eta);
    out[ut] = trial_loglik(ts_[ut], pp, rp).value;
  }
}

std::string MptModel::rejection_reason(std::span<const double> theta) const {
  if (!all_finite(theta)) return "non-finite coordinate";
  const Frame f = make_frame(layout_, theta);
  const bool ws = layout_.with_surprisal();
  for (std::size_t t = 0; t < ts_.size(); ++t) {
    const Trial& tr = ts_[t];
    const LocalEta eta = eta_for(f, ws, tr, ts_.participant_index(t), ts_.item_index(t));
    const auto pp = process_probs_from_eta(eta, tr.paradigm, tr.task);
    const auto rp = rt_params_from_eta(eta);
    const LogDensity ld = trial_loglik(tr, pp, rp);
    const std::string where = "trial " + std::to_string(t + 1) + " (participant " +
                              tr.participant_id + ", item " + tr.item_id + ")";
    if (ld.status == DensityStatus::BelowShift) {
      return where + ": reading time not above shift " + csv::format_double(rp.shift) + " ms";
    }
    if (ld.status == DensityStatus::ImpossibleObservation || !std::isfinite(ld.value)) {
      return where + ": observation has zero probability";
    }
  }
  if (!std::isfinite(log_prior(layout_, theta, priors_))) return "log prior is not finite";
  return {};
}

}  // namespace gpmix
