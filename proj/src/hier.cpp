#include "gpmix/hier.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "gpmix/csv.hpp"

namespace gpmix {

using namespace mpt;

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::BASELINE: return "baseline";
    case ModelKind::MPT: return "mpt";
    case ModelKind::SURPRISAL: return "surprisal";
    case ModelKind::MPT_PLUS_SURPRISAL: return "mpt-surprisal";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) {
  std::string l(s);
  for (char& c : l) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (l == "baseline") return ModelKind::BASELINE;
  if (l == "mpt") return ModelKind::MPT;
  if (l == "surprisal") return ModelKind::SURPRISAL;
  if (l == "mpt-surprisal" || l == "mpt_plus_surprisal" || l == "mpt-plus-surprisal") {
    return ModelKind::MPT_PLUS_SURPRISAL;
  }
  return std::nullopt;
}

namespace {

using PriorField = std::pair<const char*, double PriorConfig::*>;
constexpr PriorField kPriorFields[] = {
    {"logit_sd", &PriorConfig::logit_sd},
    {"log_cost_mean", &PriorConfig::log_cost_mean},
    {"log_cost_sd", &PriorConfig::log_cost_sd},
    {"shift_mean", &PriorConfig::shift_mean},
    {"shift_sd", &PriorConfig::shift_sd},
    {"beta_sd", &PriorConfig::beta_sd},
    {"re_scale_sd", &PriorConfig::re_scale_sd},
    {"lkj_eta", &PriorConfig::lkj_eta},
    {"mu_mean", &PriorConfig::mu_mean},
    {"mu_sd", &PriorConfig::mu_sd},
    {"log_sigma1_mean", &PriorConfig::log_sigma1_mean},
    {"log_sigma_diff_mean", &PriorConfig::log_sigma_diff_mean},
    {"log_sigma_sd", &PriorConfig::log_sigma_sd},
    {"len_slope_sd", &PriorConfig::len_slope_sd},
    {"surp_slope_sd", &PriorConfig::surp_slope_sd},
    {"et_logit_sd", &PriorConfig::et_logit_sd},
    {"et_overt_log_mean", &PriorConfig::et_overt_log_mean},
    {"et_overt_log_sd", &PriorConfig::et_overt_log_sd},
    {"rt_intercept_mean", &PriorConfig::rt_intercept_mean},
    {"rt_intercept_sd", &PriorConfig::rt_intercept_sd},
    {"log_rt_sigma_mean", &PriorConfig::log_rt_sigma_mean},
    {"bernoulli_surp_slope_sd", &PriorConfig::bernoulli_surp_slope_sd},
};

bool is_scale_key(std::string_view key) {
  return key.ends_with("_sd") || key == "lkj_eta";
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

void PriorConfig::validate() const {
  for (const auto& [key, member] : kPriorFields) {
    const double v = this->*member;
    if (!std::isfinite(v)) throw std::invalid_argument(std::string("prior ") + key + " is not finite");
    if (is_scale_key(key) && !(v > 0.0)) {
      throw std::invalid_argument(std::string("prior ") + key + " must be positive");
    }
  }
}

PriorConfig parse_prior_config(std::string_view text) {
  PriorConfig pc;
  std::size_t line_no = 0;
  for (std::string_view line : csv::lines(text)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("prior config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const auto value = csv::parse_double(trim(line.substr(eq + 1)));
    if (!value) {
      throw std::invalid_argument("prior config line " + std::to_string(line_no) + ": bad number");
    }
    bool found = false;
    for (const auto& [name, member] : kPriorFields) {
      if (key == name) {
        pc.*member = *value;
        found = true;
      }
    }
    if (!found) throw std::invalid_argument("unknown prior key: " + std::string(key));
  }
  pc.validate();
  return pc;
}

std::string serialize_prior_config(const PriorConfig& pc) {
  std::string out;
  for (const auto& [name, member] : kPriorFields) {
    out += std::string(name) + " = " + csv::format_double(pc.*member) + '\n';
  }
  return out;
}

namespace mpt {

std::string_view pop_name(int k) {
  static constexpr std::string_view names[] = {
      "logit_p_attentive", "logit_p_gp", "logit_p_overt", "logit_p_postpone",
      "logit_p_success_o", "logit_p_success_c", "logit_p_infer", "logit_p_base_regress",
      "mu", "log_sigma1", "log_sigma_diff", "log_shift",
      "log_att_cost", "log_gp_cost", "log_reanalysis_cost", "log_regression_cost",
      "len_slope", "beta1", "beta2", "beta3",
      "beta4", "beta5", "beta_animacy", "logit_et_shift",
      "logit_et_regression_cost", "log_et_overt_surplus", "surp_slope"};
  static_assert(std::size(names) == kNumPop);
  return names[k];
}

std::string_view participant_effect_name(int e) {
  static constexpr std::string_view names[] = {"shift", "attentive", "overt", "postpone",
                                               "infer", "base_regress", "gp"};
  return names[e];
}

std::string_view item_effect_name(int e) {
  static constexpr std::string_view names[] = {"gp", "infer"};
  return names[e];
}

}  // namespace mpt

MptLayout::MptLayout(bool with_surprisal, std::size_t n_participants, std::size_t n_items)
    : with_surprisal_(with_surprisal),
      n_participants_(n_participants),
      n_items_(n_items),
      n_pop_(with_surprisal ? kNumPop : kNumPop - 1) {
  cpc_begin_ = n_pop_ + kNumParticipantEffects + kNumItemEffects;
  z_begin_ = cpc_begin_ + kNumParticipantCpc + kNumItemCpc;
  z_item_begin_ = z_begin_ + n_participants_ * kNumParticipantEffects;
  dim_ = z_item_begin_ + n_items_ * kNumItemEffects;
}

std::vector<std::string> MptLayout::names() const {
  std::vector<std::string> out;
  out.reserve(dim_);
  for (std::size_t k = 0; k < n_pop_; ++k) out.emplace_back(pop_name(static_cast<int>(k)));
  for (int e = 0; e < kNumParticipantEffects; ++e) {
    out.push_back("log_tau_participant." + std::string(participant_effect_name(e)));
  }
  for (int e = 0; e < kNumItemEffects; ++e) {
    out.push_back("log_tau_item." + std::string(item_effect_name(e)));
  }
  for (int k = 0; k < kNumParticipantCpc; ++k) out.push_back("cpc_participant." + std::to_string(k));
  for (int k = 0; k < kNumItemCpc; ++k) out.push_back("cpc_item." + std::to_string(k));
  for (std::size_t p = 0; p < n_participants_; ++p) {
    for (int e = 0; e < kNumParticipantEffects; ++e) {
      out.push_back("z_participant." + std::to_string(p) + "." +
                    std::string(participant_effect_name(e)));
    }
  }
  for (std::size_t i = 0; i < n_items_; ++i) {
    for (int e = 0; e < kNumItemEffects; ++e) {
      out.push_back("z_item." + std::to_string(i) + "." + std::string(item_effect_name(e)));
    }
  }
  return out;
}

double log_inv_logit(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

namespace {

// log(p (1 - p)) for p = inv_logit(x)
double log_logistic_density(double x) { return log_inv_logit(x) + log_inv_logit(-x); }

constexpr int kLogitCoords[] = {kLogitAttentive, kLogitGp, kLogitOvert, kLogitPostpone,
                                kLogitSuccessO, kLogitSuccessC, kLogitInfer, kLogitBaseRegress,
                                kLogitEtShift, kLogitEtRegressionCost};
constexpr int kLogCoords[] = {kLogSigma1, kLogSigmaDiff, kLogShift, kLogAttCost, kLogGpCost,
                              kLogReanalysisCost, kLogRegressionCost, kLogEtOvertSurplus};

template <int K>
std::array<double, kNumCpc<K>> read_cpc(std::span<const double> pv, std::size_t begin) {
  std::array<double, kNumCpc<K>> y{};
  for (int k = 0; k < kNumCpc<K>; ++k) y[k] = pv[begin + k];
  return y;
}

// u = tau .* (L z)
template <int K>
std::array<double, K> apply_effects(const std::array<double, K>& tau,
                                    const std::array<double, K * K>& L, const double* z) {
  std::array<double, K> u{};
  for (int e = 0; e < K; ++e) {
    double s = 0.0;
    for (int j = 0; j <= e; ++j) s += L[e * K + j] * z[j];
    u[e] = tau[e] * s;
  }
  return u;
}

}  // namespace

TransformResult transform(const MptLayout& layout, std::span<const double> pv) {
  if (pv.size() != layout.dim()) throw std::invalid_argument("coordinate vector has wrong dimension");
  TransformResult r;
  ConstrainedParams& cp = r.cp;
  int* clamped = &r.n_clamped;
  cp.with_surprisal = layout.with_surprisal();
  cp.pop.assign(pv.begin(), pv.begin() + static_cast<std::ptrdiff_t>(layout.n_pop()));
  const auto& c = cp.pop;

  cp.base_probs.p_attentive = inv_logit(c[kLogitAttentive]);
  cp.base_probs.p_gp = inv_logit(c[kLogitGp]);
  cp.base_probs.p_overt = inv_logit(c[kLogitOvert]);
  cp.base_probs.p_postpone = inv_logit(c[kLogitPostpone]);
  cp.base_probs.p_success_o = inv_logit(c[kLogitSuccessO]);
  cp.base_probs.p_success_c = inv_logit(c[kLogitSuccessC]);
  cp.base_probs.p_infer = inv_logit(c[kLogitInfer]);
  cp.base_probs.p_base_regress = inv_logit(c[kLogitBaseRegress]);

  cp.rt.mu = c[kMu];
  cp.rt.sigma1 = guarded_exp(c[kLogSigma1], clamped);
  cp.rt.sigma2 = cp.rt.sigma1 + guarded_exp(c[kLogSigmaDiff], clamped);
  cp.rt.shift = guarded_exp(c[kLogShift], clamped);
  cp.rt.att_cost = guarded_exp(c[kLogAttCost], clamped);
  cp.rt.gp_cost = guarded_exp(c[kLogGpCost], clamped);
  cp.rt.reanalysis_cost = guarded_exp(c[kLogReanalysisCost], clamped);
  cp.rt.regression_cost = guarded_exp(c[kLogRegressionCost], clamped);
  cp.rt.len_slope = c[kLenSlope];
  cp.rt.surp_slope = layout.with_surprisal() ? c[kSurpSlope] : 0.0;
  for (int b = 0; b < 6; ++b) cp.beta[b] = c[kBeta1 + b];
  cp.et_shift_multiplier = inv_logit(c[kLogitEtShift]);
  cp.et_regression_multiplier = inv_logit(c[kLogitEtRegressionCost]);
  cp.et_overt_surplus = guarded_exp(c[kLogEtOvertSurplus], clamped);

  double lj = 0.0;
  for (int k : kLogitCoords) lj += log_logistic_density(c[k]);
  for (int k : kLogCoords) lj += c[k];

  for (int e = 0; e < kNumParticipantEffects; ++e) {
    const double x = pv[layout.log_tau_participant(e)];
    cp.tau_participant[e] = guarded_exp(x, clamped);
    lj += x;
  }
  for (int e = 0; e < kNumItemEffects; ++e) {
    const double x = pv[layout.log_tau_item(e)];
    cp.tau_item[e] = guarded_exp(x, clamped);
    lj += x;
  }

  const auto chol_p = cholesky_corr_constrain<kNumParticipantEffects, double>(
      read_cpc<kNumParticipantEffects>(pv, layout.cpc_participant(0)));
  const auto chol_i = cholesky_corr_constrain<kNumItemEffects, double>(
      read_cpc<kNumItemEffects>(pv, layout.cpc_item(0)));
  cp.chol_participant = chol_p.L;
  cp.chol_item = chol_i.L;
  lj += chol_p.log_jacobian + chol_i.log_jacobian;

  cp.participant_effects.resize(layout.n_participants());
  for (std::size_t p = 0; p < layout.n_participants(); ++p) {
    cp.participant_effects[p] = apply_effects<kNumParticipantEffects>(
        cp.tau_participant, cp.chol_participant, &pv[layout.z_participant(p, 0)]);
  }
  cp.item_effects.resize(layout.n_items());
  for (std::size_t i = 0; i < layout.n_items(); ++i) {
    cp.item_effects[i] =
        apply_effects<kNumItemEffects>(cp.tau_item, cp.chol_item, &pv[layout.z_item(i, 0)]);
  }
  double per_participant = 0.0;
  for (int e = 0; e < kNumParticipantEffects; ++e) {
    per_participant += std::log(cp.tau_participant[e]) +
                       std::log(cp.chol_participant[e * kNumParticipantEffects + e]);
  }
  double per_item = 0.0;
  for (int e = 0; e < kNumItemEffects; ++e) {
    per_item += std::log(cp.tau_item[e]) + std::log(cp.chol_item[e * kNumItemEffects + e]);
  }
  lj += static_cast<double>(layout.n_participants()) * per_participant +
        static_cast<double>(layout.n_items()) * per_item;
  r.log_jacobian = lj;
  return r;
}

std::vector<double> inverse_transform(const MptLayout& layout, const ConstrainedParams& cp) {
  std::vector<double> pv(layout.dim(), 0.0);
  const ProcessProbs& b = cp.base_probs;
  pv[kLogitAttentive] = logit(b.p_attentive);
  pv[kLogitGp] = logit(b.p_gp);
  pv[kLogitOvert] = logit(b.p_overt);
  pv[kLogitPostpone] = logit(b.p_postpone);
  pv[kLogitSuccessO] = logit(b.p_success_o);
  pv[kLogitSuccessC] = logit(b.p_success_c);
  pv[kLogitInfer] = logit(b.p_infer);
  pv[kLogitBaseRegress] = logit(b.p_base_regress);
  pv[kMu] = cp.rt.mu;
  pv[kLogSigma1] = std::log(cp.rt.sigma1);
  pv[kLogSigmaDiff] = std::log(cp.rt.sigma2 - cp.rt.sigma1);
  pv[kLogShift] = std::log(cp.rt.shift);
  pv[kLogAttCost] = std::log(cp.rt.att_cost);
  pv[kLogGpCost] = std::log(cp.rt.gp_cost);
  pv[kLogReanalysisCost] = std::log(cp.rt.reanalysis_cost);
  pv[kLogRegressionCost] = std::log(cp.rt.regression_cost);
  pv[kLenSlope] = cp.rt.len_slope;
  for (int k = 0; k < 6; ++k) pv[kBeta1 + k] = cp.beta[k];
  pv[kLogitEtShift] = logit(cp.et_shift_multiplier);
  pv[kLogitEtRegressionCost] = logit(cp.et_regression_multiplier);
  pv[kLogEtOvertSurplus] = std::log(cp.et_overt_surplus);
  if (layout.with_surprisal()) pv[kSurpSlope] = cp.rt.surp_slope;

  for (int e = 0; e < kNumParticipantEffects; ++e) {
    pv[layout.log_tau_participant(e)] = std::log(cp.tau_participant[e]);
  }
  for (int e = 0; e < kNumItemEffects; ++e) pv[layout.log_tau_item(e)] = std::log(cp.tau_item[e]);
  const auto yp = cholesky_corr_free<kNumParticipantEffects>(cp.chol_participant);
  for (int k = 0; k < kNumParticipantCpc; ++k) pv[layout.cpc_participant(k)] = yp[k];
  const auto yi = cholesky_corr_free<kNumItemEffects>(cp.chol_item);
  for (int k = 0; k < kNumItemCpc; ++k) pv[layout.cpc_item(k)] = yi[k];

  // forward substitution: L z = u / tau
  auto solve = [](auto K_tag, const auto& tau, const auto& L, const auto& u, double* z) {
    constexpr int K = decltype(K_tag)::value;
    for (int e = 0; e < K; ++e) {
      double s = u[e] / tau[e];
      for (int j = 0; j < e; ++j) s -= L[e * K + j] * z[j];
      z[e] = s / L[e * K + e];
    }
  };
  for (std::size_t p = 0; p < layout.n_participants(); ++p) {
    solve(std::integral_constant<int, kNumParticipantEffects>{}, cp.tau_participant,
          cp.chol_participant, cp.participant_effects[p], &pv[layout.z_participant(p, 0)]);
  }
  for (std::size_t i = 0; i < layout.n_items(); ++i) {
    solve(std::integral_constant<int, kNumItemEffects>{}, cp.tau_item, cp.chol_item,
          cp.item_effects[i], &pv[layout.z_item(i, 0)]);
  }
  return pv;
}

std::vector<double> constrained_image(const MptLayout& layout, std::span<const double> pv) {
  const TransformResult tr = transform(layout, pv);
  const ConstrainedParams& cp = tr.cp;
  std::vector<double> out(pv.begin(), pv.end());
  for (int k : kLogitCoords) out[k] = inv_logit(pv[k]);
  for (int k : kLogCoords) out[k] = std::exp(pv[k]);
  out[kLogSigmaDiff] = cp.rt.sigma2;
  for (int e = 0; e < kNumParticipantEffects; ++e) {
    out[layout.log_tau_participant(e)] = cp.tau_participant[e];
  }
  for (int e = 0; e < kNumItemEffects; ++e) out[layout.log_tau_item(e)] = cp.tau_item[e];
  int k = 0;
  for (int i = 1; i < kNumParticipantEffects; ++i) {
    for (int j = 0; j < i; ++j) {
      out[layout.cpc_participant(k++)] = cp.chol_participant[i * kNumParticipantEffects + j];
    }
  }
  k = 0;
  for (int i = 1; i < kNumItemEffects; ++i) {
    for (int j = 0; j < i; ++j) out[layout.cpc_item(k++)] = cp.chol_item[i * kNumItemEffects + j];
  }
  for (std::size_t p = 0; p < layout.n_participants(); ++p) {
    for (int e = 0; e < kNumParticipantEffects; ++e) {
      out[layout.z_participant(p, e)] = cp.participant_effects[p][e];
    }
  }
  for (std::size_t i = 0; i < layout.n_items(); ++i) {
    for (int e = 0; e < kNumItemEffects; ++e) out[layout.z_item(i, e)] = cp.item_effects[i][e];
  }
  return out;
}

LocalEta local_eta(std::span<const double> pop, bool with_surprisal,
                   std::span<const double, kNumParticipantEffects> u,
                   std::span<const double, kNumItemEffects> v, const Trial& trial) {
  const bool amb = trial.ambiguity == Ambiguity::AMBIGUOUS;
  const bool mvrr = trial.construction == Construction::MVRR;
  const bool animacy = trial.disamb_type == DisambType::ANIMACY;
  const bool et = trial.paradigm == Paradigm::ET;

  LocalEta eta{};
  eta[kEtaAttentive] = pop[kLogitAttentive] + u[kReAttentive];
  eta[kEtaGp] = pop[kLogitGp] + u[kReGp] + v[kReItemGp];
  if (amb) {
    eta[kEtaGp] += pop[kBeta1];
    if (mvrr) eta[kEtaGp] += pop[kBeta2];
    if (animacy) eta[kEtaGp] += pop[kBetaAnimacy];
  }
  eta[kEtaOvert] = pop[kLogitOvert] + u[kReOvert];
  if (et) eta[kEtaOvert] += guarded_exp(pop[kLogEtOvertSurplus]);
  eta[kEtaPostpone] = pop[kLogitPostpone] + u[kRePostpone];
  eta[kEtaSuccessO] = pop[kLogitSuccessO] + (mvrr ? pop[kBeta3] : 0.0);
  eta[kEtaSuccessC] = pop[kLogitSuccessC] + (mvrr ? pop[kBeta4] : 0.0);
  eta[kEtaInfer] = pop[kLogitInfer] + u[kReInfer] + v[kReItemInfer];
  eta[kEtaBaseRegress] = pop[kLogitBaseRegress] + u[kReBaseRegress] + (et ? pop[kBeta5] : 0.0);
  eta[kEtaMu] = pop[kMu];
  eta[kEtaLogSigma1] = pop[kLogSigma1];
  eta[kEtaLogSigmaDiff] = pop[kLogSigmaDiff];
  eta[kEtaLogShift] = pop[kLogShift] + u[kReShift];
  if (et) eta[kEtaLogShift] += log_inv_logit(pop[kLogitEtShift]);
  eta[kEtaLogAtt] = pop[kLogAttCost];
  eta[kEtaLogGp] = pop[kLogGpCost];
  eta[kEtaLogReanalysis] = pop[kLogReanalysisCost];
  eta[kEtaLogRegression] = pop[kLogRegressionCost];
  if (et) eta[kEtaLogRegression] += log_inv_logit(pop[kLogitEtRegressionCost]);
  eta[kEtaLenSlope] = pop[kLenSlope];
  eta[kEtaSurpSlope] = with_surprisal ? pop[kSurpSlope] : 0.0;
  return eta;
}

LocalEta local_eta(const ConstrainedParams& cp, const Trial& trial, std::size_t participant,
                   std::size_t item) {
  return local_eta(cp.pop, cp.with_surprisal,
                   std::span<const double, kNumParticipantEffects>(cp.participant_effects.at(participant)),
                   std::span<const double, kNumItemEffects>(cp.item_effects.at(item)), trial);
}

ProcessProbs assemble_process_probs(const ConstrainedParams& cp, const Trial& trial,
                                    std::size_t participant, std::size_t item) {
  return process_probs_from_eta(local_eta(cp, trial, participant, item), trial.paradigm, trial.task);
}

RtParams assemble_rt_params(const ConstrainedParams& cp, const Trial& trial,
                            std::size_t participant, std::size_t item) {
  return rt_params_from_eta(local_eta(cp, trial, participant, item));
}

double normal_lpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - detail::kHalfLog2Pi;
}

double half_normal_lpdf(double x, double sd) {
  return std::log(2.0) + normal_lpdf(x, 0.0, sd);
}

double truncated_normal_lpdf(double x, double mean, double sd) {
  // P(X > 0) = Phi(mean / sd)
  const double log_mass = std::log(0.5 * std::erfc(-mean / (sd * std::sqrt(2.0))));
  return normal_lpdf(x, mean, sd) - log_mass;
}

double lkj_log_normalizer(int K, double eta) {
  double out = 0.0;
  for (int k = 1; k < K; ++k) {
    const double km = static_cast<double>(K - k);
    const double a = eta + 0.5 * (km - 1.0);
    const double lbeta = 2.0 * std::lgamma(a) - std::lgamma(2.0 * a);
    out += (2.0 * eta - 2.0 + km) * km * std::log(2.0) + km * lbeta;
  }
  return out;
}

namespace {

template <int K>
double lkj_block(std::span<const double> pv, std::size_t begin, double eta, std::span<double> grad) {
  constexpr int M = kNumCpc<K>;
  if constexpr (M == 0) {
    return 0.0;
  } else {
    std::array<Dual<M>, M> y;
    for (int k = 0; k < M; ++k) y[k] = Dual<M>::variable(pv[begin + k], k);
    const auto chol = cholesky_corr_constrain<K, Dual<M>>(y);
    const Dual<M> lp = lkj_corr_cholesky_lpdf<K, Dual<M>>(chol.L, eta) + chol.log_jacobian;
    if (!grad.empty()) {
      for (int k = 0; k < M; ++k) grad[begin + k] += lp.d[k];
    }
    return lp.v;
  }
}

}  // namespace

double log_prior(const MptLayout& layout, std::span<const double> pv, const PriorConfig& pr,
                 std::span<double> grad) {
  const bool g = !grad.empty();
  double lp = 0.0;
  auto normal = [&](std::size_t idx, double mean, double sd) {
    const double x = pv[idx];
    lp += normal_lpdf(x, mean, sd);
    if (g) grad[idx] -= (x - mean) / (sd * sd);
  };
  for (int k = kLogitAttentive; k <= kLogitBaseRegress; ++k) normal(k, 0.0, pr.logit_sd);
  normal(kMu, pr.mu_mean, pr.mu_sd);
  normal(kLogSigma1, pr.log_sigma1_mean, pr.log_sigma_sd);
  normal(kLogSigmaDiff, pr.log_sigma_diff_mean, pr.log_sigma_sd);
  {
    // shift prior on the millisecond scale, plus the log Jacobian
    const double x = pv[kLogShift];
    const double s = guarded_exp(x);
    lp += truncated_normal_lpdf(s, pr.shift_mean, pr.shift_sd) + x;
    if (g && std::abs(x) <= kExpClamp) {
      grad[kLogShift] += -(s - pr.shift_mean) / (pr.shift_sd * pr.shift_sd) * s + 1.0;
    } else if (g) {
      grad[kLogShift] += 1.0;
    }
  }
  for (int k = kLogAttCost; k <= kLogRegressionCost; ++k) normal(k, pr.log_cost_mean, pr.log_cost_sd);
  normal(kLenSlope, 0.0, pr.len_slope_sd);
  for (int k = kBeta1; k <= kBetaAnimacy; ++k) normal(k, 0.0, pr.beta_sd);
  normal(kLogitEtShift, 0.0, pr.et_logit_sd);
  normal(kLogitEtRegressionCost, 0.0, pr.et_logit_sd);
  normal(kLogEtOvertSurplus, pr.et_overt_log_mean, pr.et_overt_log_sd);
  if (layout.with_surprisal()) normal(kSurpSlope, 0.0, pr.surp_slope_sd);

  auto scale = [&](std::size_t idx) {
    const double x = pv[idx];
    const double t = guarded_exp(x);
    lp += half_normal_lpdf(t, pr.re_scale_sd) + x;
    if (g) {
      const double dt = std::abs(x) <= kExpClamp ? -t / (pr.re_scale_sd * pr.re_scale_sd) * t : 0.0;
      grad[idx] += dt + 1.0;
    }
  };
  for (int e = 0; e < kNumParticipantEffects; ++e) scale(layout.log_tau_participant(e));
  for (int e = 0; e < kNumItemEffects; ++e) scale(layout.log_tau_item(e));

  lp += lkj_block<kNumParticipantEffects>(pv, layout.cpc_participant(0), pr.lkj_eta, grad);
  lp += lkj_block<kNumItemEffects>(pv, layout.cpc_item(0), pr.lkj_eta, grad);

  const std::size_t z_begin = layout.z_participant(0, 0);
  for (std::size_t k = z_begin; k < layout.dim(); ++k) {
    lp += -0.5 * pv[k] * pv[k] - detail::kHalfLog2Pi;
    if (g) grad[k] -= pv[k];
  }
  return lp;
}

}  // namespace gpmix
