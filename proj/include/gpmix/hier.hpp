#pragma once

// Hierarchical parameterization of the MPT mixture model: coordinate layout,
// constraining transform, per-trial assembly of process probabilities and
// RT parameters, and the log-prior.
//
// Every coordinate is unconstrained. Probabilities enter through logits,
// costs and scales through logs, sigma2 = sigma1 + exp(increment), and
// crossed random effects are non-centered: u = tau .* (L z) with z standard
// normal and L the Cholesky factor of an LKJ-distributed correlation matrix.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpmix/corr.hpp"
#include "gpmix/data.hpp"
#include "gpmix/rtmix.hpp"
#include "gpmix/tree.hpp"

namespace gpmix {

enum class ModelKind { BASELINE, MPT, SURPRISAL, MPT_PLUS_SURPRISAL };
std::string_view to_string(ModelKind k);
/// Accepts baseline, mpt, surprisal, mpt-surprisal (and the enum spellings).
std::optional<ModelKind> parse_model_kind(std::string_view s);
constexpr bool uses_surprisal(ModelKind k) {
  return k == ModelKind::SURPRISAL || k == ModelKind::MPT_PLUS_SURPRISAL;
}
constexpr bool is_mpt_family(ModelKind k) {
  return k == ModelKind::MPT || k == ModelKind::MPT_PLUS_SURPRISAL;
}

/// Prior hyperparameters. Every field is a key of the flat config format
/// (`key = value`, `#` comments).
struct PriorConfig {
  double logit_sd = 1.5;
  double log_cost_mean = -2.302585092994046;  // log(0.1)
  double log_cost_sd = 1.0;
  double shift_mean = 150.0;
  double shift_sd = 50.0;
  double beta_sd = 1.0;
  double re_scale_sd = 0.5;
  double lkj_eta = 4.0;
  double mu_mean = 5.5;
  double mu_sd = 1.5;
  double log_sigma1_mean = -1.0;
  double log_sigma_diff_mean = -1.5;
  double log_sigma_sd = 1.0;
  double len_slope_sd = 0.1;
  double surp_slope_sd = 0.1;
  double et_logit_sd = 1.5;
  double et_overt_log_mean = -1.0;
  double et_overt_log_sd = 1.0;
  // regression competitors
  double rt_intercept_mean = 6.0;
  double rt_intercept_sd = 1.5;
  double log_rt_sigma_mean = -0.7;
  double bernoulli_surp_slope_sd = 1.0;

  /// Throws std::invalid_argument for non-positive scales or eta.
  void validate() const;
};

PriorConfig parse_prior_config(std::string_view text);
std::string serialize_prior_config(const PriorConfig& pc);

namespace mpt {

// Population coordinates. kSurpSlope exists only in the hybrid model.
enum Pop : int {
  kLogitAttentive,
  kLogitGp,
  kLogitOvert,
  kLogitPostpone,
  kLogitSuccessO,
  kLogitSuccessC,
  kLogitInfer,
  kLogitBaseRegress,
  kMu,
  kLogSigma1,
  kLogSigmaDiff,
  kLogShift,
  kLogAttCost,
  kLogGpCost,
  kLogReanalysisCost,
  kLogRegressionCost,
  kLenSlope,
  kBeta1,  // garden path, ambiguous
  kBeta2,  // ambiguity effect, MVRR vs NPZ
  kBeta3,  // overt success, MVRR
  kBeta4,  // covert success, MVRR
  kBeta5,  // baseline regression, ET vs BSPR
  kBetaAnimacy,  // ambiguity effect, animacy disambiguation
  kLogitEtShift,
  kLogitEtRegressionCost,
  kLogEtOvertSurplus,
  kSurpSlope,
  kNumPop
};

enum ParticipantEffect : int {
  kReShift,
  kReAttentive,
  kReOvert,
  kRePostpone,
  kReInfer,
  kReBaseRegress,
  kReGp,
  kNumParticipantEffects
};

enum ItemEffect : int { kReItemGp, kReItemInfer, kNumItemEffects };

inline constexpr int kNumParticipantCpc = kNumCpc<kNumParticipantEffects>;
inline constexpr int kNumItemCpc = kNumCpc<kNumItemEffects>;

// Per-trial linear predictors; the likelihood of a trial depends on the
// coordinates only through these.
enum Local : int {
  kEtaAttentive,
  kEtaGp,
  kEtaOvert,
  kEtaPostpone,
  kEtaSuccessO,
  kEtaSuccessC,
  kEtaInfer,
  kEtaBaseRegress,
  kEtaMu,
  kEtaLogSigma1,
  kEtaLogSigmaDiff,
  kEtaLogShift,
  kEtaLogAtt,
  kEtaLogGp,
  kEtaLogReanalysis,
  kEtaLogRegression,
  kEtaLenSlope,
  kEtaSurpSlope,
  kNumLocal
};

std::string_view pop_name(int k);
std::string_view participant_effect_name(int e);
std::string_view item_effect_name(int e);

}  // namespace mpt

/// Coordinates exp() is applied to are clamped to this magnitude first.
inline constexpr double kExpClamp = 40.0;

/// Flat coordinate layout:
///   [population][log tau participant][log tau item][participant CPCs]
///   [item CPCs][z participant (row per participant)][z item]
class MptLayout {
 public:
  MptLayout(bool with_surprisal, std::size_t n_participants, std::size_t n_items);

  bool with_surprisal() const { return with_surprisal_; }
  std::size_t n_participants() const { return n_participants_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t n_pop() const { return n_pop_; }
  std::size_t dim() const { return dim_; }

  std::size_t log_tau_participant(int e) const { return n_pop_ + e; }
  std::size_t log_tau_item(int e) const { return n_pop_ + mpt::kNumParticipantEffects + e; }
  std::size_t cpc_participant(int k) const { return cpc_begin_ + k; }
  std::size_t cpc_item(int k) const { return cpc_begin_ + mpt::kNumParticipantCpc + k; }
  std::size_t z_participant(std::size_t p, int e) const {
    return z_begin_ + p * mpt::kNumParticipantEffects + e;
  }
  std::size_t z_item(std::size_t i, int e) const {
    return z_item_begin_ + i * mpt::kNumItemEffects + e;
  }
  /// Population coordinates plus random-effect scales.
  std::size_t n_top_level() const { return cpc_begin_; }

  std::vector<std::string> names() const;

 private:
  bool with_surprisal_;
  std::size_t n_participants_;
  std::size_t n_items_;
  std::size_t n_pop_;
  std::size_t cpc_begin_;
  std::size_t z_begin_;
  std::size_t z_item_begin_;
  std::size_t dim_;
};

/// Constrained images of a coordinate vector.
struct ConstrainedParams {
  bool with_surprisal = false;
  std::vector<double> pop;  // raw population coordinates (logit / log scale)

  // population-level values on their natural scales
  ProcessProbs base_probs;  // inverse logits of the intercepts
  RtParams rt;              // population RT parameters (shift before ET scaling)
  std::array<double, 6> beta{};  // beta1..beta5, animacy
  double et_shift_multiplier = 1.0;
  double et_regression_multiplier = 1.0;
  double et_overt_surplus = 0.0;

  std::array<double, mpt::kNumParticipantEffects> tau_participant{};
  std::array<double, mpt::kNumItemEffects> tau_item{};
  std::array<double, mpt::kNumParticipantEffects * mpt::kNumParticipantEffects> chol_participant{};
  std::array<double, mpt::kNumItemEffects * mpt::kNumItemEffects> chol_item{};
  std::vector<std::array<double, mpt::kNumParticipantEffects>> participant_effects;
  std::vector<std::array<double, mpt::kNumItemEffects>> item_effects;
};

struct TransformResult {
  ConstrainedParams cp;
  double log_jacobian = 0.0;
  int n_clamped = 0;  // coordinates clamped before exp
};

TransformResult transform(const MptLayout& layout, std::span<const double> pv);
std::vector<double> inverse_transform(const MptLayout& layout, const ConstrainedParams& cp);

/// The constrained image as a flat vector aligned with the coordinates
/// (probabilities, positive values, sigma2, strictly-lower Cholesky entries,
/// random effects u). Its Jacobian determinant is exp(log_jacobian).
std::vector<double> constrained_image(const MptLayout& layout, std::span<const double> pv);

using LocalEta = std::array<double, mpt::kNumLocal>;

/// Per-trial linear predictors from population coordinates and the trial's
/// participant / item effects.
LocalEta local_eta(std::span<const double> pop, bool with_surprisal,
                   std::span<const double, mpt::kNumParticipantEffects> participant_effect,
                   std::span<const double, mpt::kNumItemEffects> item_effect, const Trial& trial);

LocalEta local_eta(const ConstrainedParams& cp, const Trial& trial, std::size_t participant,
                   std::size_t item);

inline double guarded_exp(double x, int* clamped = nullptr) {
  if (x > kExpClamp || x < -kExpClamp) {
    if (clamped) ++*clamped;
    x = x > 0 ? kExpClamp : -kExpClamp;
  }
  return std::exp(x);
}
template <int N>
inline Dual<N> guarded_exp(const Dual<N>& x) {
  if (x.v > kExpClamp || x.v < -kExpClamp) return Dual<N>(x.v > 0 ? std::exp(kExpClamp) : std::exp(-kExpClamp));
  return exp(x);
}

template <class T>
BasicProcessProbs<T> process_probs_from_eta(const std::array<T, mpt::kNumLocal>& eta,
                                            Paradigm paradigm, Task task) {
  BasicProcessProbs<T> pp;
  pp.p_attentive = inv_logit(eta[mpt::kEtaAttentive]);
  pp.p_gp = inv_logit(eta[mpt::kEtaGp]);
  pp.p_postpone = inv_logit(eta[mpt::kEtaPostpone]);
  pp.p_success_o = inv_logit(eta[mpt::kEtaSuccessO]);
  pp.p_success_c = inv_logit(eta[mpt::kEtaSuccessC]);
  if (regressions_possible(paradigm)) {
    pp.p_overt = inv_logit(eta[mpt::kEtaOvert]);
    pp.p_base_regress = inv_logit(eta[mpt::kEtaBaseRegress]);
  } else {
    pp.p_overt = T(0.0);
    pp.p_base_regress = T(0.0);
  }
  pp.p_infer = task == Task::QUESTION ? inv_logit(eta[mpt::kEtaInfer]) : T(0.0);
  return pp;
}

template <class T>
BasicRtParams<T> rt_params_from_eta(const std::array<T, mpt::kNumLocal>& eta) {
  using gpmix::guarded_exp;
  BasicRtParams<T> rp;
  rp.mu = eta[mpt::kEtaMu];
  rp.sigma1 = guarded_exp(eta[mpt::kEtaLogSigma1]);
  rp.sigma2 = rp.sigma1 + guarded_exp(eta[mpt::kEtaLogSigmaDiff]);
  rp.shift = guarded_exp(eta[mpt::kEtaLogShift]);
  rp.att_cost = guarded_exp(eta[mpt::kEtaLogAtt]);
  rp.gp_cost = guarded_exp(eta[mpt::kEtaLogGp]);
  rp.reanalysis_cost = guarded_exp(eta[mpt::kEtaLogReanalysis]);
  rp.regression_cost = guarded_exp(eta[mpt::kEtaLogRegression]);
  rp.len_slope = eta[mpt::kEtaLenSlope];
  rp.surp_slope = eta[mpt::kEtaSurpSlope];
  return rp;
}

ProcessProbs assemble_process_probs(const ConstrainedParams& cp, const Trial& trial,
                                    std::size_t participant, std::size_t item);
RtParams assemble_rt_params(const ConstrainedParams& cp, const Trial& trial,
                            std::size_t participant, std::size_t item);

/// Log-prior on the coordinate scale. Priors stated on a constrained scale
/// (shift in ms, random-effect SDs, correlation matrices) carry their
/// transform Jacobians. If `grad` is non-empty the gradient is added to it.
double log_prior(const MptLayout& layout, std::span<const double> pv, const PriorConfig& priors,
                 std::span<double> grad = {});

double normal_lpdf(double x, double mean, double sd);
double half_normal_lpdf(double x, double sd);
/// Normal truncated below at zero.
double truncated_normal_lpdf(double x, double mean, double sd);
double log_inv_logit(double x);

}  // namespace gpmix
