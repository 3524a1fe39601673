#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "fixtures.hpp"
#include "gpmix/corr.hpp"
#include "gpmix/hier.hpp"

using namespace gpmix;
using namespace gpmix::mpt;

namespace {

double logit_of(double p) { return std::log(p / (1.0 - p)); }

Trial make_trial(Paradigm paradigm, Task task, Construction c, DisambType d, Ambiguity a) {
  Trial t;
  t.paradigm = paradigm;
  t.task = task;
  t.construction = c;
  t.disamb_type = d;
  t.ambiguity = a;
  t.rt_crit = 400;
  t.rt_spill = 380;
  t.len_crit = 8;
  t.len_spill = 8;
  t.regression = regressions_possible(paradigm) ? Regression::NO : Regression::NA;
  t.outcome = task == Task::NONE ? Outcome::NA : Outcome::GOOD;
  return t;
}

std::vector<double> random_point(const MptLayout& layout, std::uint64_t seed, double sd = 0.7) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  std::vector<double> pv(layout.dim());
  for (double& v : pv) v = n(rng);
  return pv;
}

/// Log |det J| of the coordinate -> constrained image map by central
/// differences.
double numeric_log_volume(const MptLayout& layout, std::vector<double> pv) {
  const std::size_t n = pv.size();
  Eigen::MatrixXd J(n, n);
  const double h = 1e-6;
  for (std::size_t k = 0; k < n; ++k) {
    const double x0 = pv[k];
    pv[k] = x0 + h;
    const auto up = constrained_image(layout, pv);
    pv[k] = x0 - h;
    const auto down = constrained_image(layout, pv);
    pv[k] = x0;
    for (std::size_t r = 0; r < n; ++r) J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = (up[r] - down[r]) / (2 * h);
  }
  return std::log(std::abs(J.fullPivLu().determinant()));
}

double normal_logpdf(double x, double m, double s) {
  return -0.5 * std::pow((x - m) / s, 2) - std::log(s) - 0.5 * std::log(2.0 * M_PI);
}

/// LKJ log-density of the correlation implied by CPCs y, with respect to y:
/// log c + (eta - 1) log det(Omega) + log |d omega / d y|.
template <int K>
double lkj_on_cpc(const std::vector<double>& y, double eta) {
  auto omega_of = [](const std::vector<double>& v) {
    std::array<double, kNumCpc<K>> a{};
    std::copy(v.begin(), v.end(), a.begin());
    const auto L = cholesky_corr_constrain<K, double>(a).L;
    Eigen::Matrix<double, K, K> Lm;
    for (int r = 0; r < K; ++r)
      for (int c = 0; c < K; ++c) Lm(r, c) = L[r * K + c];
    return Eigen::Matrix<double, K, K>(Lm * Lm.transpose());
  };
  const auto omega = omega_of(y);
  constexpr int M = kNumCpc<K>;
  Eigen::Matrix<double, M, M> J;
  std::vector<double> yy = y;
  for (int k = 0; k < M; ++k) {
    const double h = 1e-6;
    yy[k] = y[k] + h;
    const auto up = omega_of(yy);
    yy[k] = y[k] - h;
    const auto dn = omega_of(yy);
    yy[k] = y[k];
    int row = 0;
    for (int r = 1; r < K; ++r)
      for (int c = 0; c < r; ++c) J(row++, k) = (up(r, c) - dn(r, c)) / (2 * h);
  }
  return -lkj_log_normalizer(K, eta) + (eta - 1.0) * std::log(omega.determinant()) +
         std::log(std::abs(J.determinant()));
}

/// Term-by-term prior written out from the documented defaults.
double independent_log_prior(const MptLayout& layout, const std::vector<double>& pv, const PriorConfig& pr) {
  double lp = 0.0;
  for (int k = kLogitAttentive; k <= kLogitBaseRegress; ++k) lp += normal_logpdf(pv[k], 0.0, pr.logit_sd);
  lp += normal_logpdf(pv[kMu], pr.mu_mean, pr.mu_sd);
  lp += normal_logpdf(pv[kLogSigma1], pr.log_sigma1_mean, pr.log_sigma_sd);
  lp += normal_logpdf(pv[kLogSigmaDiff], pr.log_sigma_diff_mean, pr.log_sigma_sd);
  const double shift = std::exp(pv[kLogShift]);
  const double above_zero = 0.5 * std::erfc(-pr.shift_mean / pr.shift_sd / std::sqrt(2.0));
  lp += normal_logpdf(shift, pr.shift_mean, pr.shift_sd) - std::log(above_zero) + pv[kLogShift];
  for (int k = kLogAttCost; k <= kLogRegressionCost; ++k) lp += normal_logpdf(pv[k], pr.log_cost_mean, pr.log_cost_sd);
  lp += normal_logpdf(pv[kLenSlope], 0.0, pr.len_slope_sd);
  for (int k = kBeta1; k <= kBetaAnimacy; ++k) lp += normal_logpdf(pv[k], 0.0, pr.beta_sd);
  lp += normal_logpdf(pv[kLogitEtShift], 0.0, pr.et_logit_sd);
  lp += normal_logpdf(pv[kLogitEtRegressionCost], 0.0, pr.et_logit_sd);
  lp += normal_logpdf(pv[kLogEtOvertSurplus], pr.et_overt_log_mean, pr.et_overt_log_sd);
  if (layout.with_surprisal()) lp += normal_logpdf(pv[kSurpSlope], 0.0, pr.surp_slope_sd);
  auto half = [&](std::size_t idx) {
    const double t = std::exp(pv[idx]);
    return std::log(2.0) + normal_logpdf(t, 0.0, pr.re_scale_sd) + pv[idx];
  };
  for (int e = 0; e < kNumParticipantEffects; ++e) lp += half(layout.log_tau_participant(e));
  for (int e = 0; e < kNumItemEffects; ++e) lp += half(layout.log_tau_item(e));
  std::vector<double> yp(pv.begin() + static_cast<long>(layout.cpc_participant(0)),
                         pv.begin() + static_cast<long>(layout.cpc_participant(0) + kNumParticipantCpc));
  std::vector<double> yi(pv.begin() + static_cast<long>(layout.cpc_item(0)),
                         pv.begin() + static_cast<long>(layout.cpc_item(0) + kNumItemCpc));
  lp += lkj_on_cpc<kNumParticipantEffects>(yp, pr.lkj_eta);
  lp += lkj_on_cpc<kNumItemEffects>(yi, pr.lkj_eta);
  for (std::size_t k = layout.z_participant(0, 0); k < layout.dim(); ++k) lp += normal_logpdf(pv[k], 0.0, 1.0);
  return lp;
}

}  // namespace

TEST_CASE("zero coordinates map to the transform's reference point") {
  const MptLayout layout(false, 3, 2);
  const std::vector<double> pv(layout.dim(), 0.0);
  const ConstrainedParams cp = transform(layout, pv).cp;
  const ProcessProbs& pp = cp.base_probs;
  for (double p : {pp.p_attentive, pp.p_gp, pp.p_overt, pp.p_postpone, pp.p_success_o, pp.p_success_c,
                   pp.p_infer, pp.p_base_regress}) {
    CHECK(p == 0.5);
  }
  for (double v : {cp.rt.shift, cp.rt.sigma1, cp.rt.att_cost, cp.rt.gp_cost, cp.rt.reanalysis_cost,
                   cp.rt.regression_cost, cp.et_overt_surplus}) {
    CHECK(v == 1.0);
  }
  CHECK(cp.rt.sigma2 == 2.0);
  CHECK(cp.et_shift_multiplier == 0.5);
  for (double t : cp.tau_participant) CHECK(t == 1.0);
}

TEST_CASE("inverse transform recovers the coordinates") {
  for (bool ws : {false, true}) {
    const MptLayout layout(ws, 4, 3);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto pv = random_point(layout, seed);
      const auto back = inverse_transform(layout, transform(layout, pv).cp);
      REQUIRE(back.size() == pv.size());
      double worst = 0.0;
      for (std::size_t k = 0; k < pv.size(); ++k) worst = std::max(worst, std::abs(back[k] - pv[k]));
      CHECK(worst < 1e-12);
    }
  }
}

TEST_CASE("log-Jacobian equals the numerical volume element") {
  const MptLayout layout(true, 2, 2);
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const auto pv = random_point(layout, seed, 0.5);
    const double analytic = transform(layout, pv).log_jacobian;
    const double numeric = numeric_log_volume(layout, pv);
    CHECK(testing::rel_err(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("exp coordinates are clamped and counted") {
  const MptLayout layout(false, 1, 1);
  std::vector<double> pv(layout.dim(), 0.0);
  pv[kLogShift] = 500.0;
  const TransformResult r = transform(layout, pv);
  CHECK(r.n_clamped == 1);
  CHECK(r.cp.rt.shift == std::exp(kExpClamp));
}

TEST_CASE("process probabilities assembled per trial") {
  const MptLayout layout(false, 1, 1);
  std::vector<double> pv(layout.dim(), 0.0);
  pv[kLogitGp] = logit_of(0.19);
  pv[kBeta1] = logit_of(0.67) - logit_of(0.19);
  pv[kLogitOvert] = 1.3;
  pv[kLogitBaseRegress] = -0.4;
  const ConstrainedParams cp = transform(layout, pv).cp;
  const Trial unamb = make_trial(Paradigm::BSPR, Task::JUDGMENT, Construction::NPZ, DisambType::COMMA, Ambiguity::UNAMBIGUOUS);
  const Trial amb = make_trial(Paradigm::BSPR, Task::JUDGMENT, Construction::NPZ, DisambType::COMMA, Ambiguity::AMBIGUOUS);
  CHECK(assemble_process_probs(cp, unamb, 0, 0).p_gp == doctest::Approx(0.19).epsilon(1e-12));
  CHECK(assemble_process_probs(cp, amb, 0, 0).p_gp == doctest::Approx(0.67).epsilon(1e-12));
  CHECK(logit_of(0.67) - logit_of(0.19) == doctest::Approx(2.158).epsilon(1e-3));

  const Trial spr = make_trial(Paradigm::SPR, Task::QUESTION, Construction::NPZ, DisambType::COMMA, Ambiguity::AMBIGUOUS);
  const ProcessProbs p_spr = assemble_process_probs(cp, spr, 0, 0);
  CHECK(p_spr.p_overt == 0.0);
  CHECK(p_spr.p_base_regress == 0.0);
  CHECK(assemble_process_probs(cp, amb, 0, 0).p_infer == 0.0);
  CHECK(p_spr.p_infer == 0.5);
}

TEST_CASE("SPR probabilities ignore the regression coordinates") {
  const MptLayout layout(false, 2, 2);
  const Trial spr = make_trial(Paradigm::SPR, Task::JUDGMENT, Construction::MVRR, DisambType::ANIMACY, Ambiguity::AMBIGUOUS);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto pv = random_point(layout, seed);
    const ProcessProbs a = assemble_process_probs(transform(layout, pv).cp, spr, 1, 1);
    pv[kLogitOvert] += 3.0;
    pv[kLogitBaseRegress] -= 2.0;
    pv[kBeta5] += 1.0;
    pv[kLogEtOvertSurplus] += 1.0;
    const ProcessProbs b = assemble_process_probs(transform(layout, pv).cp, spr, 1, 1);
    CHECK(a.p_attentive == b.p_attentive);
    CHECK(a.p_gp == b.p_gp);
    CHECK(a.p_postpone == b.p_postpone);
    CHECK(a.p_success_c == b.p_success_c);
    CHECK(b.p_overt == 0.0);
    CHECK(b.p_base_regress == 0.0);
  }
}

TEST_CASE("beta1 raises garden-pathing only in ambiguous trials") {
  const MptLayout layout(false, 1, 1);
  auto pv = random_point(layout, 3);
  const Trial amb = make_trial(Paradigm::ET, Task::QUESTION, Construction::NPZ, DisambType::COMMA, Ambiguity::AMBIGUOUS);
  const Trial unamb = make_trial(Paradigm::ET, Task::QUESTION, Construction::NPZ, DisambType::COMMA, Ambiguity::UNAMBIGUOUS);
  const auto before = transform(layout, pv).cp;
  pv[kBeta1] += 0.5;
  const auto after = transform(layout, pv).cp;
  CHECK(assemble_process_probs(after, amb, 0, 0).p_gp > assemble_process_probs(before, amb, 0, 0).p_gp);
  CHECK(assemble_process_probs(after, unamb, 0, 0).p_gp == assemble_process_probs(before, unamb, 0, 0).p_gp);
}

TEST_CASE("zero effects give identical probabilities within a paradigm and task") {
  const MptLayout layout(false, 3, 4);
  auto pv = random_point(layout, 8);
  for (int k = kBeta1; k <= kBetaAnimacy; ++k) pv[k] = 0.0;
  for (std::size_t k = layout.z_participant(0, 0); k < layout.dim(); ++k) pv[k] = 0.0;
  const auto cp = transform(layout, pv).cp;
  const Trial a = make_trial(Paradigm::ET, Task::QUESTION, Construction::NPZ, DisambType::COMMA, Ambiguity::AMBIGUOUS);
  const Trial b = make_trial(Paradigm::ET, Task::QUESTION, Construction::MVRR, DisambType::RELATIVE_CLAUSE, Ambiguity::UNAMBIGUOUS);
  const ProcessProbs pa = assemble_process_probs(cp, a, 0, 1);
  const ProcessProbs pb = assemble_process_probs(cp, b, 2, 3);
  CHECK(pa.p_gp == pb.p_gp);
  CHECK(pa.p_success_o == pb.p_success_o);
  CHECK(pa.p_base_regress == pb.p_base_regress);
  CHECK(pa.p_attentive == pb.p_attentive);
}

TEST_CASE("reading-time parameters per paradigm") {
  const MptLayout layout(false, 1, 1);
  std::vector<double> pv(layout.dim(), 0.0);
  pv[kLogShift] = std::log(166.0);
  pv[kLogitEtShift] = 0.0;  // multiplier 0.5
  pv[kLogRegressionCost] = std::log(0.4);
  const auto cp = transform(layout, pv).cp;
  const Trial bspr = make_trial(Paradigm::BSPR, Task::JUDGMENT, Construction::NPZ, DisambType::COMMA, Ambiguity::AMBIGUOUS);
  const Trial et = make_trial(Paradigm::ET, Task::QUESTION, Construction::NPZ, DisambType::COMMA, Ambiguity::AMBIGUOUS);
  CHECK(assemble_rt_params(cp, bspr, 0, 0).shift == doctest::Approx(166.0).epsilon(1e-12));
  CHECK(assemble_rt_params(cp, et, 0, 0).shift == doctest::Approx(83.0).epsilon(1e-12));
  CHECK(assemble_rt_params(cp, et, 0, 0).regression_cost < assemble_rt_params(cp, bspr, 0, 0).regression_cost);
  const RtParams r = assemble_rt_params(cp, bspr, 0, 0);
  CHECK(r.sigma1 < r.sigma2);
}

TEST_CASE("LKJ with eta above one favours the identity") {
  const std::array<double, 4> identity = {1.0, 0.0, 0.0, 1.0};
  const std::array<double, 4> strong = {1.0, 0.0, 0.9, std::sqrt(1.0 - 0.81)};
  CHECK(lkj_corr_cholesky_lpdf<2, double>(identity, 4.0) > lkj_corr_cholesky_lpdf<2, double>(strong, 4.0));
  // 2 x 2 normalizer: integral of (1 - r^2)^(eta - 1) over (-1, 1)
  const double eta = 4.0;
  const double log_int = (2.0 * eta - 1.0) * std::log(2.0) + 2.0 * std::lgamma(eta) - std::lgamma(2.0 * eta);
  CHECK(lkj_log_normalizer(2, eta) == doctest::Approx(log_int).epsilon(1e-14));
}

TEST_CASE("standardized effects contribute standard-normal densities") {
  const MptLayout with_groups(false, 3, 5);
  const MptLayout no_groups(false, 0, 0);
  auto pv = random_point(with_groups, 4);
  for (std::size_t k = with_groups.z_participant(0, 0); k < with_groups.dim(); ++k) pv[k] = 0.0;
  const std::vector<double> head(pv.begin(), pv.begin() + static_cast<long>(no_groups.dim()));
  const double n = 3 * kNumParticipantEffects + 5 * kNumItemEffects;
  CHECK(log_prior(with_groups, pv, {}) - log_prior(no_groups, head, {}) ==
        doctest::Approx(-n * 0.9189385332046727).epsilon(1e-12));
}

TEST_CASE("log prior equals an independent term-by-term recomputation") {
  PriorConfig pr;
  pr.shift_mean = 170.0;
  pr.lkj_eta = 2.5;
  for (bool ws : {false, true}) {
    const MptLayout layout(ws, 2, 3);
    for (std::uint64_t seed = 20; seed < 23; ++seed) {
      auto pv = random_point(layout, seed, 0.5);
      pv[kLogShift] = std::log(160.0) + 0.1 * static_cast<double>(seed - 20);
      const double a = log_prior(layout, pv, pr);
      const double b = independent_log_prior(layout, pv, pr);
      // The LKJ Jacobian term is the only numerically differentiated part.
      CHECK(std::abs(a - b) < 1e-7);
    }
  }
}

TEST_CASE("log prior gradient matches finite differences") {
  const MptLayout layout(true, 2, 2);
  const auto pv = random_point(layout, 30, 0.5);
  std::vector<double> g(layout.dim(), 0.0);
  log_prior(layout, pv, {}, g);
  auto x = pv;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double h = 1e-6;
    x[k] = pv[k] + h;
    const double up = log_prior(layout, x, {});
    x[k] = pv[k] - h;
    const double dn = log_prior(layout, x, {});
    x[k] = pv[k];
    CHECK(testing::rel_err(g[k], (up - dn) / (2 * h)) < 1e-6);
  }
}

TEST_CASE("prior config round trip and validation") {
  PriorConfig pr;
  pr.shift_sd = 42.0;
  pr.lkj_eta = 3.0;
  const PriorConfig back = parse_prior_config(serialize_prior_config(pr));
  CHECK(back.shift_sd == 42.0);
  CHECK(back.lkj_eta == 3.0);
  CHECK(parse_prior_config("# comment\nbeta_sd = 2 # trailing\n").beta_sd == 2.0);
  CHECK_THROWS_AS(parse_prior_config("beta_sd = -1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_prior_config("no_such_key = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_prior_config("beta_sd 1\n"), std::invalid_argument);
}

TEST_CASE("model kind names") {
  CHECK(parse_model_kind("baseline") == ModelKind::BASELINE);
  CHECK(parse_model_kind("mpt") == ModelKind::MPT);
  CHECK(parse_model_kind("surprisal") == ModelKind::SURPRISAL);
  CHECK(parse_model_kind("mpt-surprisal") == ModelKind::MPT_PLUS_SURPRISAL);
  CHECK_FALSE(parse_model_kind("lasso").has_value());
  CHECK(uses_surprisal(ModelKind::MPT_PLUS_SURPRISAL));
  CHECK_FALSE(is_mpt_family(ModelKind::SURPRISAL));
}
