// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Criteria 5, 6 and 8 share one simulated recovery dataset
// and its fits, so a full run takes most of an hour on one core.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "../unit/fixtures.hpp"
#include "gpmix/compare.hpp"
#include "gpmix/diagnostics.hpp"
#include "gpmix/kernels.hpp"
#include "gpmix/model.hpp"
#include "gpmix/ppc.hpp"
#include "gpmix/regression.hpp"
#include "gpmix/sampler.hpp"
#include "gpmix/simulate.hpp"

using namespace gpmix;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ProcessProbs random_probs(std::mt19937_64& rng, Paradigm paradigm, Task task) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ProcessProbs pp{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
  if (!regressions_possible(paradigm)) pp.p_overt = pp.p_base_regress = 0.0;
  if (task != Task::QUESTION) pp.p_infer = 0.0;
  return pp;
}

RtParams random_rt(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RtParams rp;
  rp.mu = 5.0 + u(rng);
  rp.sigma1 = 0.2 + 0.3 * u(rng);
  rp.sigma2 = rp.sigma1 + 0.05 + 0.3 * u(rng);
  rp.shift = 100.0 + 100.0 * u(rng);
  rp.att_cost = 0.1 * u(rng);
  rp.gp_cost = 0.2 * u(rng);
  rp.reanalysis_cost = 0.5 * u(rng);
  rp.regression_cost = 0.5 * u(rng);
  rp.len_slope = 0.03 * u(rng);
  return rp;
}

Trial frame(Paradigm paradigm, Task task) {
  Trial t;
  t.paradigm = paradigm;
  t.task = task;
  t.construction = Construction::NPZ;
  t.disamb_type = DisambType::COMMA;
  t.ambiguity = Ambiguity::AMBIGUOUS;
  t.len_crit = 8;
  t.len_spill = 6;
  return t;
}

const std::vector<std::pair<Paradigm, Task>>& all_cells() {
  static const std::vector<std::pair<Paradigm, Task>> cells = [] {
    std::vector<std::pair<Paradigm, Task>> out;
    for (Paradigm p : {Paradigm::ET, Paradigm::SPR, Paradigm::BSPR, Paradigm::MAZE})
      for (Task t : {Task::QUESTION, Task::JUDGMENT, Task::NONE}) out.emplace_back(p, t);
    return out;
  }();
  return cells;
}

// 1. Closed-form question formula against path enumeration.
Verdict tree_formula() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const ProcessProbs pp = random_probs(rng, Paradigm::ET, Task::QUESTION);
    const double enumerated =
        event_probabilities(pp, Paradigm::ET, Task::QUESTION).prob({gpmix::Outcome::BAD, Regression::NO});
    worst = std::max(worst, std::abs(p_yes_no_regress(pp) - enumerated));
  }
  return {worst <= 1e-12, fmt("max |formula - enumeration| = %.3g over 1000 draws", worst)};
}

// 2. Simulated category frequencies against the analytic probabilities.
Verdict generative_consistency() {
  const int n = 1000000;
  std::mt19937_64 prng(202);
  std::size_t checked = 0, failed = 0;
  double worst_z = 0.0;
  for (const auto& [paradigm, task] : all_cells()) {
    const ProcessProbs pp = random_probs(prng, paradigm, task);
    const RtParams rp = random_rt(prng);
    const OutcomeDist dist = event_probabilities(pp, paradigm, task);
    Rng rng(stream_seed(202, static_cast<std::uint64_t>(paradigm), static_cast<std::uint64_t>(task)));
    std::map<std::pair<gpmix::Outcome, Regression>, long> counts;
    const Trial fr = frame(paradigm, task);
    for (int r = 0; r < n; ++r) {
      const SimulatedTrial s = simulate_trial(pp, rp, fr, rng);
      ++counts[{s.trial.outcome, s.trial.regression}];
    }
    for (const auto& [obs, p] : dist.categories) {
      const double freq = static_cast<double>(counts[{obs.outcome, obs.regression}]) / n;
      const double se = std::sqrt(p * (1.0 - p) / n);
      const double z = se > 0 ? std::abs(freq - p) / se : (freq == p ? 0.0 : INFINITY);
      worst_z = std::max(worst_z, z);
      ++checked;
      if (z > 3.0) ++failed;
    }
  }
  return {failed == 0, fmt("%zu categories over %zu paradigm/task cells, 10^6 trials each; max |z| = %.2f",
                           checked, all_cells().size(), worst_z)};
}

// 3. Quadrature mass of the joint trial density.
Verdict normalization() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  int settings = 0;
  const std::pair<Paradigm, Task> cells[] = {{Paradigm::ET, Task::QUESTION},
                                             {Paradigm::SPR, Task::QUESTION},
                                             {Paradigm::BSPR, Task::JUDGMENT},
                                             {Paradigm::MAZE, Task::NONE}};
  for (const auto& [paradigm, task] : cells) {
    for (int rep = 0; rep < 10; ++rep) {
      const RtParams rp = random_rt(rng);
      const ProcessProbs pp = random_probs(rng, paradigm, task);
      worst = std::max(worst, std::abs(testing::joint_mass(frame(paradigm, task), pp, rp, 200) - 1.0));
      ++settings;
    }
  }
  return {worst <= 1e-4, fmt("max |mass - 1| = %.3g over %d settings (10 per paradigm)", worst, settings)};
}

// 4. Analytic gradient against central differences.
Verdict gradient() {
  const auto sim = simulate_dataset(testing::truth_with_surprisal(0.03), testing::small_design(404, 8, 2));
  const TrialSet full = attach_surprisal(sim.trials, sim.surprisal);
  std::vector<Trial> first(full.trials().begin(), full.trials().begin() + 50);
  const TrialSet ts(first);
  double worst = 0.0;
  for (ModelKind kind : {ModelKind::MPT, ModelKind::MPT_PLUS_SURPRISAL, ModelKind::SURPRISAL}) {
    const auto model = make_model(kind, ts);
    std::vector<double> base(model->dim(), 0.0);
    if (is_mpt_family(kind)) {
      const std::size_t n_pop = uses_surprisal(kind) ? mpt::kNumPop : mpt::kNumPop - 1;
      std::copy_n(sim.truth.coordinates.begin(), n_pop, base.begin());
    } else {
      base[reg::kRtIntercept] = 6.0;
    }
    for (std::uint64_t rep = 0; rep < 5; ++rep) {
      const auto x = testing::jitter(base, 0.3, 4040 + rep);
      std::vector<double> g(x.size());
      log_posterior(x, ts, kind, {}, g);
      std::vector<double> xp = x;
      for (std::size_t k = 0; k < x.size(); ++k) {
        const double h = 1e-5;
        xp[k] = x[k] + h;
        const double up = log_posterior(xp, ts, kind);
        xp[k] = x[k] - h;
        const double down = log_posterior(xp, ts, kind);
        xp[k] = x[k];
        worst = std::max(worst, testing::rel_err(g[k], (up - down) / (2 * h)));
      }
    }
  }
  return {worst <= 1e-4, fmt("max relative error %.3g (50 trials, 5 points, MPT/hybrid/surprisal)", worst)};
}

struct RecoveryRun {
  SimulationResult sim;
  TrialSet data;  // with surprisal attached
  PosteriorDraws mpt;
  double mpt_seconds = 0.0;
};

RecoveryRun& recovery() {
  static RecoveryRun run = [] {
    RecoveryRun r;
    r.sim = simulate_dataset(reference_parameters(), recovery_design(505));
    r.data = attach_surprisal(r.sim.trials, r.sim.surprisal);
    const auto model = make_model(ModelKind::MPT, r.data);
    SamplerConfig cfg;  // 2 chains x 2000 iterations, 1000 warmup
    cfg.seed = 505;
    const auto t0 = Clock::now();
    r.mpt = run_chains(*model, cfg);
    r.mpt_seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

// 5. Parameter recovery.
Verdict parameter_recovery() {
  const RecoveryRun& r = recovery();
  const Diagnostics d = diagnostics(r.mpt);
  const std::size_t top = r.sim.truth.n_top_level;
  std::size_t covered = 0;
  std::string missed;
  for (std::size_t k = 0; k < top; ++k) {
    auto col = r.mpt.column(k);
    std::sort(col.begin(), col.end());
    const double lo = quantile_sorted(col, 0.025), hi = quantile_sorted(col, 0.975);
    const double truth = r.sim.truth.coordinates[k];
    if (truth >= lo && truth <= hi) {
      ++covered;
    } else {
      missed += (missed.empty() ? "" : ",") + r.mpt.names[k];
    }
  }
  const double share = static_cast<double>(covered) / static_cast<double>(top);
  const bool rhat_ok = d.n_degenerate == 0 && d.max_rhat < 1.05;
  return {rhat_ok && share >= 0.8,
          fmt("%zu trials, max R-hat %.4f over %zu parameters, %zu divergences, %zu/%zu truths in 95%% CrI "
              "(missed: %s), fit %.0f s",
              r.data.size(), d.max_rhat, d.params.size(), static_cast<std::size_t>(d.n_divergent), covered,
              top, missed.empty() ? "none" : missed.c_str(), r.mpt_seconds)};
}

// 6. Model comparison direction on the recovery data.
Verdict model_comparison() {
  const RecoveryRun& r = recovery();
  SamplerConfig cfg;
  cfg.seed = 606;
  const auto mpt_model = make_model(ModelKind::MPT, r.data);
  const auto surp_model = make_model(ModelKind::SURPRISAL, r.data);
  const auto hybrid_model = make_model(ModelKind::MPT_PLUS_SURPRISAL, r.data);
  const PosteriorDraws surp = run_chains(*surp_model, cfg);
  const auto t0 = Clock::now();
  const PosteriorDraws hybrid = run_chains(*hybrid_model, cfg);
  const double hybrid_seconds = seconds_since(t0);
  const LooResult loo_mpt = psis_loo(pointwise_loglik(r.mpt, *mpt_model));
  const LooResult loo_surp = psis_loo(pointwise_loglik(surp, *surp_model));
  const LooResult loo_hybrid = psis_loo(pointwise_loglik(hybrid, *hybrid_model));
  const ElpdDiff a = elpd_diff(loo_mpt, loo_surp);
  const ElpdDiff b = elpd_diff(loo_hybrid, loo_mpt);
  return {a.diff > 4.0 * a.se && b.diff >= -2.0 * b.se,
          fmt("elpd(MPT - SURPRISAL) = %.1f (SE %.1f); elpd(MPT+SURPRISAL - MPT) = %.1f (SE %.1f); "
              "high-k trials %zu/%zu/%zu; hybrid fit %.0f s",
              a.diff, a.se, b.diff, b.se, loo_mpt.n_high_k(), loo_surp.n_high_k(), loo_hybrid.n_high_k(),
              hybrid_seconds)};
}

// 7. PSIS-LOO against exact leave-one-out, and GPD shape recovery.
Verdict psis_validity() {
  std::mt19937_64 rng(707);
  std::normal_distribution<double> z(0.4, 1.1);
  std::vector<double> y(200);
  for (double& v : y) v = z(rng);
  const ConjugateNormalModel model(y, 1.1, 0.0, 2.0);
  SamplerConfig cfg;
  cfg.n_chains = 4;
  cfg.seed = 707;
  const LooResult loo = psis_loo(pointwise_loglik(run_chains(model, cfg), model));
  double exact = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) exact += model.exact_loo_point(i);
  const bool loo_ok = std::abs(loo.elpd_hat - exact) <= 2.0 * loo.se;

  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool k_ok = true;
  std::string ks;
  for (double k_true : {0.0, 0.2, 0.5}) {
    std::vector<double> tail(2000);
    for (double& v : tail) {
      const double w = 1.0 - u(rng);
      v = k_true == 0.0 ? -std::log(w) : (std::pow(w, -k_true) - 1.0) / k_true;
    }
    std::sort(tail.begin(), tail.end());
    const double k_hat = gpd_fit(tail).k;
    k_ok = k_ok && std::abs(k_hat - k_true) <= 0.1;
    ks += fmt(" k=%.1f->%.3f", k_true, k_hat);
  }
  return {loo_ok && k_ok, fmt("PSIS %.2f vs exact %.2f (SE %.2f);%s", loo.elpd_hat, exact, loo.se, ks.c_str())};
}

// 8. Posterior predictive calibration on the recovery fit.
Verdict ppc_calibration() {
  const RecoveryRun& r = recovery();
  const auto reps = replicate(r.mpt, r.data, false, kDefaultReplicates, 808);
  const ProportionTable table = trial_type_table(r.data, reps);
  const double cov = table.coverage();
  return {cov >= 0.9, fmt("%.1f%% of %zu cells inside 95%% predictive intervals (%zu replicates)", 100.0 * cov,
                          table.rows.size(), reps.size())};
}

// 9. Constraint enforcement under random coordinates.
Verdict constraint_fuzz() {
  const MptLayout layout(true, 3, 3);
  std::mt19937_64 rng(909);
  std::normal_distribution<double> z(0.0, 3.0);
  std::size_t violations = 0;
  std::vector<double> x(layout.dim());
  for (int rep = 0; rep < 10000; ++rep) {
    for (double& v : x) v = z(rng);
    const ConstrainedParams cp = transform(layout, x).cp;
    for (const auto& [paradigm, task] : all_cells()) {
      for (std::size_t p = 0; p < 3; ++p) {
        const Trial t = frame(paradigm, task);
        const ProcessProbs pp = assemble_process_probs(cp, t, p, p);
        const RtParams rp = assemble_rt_params(cp, t, p, p);
        bool ok = rp.sigma1 < rp.sigma2 && rp.att_cost > 0 && rp.gp_cost > 0 && rp.reanalysis_cost > 0 &&
                  rp.regression_cost > 0 && rp.shift > 0;
        for (double q : {pp.p_attentive, pp.p_gp, pp.p_overt, pp.p_postpone, pp.p_success_o, pp.p_success_c,
                         pp.p_infer, pp.p_base_regress}) {
          ok = ok && q >= 0.0 && q <= 1.0;
        }
        if (!regressions_possible(paradigm)) ok = ok && pp.p_overt == 0.0 && pp.p_base_regress == 0.0;
        if (!ok) ++violations;
      }
    }
  }
  return {violations == 0, fmt("%zu violations over 10^4 coordinate vectors x %zu cells x 3 participants",
                               violations, all_cells().size())};
}

}  // namespace

// Optional arguments select criteria by number; no arguments runs all nine.
int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"tree/formula equivalence", tree_formula},
      {"generative consistency", generative_consistency},
      {"likelihood normalization", normalization},
      {"gradient correctness", gradient},
      {"parameter recovery", parameter_recovery},
      {"model-comparison direction", model_comparison},
      {"PSIS-LOO validity", psis_validity},
      {"PPC calibration", ppc_calibration},
      {"constraint enforcement", constraint_fuzz},
  };
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const int c = std::atoi(argv[a]);
    if (c < 1 || c > static_cast<int>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion '%s'\n", argv[a]);
      return 2;
    }
    selected[static_cast<std::size_t>(c - 1)] = true;
  }
  int failures = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (!selected[c]) continue;
    const auto t0 = Clock::now();
    Verdict o;
    try {
      o = criteria[c].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c + 1, criteria[c].first,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
