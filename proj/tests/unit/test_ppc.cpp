#include <cmath>
#include <map>

#include "doctest.h"
#include "fixtures.hpp"
#include "gpmix/kernels.hpp"
#include "gpmix/ppc.hpp"

using namespace gpmix;
using namespace gpmix::testing;

namespace {

/// Every draw equal to `x`.
PosteriorDraws point_mass(const TrialSet& ts, const std::vector<double>& x, int n_draws = 10) {
  PosteriorDraws pd;
  pd.names = MptModel(ts, false).names();
  pd.n_chains = 2;
  pd.n_draws = n_draws;
  for (int s = 0; s < 2 * n_draws; ++s) pd.values.insert(pd.values.end(), x.begin(), x.end());
  pd.stats.resize(2);
  return pd;
}

std::map<std::pair<std::string, std::string>, double> cell_totals(const ProportionTable& t, double ProportionRow::*field) {
  std::map<std::pair<std::string, std::string>, double> out;
  for (const auto& r : t.rows) out[{r.study_id, r.condition}] += r.*field;
  return out;
}

}  // namespace

TEST_CASE("replicates keep the observed design frame") {
  const auto sim = simulate_dataset(reference_parameters(), small_design(1, 4));
  const auto reps = replicate(point_mass(sim.trials, sim.truth.coordinates), sim.trials, false, 5, 3);
  REQUIRE(reps.size() == 5);
  for (const TrialSet& rep : reps) {
    REQUIRE(rep.size() == sim.trials.size());
    for (std::size_t t = 0; t < rep.size(); ++t) {
      CHECK(rep[t].participant_id == sim.trials[t].participant_id);
      CHECK(rep[t].item_id == sim.trials[t].item_id);
      CHECK(condition_label(rep[t]) == condition_label(sim.trials[t]));
      CHECK(rep[t].paradigm == sim.trials[t].paradigm);
      if (!regressions_possible(rep[t].paradigm)) CHECK(rep[t].regression == Regression::NA);
    }
  }
  CHECK(serialize_trials(reps[0]) != serialize_trials(reps[1]));
}

TEST_CASE("replication is deterministic in the seed") {
  const auto sim = simulate_dataset(reference_parameters(), small_design(2));
  const auto pd = point_mass(sim.trials, sim.truth.coordinates);
  const auto a = replicate(pd, sim.trials, false, 4, 8);
  const auto b = replicate(pd, sim.trials, false, 4, 8);
  for (std::size_t r = 0; r < a.size(); ++r) CHECK(serialize_trials(a[r]) == serialize_trials(b[r]));
}

TEST_CASE("a degenerate posterior replicates the generating distribution") {
  // Pooled trial-type frequencies of replicates from a point-mass posterior
  // against fresh simulations at the same parameter point.
  const auto sim = simulate_dataset(reference_parameters(), small_design(3, 6, 3));
  const auto pd = point_mass(sim.trials, sim.truth.coordinates);
  const auto reps = replicate(pd, sim.trials, false, 300, 1);
  const MptLayout layout(false, sim.trials.n_participants(), sim.trials.n_items());
  const auto cp = transform(layout, sim.truth.coordinates).cp;
  std::array<double, 4> a{}, b{};
  double na = 0, nb = 0;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    for (const Trial& t : reps[r].trials())
      if (auto tt = trial_type_of(t)) { a[static_cast<std::size_t>(*tt)] += 1; na += 1; }
    for (const Trial& t : simulate_on_frame(cp, sim.trials, 1000 + r).trials())
      if (auto tt = trial_type_of(t)) { b[static_cast<std::size_t>(*tt)] += 1; nb += 1; }
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const double pa = a[k] / na, pb = b[k] / nb;
    const double se = std::sqrt(pa * (1 - pa) / na + pb * (1 - pb) / nb);
    CHECK(std::abs(pa - pb) <= 3 * se + 1e-12);
  }
}

TEST_CASE("proportions sum to one within every cell and intervals lie in [0, 1]") {
  const auto sim = simulate_dataset(reference_parameters(), small_design(4, 4));
  const auto reps = replicate(point_mass(sim.trials, sim.truth.coordinates), sim.trials, false, 40, 2);
  const ProportionTable table = trial_type_table(sim.trials, reps);
  REQUIRE_FALSE(table.rows.empty());
  for (const auto& [cell, total] : cell_totals(table, &ProportionRow::observed)) CHECK(std::abs(total - 1.0) < 1e-12);
  for (const auto& [cell, total] : cell_totals(table, &ProportionRow::pred_mean)) CHECK(std::abs(total - 1.0) < 1e-12);
  for (const auto& r : table.rows) {
    CHECK(r.pred_lo >= 0.0);
    CHECK(r.pred_hi <= 1.0);
    CHECK(r.pred_lo <= r.pred_hi);
  }
  // Maze has no task, so its cells are reported rather than tabulated.
  CHECK_FALSE(table.empty_cells.empty());
  for (const auto& cell : table.empty_cells) CHECK(cell.rfind("maze/", 0) == 0);
}

TEST_CASE("the observed column matches a direct tally") {
  const auto sim = simulate_dataset(reference_parameters(), small_design(5, 5));
  const auto reps = replicate(point_mass(sim.trials, sim.truth.coordinates), sim.trials, false, 3, 2);
  const ProportionTable table = trial_type_table(sim.trials, reps);
  std::map<std::tuple<std::string, std::string, TrialType>, double> count;
  std::map<std::pair<std::string, std::string>, double> n;
  for (const Trial& t : sim.trials.trials()) {
    if (auto tt = trial_type_of(t)) {
      count[{t.study_id, condition_label(t), *tt}] += 1;
      n[{t.study_id, condition_label(t)}] += 1;
    }
  }
  for (const auto& r : table.rows) {
    CHECK(r.observed == doctest::Approx(count[{r.study_id, r.condition, r.trial_type}] / n[{r.study_id, r.condition}]));
  }
}

TEST_CASE("a single replicate collapses the interval") {
  const auto sim = simulate_dataset(reference_parameters(), small_design(6));
  const auto reps = replicate(point_mass(sim.trials, sim.truth.coordinates), sim.trials, false, 1, 4);
  const ProportionTable table = trial_type_table(sim.trials, reps);
  const ProportionTable self = trial_type_table(reps[0], reps);
  REQUIRE(table.rows.size() == self.rows.size());
  for (std::size_t k = 0; k < table.rows.size(); ++k) {
    const auto& r = table.rows[k];
    CHECK(r.pred_lo == r.pred_mean);
    CHECK(r.pred_hi == r.pred_mean);
    CHECK(r.pred_mean == self.rows[k].observed);
  }
  CHECK(self.coverage() == 1.0);
}

TEST_CASE("ambiguous NP/Z sentences are rejected more often") {
  DesignSpec ds;
  ds.seed = 7;
  ds.blocks = {{"sap", Paradigm::BSPR, Task::JUDGMENT, 20, 12, 0.0}};
  const auto sim = simulate_dataset(reference_parameters(), ds);
  const auto reps = replicate(point_mass(sim.trials, sim.truth.coordinates), sim.trials, false, 100, 9);
  const ProportionTable table = trial_type_table(sim.trials, reps);
  double amb = -1, unamb = -1;
  for (const auto& r : table.rows) {
    if (r.trial_type != TrialType::BAD_NOREG) continue;
    if (r.condition == "NPZ/COMMA/AMBIGUOUS") amb = r.pred_mean;
    if (r.condition == "NPZ/COMMA/UNAMBIGUOUS") unamb = r.pred_mean;
  }
  REQUIRE(amb >= 0);
  REQUIRE(unamb >= 0);
  CHECK(amb > unamb);
}

TEST_CASE("table CSV and input validation") {
  const auto sim = simulate_dataset(reference_parameters(), small_design(8));
  const auto reps = replicate(point_mass(sim.trials, sim.truth.coordinates), sim.trials, false, 2, 1);
  const std::string csv = trial_type_table(sim.trials, reps).to_csv();
  CHECK(csv.rfind("study,condition,trial_type,observed,pred_mean,pred_lo,pred_hi\n", 0) == 0);
  CHECK_THROWS_AS(trial_type_table(sim.trials, {}), std::invalid_argument);
  std::vector<Trial> shorter = sim.trials.trials();
  shorter.pop_back();
  CHECK_THROWS_AS(trial_type_table(sim.trials, {TrialSet(shorter)}), std::invalid_argument);
  PosteriorDraws bad = point_mass(sim.trials, sim.truth.coordinates);
  bad.names.pop_back();
  CHECK_THROWS(replicate(bad, sim.trials, false, 2, 1));
}
