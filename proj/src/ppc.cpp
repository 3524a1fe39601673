#include "gpmix/ppc.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "gpmix/diagnostics.hpp"
#include "gpmix/hier.hpp"
#include "gpmix/simulate.hpp"

namespace gpmix {

std::vector<TrialSet> replicate(const PosteriorDraws& pd, const TrialSet& ts, bool with_surprisal,
                                std::size_t n_reps, std::uint64_t seed) {
  const MptLayout layout(with_surprisal, ts.n_participants(), ts.n_items());
  if (pd.n_params() != layout.dim()) {
    throw std::invalid_argument("draws have " + std::to_string(pd.n_params()) +
                                " parameters, the dataset needs " + std::to_string(layout.dim()));
  }
  if (pd.total_draws() == 0) throw std::invalid_argument("no posterior draws to replicate from");
  if (n_reps == 0) throw std::invalid_argument("number of replicates must be positive");

  const std::size_t total = pd.total_draws();
  std::vector<TrialSet> out(n_reps);
  const auto nr = static_cast<std::ptrdiff_t>(n_reps);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t r = 0; r < nr; ++r) {
    const std::size_t s = static_cast<std::size_t>(r) * total / n_reps;
    const int chain = static_cast<int>(s / static_cast<std::size_t>(pd.n_draws));
    const int draw = static_cast<int>(s % static_cast<std::size_t>(pd.n_draws));
    const ConstrainedParams cp = transform(layout, pd.row(chain, draw)).cp;
    out[static_cast<std::size_t>(r)] =
        simulate_on_frame(cp, ts, stream_seed(seed, 5, static_cast<std::uint64_t>(r)));
  }
  return out;
}

double ProportionTable::coverage() const {
  if (rows.empty()) return 0.0;
  std::size_t in = 0;
  for (const auto& r : rows) in += r.covered() ? 1 : 0;
  return static_cast<double>(in) / static_cast<double>(rows.size());
}

std::string ProportionTable::to_csv() const {
  std::ostringstream os;
  os << "study,condition,trial_type,observed,pred_mean,pred_lo,pred_hi\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g", r.observed, r.pred_mean, r.pred_lo, r.pred_hi);
    os << r.study_id << ',' << r.condition << ',' << to_string(r.trial_type) << ',' << buf << '\n';
  }
  return os.str();
}

ProportionTable trial_type_table(const TrialSet& observed, const std::vector<TrialSet>& replicates) {
  if (replicates.empty()) throw std::invalid_argument("no replicated datasets");
  const DatasetSummary obs = summarize_dataset(observed);
  std::vector<DatasetSummary> reps;
  reps.reserve(replicates.size());
  for (const auto& r : replicates) {
    reps.push_back(summarize_dataset(r));
    if (reps.back().cells.size() != obs.cells.size()) {
      throw std::invalid_argument("replicate has different study/condition cells than the observed data");
    }
  }
  ProportionTable table;
  for (std::size_t c = 0; c < obs.cells.size(); ++c) {
    const CellSummary& cell = obs.cells[c];
    for (const auto& rs : reps) {
      if (rs.cells[c].study_id != cell.study_id || rs.cells[c].condition != cell.condition ||
          rs.cells[c].n_trials != cell.n_trials) {
        throw std::invalid_argument("replicate cells do not line up with the observed cells");
      }
    }
    if (cell.n_classified == 0) {
      table.empty_cells.push_back(cell.study_id + "/" + cell.condition);
      continue;
    }
    for (TrialType type : kAllTrialTypes) {
      if (!trial_type_possible(cell.paradigm, cell.task, type)) continue;
      const auto k = static_cast<std::size_t>(type);
      std::vector<double> pred;
      pred.reserve(reps.size());
      double sum = 0.0;
      for (const auto& rs : reps) {
        pred.push_back(rs.cells[c].type_proportions[k]);
        sum += pred.back();
      }
      ProportionRow row;
      row.study_id = cell.study_id;
      row.condition = cell.condition;
      row.trial_type = type;
      row.observed = cell.type_proportions[k];
      row.pred_mean = sum / static_cast<double>(pred.size());
      std::sort(pred.begin(), pred.end());
      row.pred_lo = quantile_sorted(pred, 0.025);
      row.pred_hi = quantile_sorted(pred, 0.975);
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

}  // namespace gpmix
