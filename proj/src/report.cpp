#include "gpmix/report.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>

#include "gpmix/csv.hpp"
#include "gpmix/data.hpp"
#include "gpmix/diagnostics.hpp"
#include "gpmix/hier.hpp"
#include "gpmix/regression.hpp"
#include "gpmix/rtmix.hpp"
#include "gpmix/simulate.hpp"

namespace gpmix {

namespace {

std::optional<std::size_t> find_name(const PosteriorDraws& pd, std::string_view name) {
  const auto it = std::find(pd.names.begin(), pd.names.end(), name);
  if (it == pd.names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - pd.names.begin());
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

ReportRow summarize(std::string parameter, std::string scale, std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return {std::move(parameter), std::move(scale), quantile_sorted(values, 0.025),
          quantile_sorted(values, 0.5), quantile_sorted(values, 0.975)};
}

bool is_top_level(std::string_view name) {
  return !starts_with(name, "z_") && !starts_with(name, "cpc_");
}

ReportRow generic_row(const PosteriorDraws& pd, std::size_t k) {
  const std::string& name = pd.names[k];
  std::vector<double> col = pd.column(k);
  if (starts_with(name, "logit_")) {
    for (double& v : col) v = inv_logit(v);
    return summarize(name.substr(6), "probability", std::move(col));
  }
  if (starts_with(name, "log_")) {
    for (double& v : col) v = std::exp(v);
    return summarize(name.substr(4), "positive", std::move(col));
  }
  return summarize(name, "identity", std::move(col));
}

void require(const PosteriorDraws& pd, const std::vector<std::string>& names) {
  for (const auto& n : names) {
    if (!find_name(pd, n)) throw DataError("draws lack parameter " + n);
  }
}

}  // namespace

std::vector<ReportRow> report_table(const PosteriorDraws& pd) {
  if (pd.total_draws() == 0) throw DataError("draws file has no draws");
  const bool mpt = find_name(pd, mpt::pop_name(mpt::kLogitAttentive)).has_value() ||
                   find_name(pd, mpt::pop_name(mpt::kMu)).has_value();
  const bool regression = find_name(pd, "rt_intercept").has_value();
  if (mpt) {
    std::vector<std::string> need;
    for (int k = 0; k < mpt::kSurpSlope; ++k) need.emplace_back(mpt::pop_name(k));
    require(pd, need);
  } else if (regression) {
    const RegressionModel probe(TrialSet{}, false);
    auto need = probe.names();
    require(pd, need);
  } else {
    throw DataError("draws contain neither MPT nor regression parameters");
  }

  std::vector<ReportRow> rows;
  for (std::size_t k = 0; k < pd.n_params(); ++k) {
    if (is_top_level(pd.names[k])) rows.push_back(generic_row(pd, k));
  }
  if (!mpt) return rows;

  auto idx = [&](int k) { return *find_name(pd, mpt::pop_name(k)); };
  const std::size_t n = pd.total_draws();
  std::vector<double> sigma2(n);
  std::array<std::vector<double>, 4> med_diff, mean_diff;
  for (auto& v : med_diff) v.resize(n);
  for (auto& v : mean_diff) v.resize(n);
  std::size_t s = 0;
  for (int c = 0; c < pd.n_chains; ++c) {
    for (int d = 0; d < pd.n_draws; ++d, ++s) {
      auto x = [&](int k) { return pd.at(c, d, idx(k)); };
      RtParams rp;
      rp.mu = x(mpt::kMu);
      rp.sigma1 = guarded_exp(x(mpt::kLogSigma1));
      rp.sigma2 = rp.sigma1 + guarded_exp(x(mpt::kLogSigmaDiff));
      rp.shift = guarded_exp(x(mpt::kLogShift));
      rp.att_cost = guarded_exp(x(mpt::kLogAttCost));
      rp.gp_cost = guarded_exp(x(mpt::kLogGpCost));
      rp.reanalysis_cost = guarded_exp(x(mpt::kLogReanalysisCost));
      rp.regression_cost = guarded_exp(x(mpt::kLogRegressionCost));
      rp.len_slope = x(mpt::kLenSlope);
      sigma2[s] = rp.sigma2;
      auto med = [&](Component cc) { return comp_median({cc, false}, rp, kReferenceLength); };
      auto mean = [&](Component cc) { return comp_mean({cc, false}, rp, kReferenceLength); };
      const std::array<std::pair<Component, Component>, 4> pairs = {{{Component::C2, Component::C1},
                                                                     {Component::C3, Component::C2},
                                                                     {Component::C4, Component::C3},
                                                                     {Component::C5, Component::C3}}};
      for (std::size_t j = 0; j < pairs.size(); ++j) {
        med_diff[j][s] = med(pairs[j].first) - med(pairs[j].second);
        mean_diff[j][s] = mean(pairs[j].first) - mean(pairs[j].second);
      }
    }
  }
  rows.push_back(summarize("sigma2", "positive", sigma2));
  const std::array<const char*, 4> costs = {"att_cost", "gp_cost", "reanalysis_cost", "regression_cost"};
  for (std::size_t j = 0; j < costs.size(); ++j) {
    rows.push_back(summarize(std::string(costs[j]) + "_ms", "ms_median", med_diff[j]));
    rows.push_back(summarize(std::string(costs[j]) + "_ms", "ms_mean", mean_diff[j]));
  }
  return rows;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "parameter,scale,lower_95,median,upper_95\n";
  for (const auto& r : rows) {
    out += r.parameter + ',' + r.scale + ',' + csv::format_double(r.lo) + ',' +
           csv::format_double(r.median) + ',' + csv::format_double(r.hi) + '\n';
  }
  return out;
}

}  // namespace gpmix
