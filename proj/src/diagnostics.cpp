#include "gpmix/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace gpmix {

namespace {

using Chains = std::vector<std::vector<double>>;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_var(const std::vector<double>& x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

Chains split(const Chains& chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

// Normal scores of fractional ranks, ties sharing their average rank.
Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t s = 0; s < chains[c].size(); ++s) {
      all.emplace_back(chains[c][s], c * chains[0].size() + s);
    }
  }
  std::sort(all.begin(), all.end());
  const double S = static_cast<double>(all.size());
  std::vector<double> rank(all.size());
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) rank[all[k].second] = avg;
    i = j;
  }
  const boost::math::normal_distribution<double> std_normal;
  Chains out = chains;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t s = 0; s < chains[c].size(); ++s) {
      const double r = rank[c * chains[0].size() + s];
      out[c][s] = boost::math::quantile(std_normal, (r - 0.375) / (S + 0.25));
    }
  }
  return out;
}

double rhat_raw(const Chains& chains) {
  const double n = static_cast<double>(chains[0].size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& c : chains) {
    means.push_back(mean(c));
    w += sample_var(c);
  }
  w /= static_cast<double>(chains.size());
  const double b_over_n = sample_var(means);
  const double var_hat = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_hat / w);
}

// Lag-k autocovariance with divisor n.
double autocov(const std::vector<double>& x, double m, std::size_t lag) {
  double s = 0.0;
  for (std::size_t t = 0; t + lag < x.size(); ++t) s += (x[t] - m) * (x[t + lag] - m);
  return s / static_cast<double>(x.size());
}

bool any_constant(const Chains& chains) {
  for (const auto& c : chains) {
    if (std::all_of(c.begin(), c.end(), [&](double v) { return v == c.front(); })) return true;
  }
  return false;
}

}  // namespace

double ess_basic(const Chains& chains) {
  const std::size_t m = chains.size();
  const std::size_t n = chains[0].size();
  if (n < 4 || any_constant(chains)) return kNaN;
  std::vector<double> means(m);
  for (std::size_t c = 0; c < m; ++c) means[c] = mean(chains[c]);
  auto mean_acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += autocov(chains[c], means[c], lag);
    return s / static_cast<double>(m);
  };
  const double nd = static_cast<double>(n);
  const double mean_var = mean_acov(0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += sample_var(means);

  std::vector<double> rho(n + 1, 0.0);
  auto rho_at = [&](std::size_t lag) { return 1.0 - (mean_var - mean_acov(lag)) / var_plus; };
  std::size_t t = 0;
  double even = 1.0;
  rho[0] = even;
  double odd = rho_at(1);
  rho[1] = odd;
  while (t + 5 < n && std::isfinite(even + odd) && even + odd > 0.0) {
    t += 2;
    even = rho_at(t);
    odd = rho_at(t + 1);
    if (even + odd >= 0.0) {
      rho[t] = even;
      rho[t + 1] = odd;
    }
  }
  const std::size_t max_t = t;
  if (even > 0.0) rho[max_t] = even;
  // initial monotone sequence
  for (std::size_t k = 2; k + 2 <= max_t; k += 2) {
    if (rho[k] + rho[k + 1] > rho[k - 2] + rho[k - 1]) {
      rho[k] = 0.5 * (rho[k - 2] + rho[k - 1]);
      rho[k + 1] = rho[k];
    }
  }
  const double total = static_cast<double>(m * n);
  double tau = -1.0 + rho[max_t];
  for (std::size_t k = 0; k < max_t; ++k) tau += 2.0 * rho[k];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

double split_rhat(const Chains& chains) {
  if (chains.empty() || chains[0].size() < 4 || any_constant(chains)) return kNaN;
  const Chains sp = split(chains);
  if (any_constant(sp)) return kNaN;
  const double bulk = rhat_raw(rank_normalize(sp));
  // folded: distance from the pooled median
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  std::nth_element(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(pooled.size() / 2), pooled.end());
  const double med = pooled[pooled.size() / 2];
  Chains folded = sp;
  for (auto& c : folded) {
    for (double& v : c) v = std::abs(v - med);
  }
  const double tail = rhat_raw(rank_normalize(folded));
  // Ranks saturate once chains stop overlapping; the raw split statistic
  // keeps growing with the separation.
  const double classic = rhat_raw(sp);
  return std::max({bulk, tail, classic});
}

double ess_bulk(const Chains& chains) {
  if (chains.empty() || chains[0].size() < 4 || any_constant(chains)) return kNaN;
  return ess_basic(rank_normalize(split(chains)));
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

double ess_tail(const Chains& chains) {
  if (chains.empty() || chains[0].size() < 4 || any_constant(chains)) return kNaN;
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  std::sort(pooled.begin(), pooled.end());
  double out = std::numeric_limits<double>::infinity();
  for (double q : {quantile_sorted(pooled, 0.05), quantile_sorted(pooled, 0.95)}) {
    Chains ind = split(chains);
    for (auto& c : ind) {
      for (double& v : c) v = v <= q ? 1.0 : 0.0;
    }
    const double e = any_constant(ind) ? kNaN : ess_basic(ind);
    if (std::isnan(e)) return kNaN;
    out = std::min(out, e);
  }
  return out;
}

bool Diagnostics::converged(double threshold) const {
  if (n_degenerate > 0) return false;
  return std::all_of(params.begin(), params.end(),
                     [&](const ParamDiagnostics& p) { return p.rhat < threshold; });
}

Diagnostics diagnostics(const PosteriorDraws& pd) {
  Diagnostics d;
  d.n_divergent = pd.n_divergent();
  d.params.resize(pd.n_params());
  const double cap = 1.5 * static_cast<double>(pd.total_draws());
  const bool rhat_ok = pd.n_chains >= 2 && pd.n_draws >= 100;
  const auto n_params = static_cast<std::ptrdiff_t>(pd.n_params());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t k = 0; k < n_params; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    Chains chains(static_cast<std::size_t>(pd.n_chains));
    for (int c = 0; c < pd.n_chains; ++c) {
      chains[static_cast<std::size_t>(c)].resize(static_cast<std::size_t>(pd.n_draws));
      for (int s = 0; s < pd.n_draws; ++s) chains[static_cast<std::size_t>(c)][static_cast<std::size_t>(s)] = pd.at(c, s, uk);
    }
    ParamDiagnostics& p = d.params[uk];
    p.name = pd.names[uk];
    p.degenerate = any_constant(chains);
    p.rhat = rhat_ok && !p.degenerate ? split_rhat(chains) : kNaN;
    p.ess_bulk = p.degenerate ? kNaN : std::min(cap, ess_bulk(chains));
    p.ess_tail = p.degenerate ? kNaN : std::min(cap, ess_tail(chains));
  }
  d.min_ess_bulk = std::numeric_limits<double>::infinity();
  for (const auto& p : d.params) {
    if (p.degenerate) {
      ++d.n_degenerate;
      continue;
    }
    if (std::isfinite(p.rhat)) d.max_rhat = std::max(d.max_rhat, p.rhat);
    if (std::isfinite(p.ess_bulk)) d.min_ess_bulk = std::min(d.min_ess_bulk, p.ess_bulk);
  }
  if (!std::isfinite(d.min_ess_bulk)) d.min_ess_bulk = kNaN;
  return d;
}

}  // namespace gpmix
