#include "gpmix/compare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "gpmix/regression.hpp"
#include "json.hpp"

namespace gpmix {

std::unique_ptr<Model> make_model(ModelKind kind, const TrialSet& ts, const PriorConfig& priors,
                                  Execution exec) {
  switch (kind) {
    case ModelKind::BASELINE:
      return std::make_unique<RegressionModel>(ts, false, priors);
    case ModelKind::SURPRISAL:
      return std::make_unique<RegressionModel>(ts, true, priors);
    case ModelKind::MPT:
      return std::make_unique<MptModel>(ts, false, priors, exec);
    case ModelKind::MPT_PLUS_SURPRISAL:
      return std::make_unique<MptModel>(ts, true, priors, exec);
  }
  throw std::invalid_argument("unknown model kind");
}

double log_posterior(std::span<const double> theta, const TrialSet& ts, ModelKind kind,
                     const PriorConfig& priors, std::span<double> grad) {
  const auto model = make_model(kind, ts, priors);
  if (theta.size() != model->dim()) throw std::invalid_argument("coordinate vector has wrong length");
  if (!grad.empty() && grad.size() != model->dim()) throw std::invalid_argument("gradient has wrong length");
  return model->log_density(theta, grad);
}

std::vector<double> LogLikMatrix::column(std::size_t i) const {
  std::vector<double> out(n_draws);
  for (std::size_t s = 0; s < n_draws; ++s) out[s] = (*this)(s, i);
  return out;
}

LogLikMatrix pointwise_loglik(const PosteriorDraws& pd, const Model& model) {
  if (pd.n_params() != model.dim()) {
    throw std::invalid_argument("draws have " + std::to_string(pd.n_params()) +
                                " parameters but the model has " + std::to_string(model.dim()));
  }
  LogLikMatrix m(pd.total_draws(), model.n_obs());
  std::size_t s = 0;
  for (int c = 0; c < pd.n_chains; ++c) {
    for (int d = 0; d < pd.n_draws; ++d, ++s) {
      model.pointwise_loglik(pd.row(c, d), std::span<double>(m.values.data() + s * m.n_trials, m.n_trials));
    }
  }
  return m;
}

double gpd_quantile(double p, double k, double sigma) {
  if (std::abs(k) < 1e-12) return -sigma * std::log1p(-p);
  return sigma * std::expm1(-k * std::log1p(-p)) / k;
}

GpdFit gpd_fit(std::span<const double> exceedances) {
  const std::size_t n = exceedances.size();
  if (n < 5) throw std::invalid_argument("generalized Pareto fit needs at least 5 values");
  std::vector<double> x(exceedances.begin(), exceedances.end());
  std::sort(x.begin(), x.end());
  if (x.front() == x.back()) throw DegenerateSample("all tail values are equal");
  if (x.front() < 0.0) throw std::invalid_argument("exceedances must be non-negative");

  constexpr double kPrior = 3.0;
  constexpr int kMinGrid = 30;
  const std::size_t m = kMinGrid + static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const double xstar = x[static_cast<std::size_t>(std::floor(n / 4.0 + 0.5)) - 1];
  const double dn = static_cast<double>(n);

  std::vector<double> theta(m), ltheta(m);
  for (std::size_t j = 0; j < m; ++j) {
    theta[j] = 1.0 / x.back() + (1.0 - std::sqrt(static_cast<double>(m) / (j + 0.5))) / kPrior / xstar;
    double kk = 0.0;
    for (double v : x) kk += std::log1p(-theta[j] * v);
    kk /= dn;
    ltheta[j] = dn * (std::log(-theta[j] / kk) - kk - 1.0);
  }
  const double lmax = *std::max_element(ltheta.begin(), ltheta.end());
  double wsum = 0.0;
  for (double l : ltheta) wsum += std::exp(l - lmax);
  double theta_hat = 0.0;
  for (std::size_t j = 0; j < m; ++j) theta_hat += theta[j] * std::exp(ltheta[j] - lmax) / wsum;

  double k = 0.0;
  for (double v : x) k += std::log1p(-theta_hat * v);
  k /= dn;
  const double sigma = -k / theta_hat;
  k = (k * dn + 0.5 * 10.0) / (dn + 10.0);
  return {k, sigma};
}

namespace {

double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

std::vector<double> psis_log_weights(std::span<const double> loglik, double* k_out) {
  const std::size_t n = loglik.size();
  std::vector<double> lw(n);
  for (std::size_t s = 0; s < n; ++s) lw[s] = -loglik[s];
  const double mx = *std::max_element(lw.begin(), lw.end());
  for (double& v : lw) v -= mx;

  const double ds = static_cast<double>(n);
  const auto tail_len = static_cast<std::size_t>(std::ceil(std::min(0.2 * ds, 3.0 * std::sqrt(ds))));
  double k = std::numeric_limits<double>::quiet_NaN();
  if (tail_len >= 5 && tail_len < n) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lw[a] < lw[b]; });
    const double cutoff = lw[order[n - tail_len - 1]];
    const double max_lw = lw[order[n - 1]];
    if (max_lw > cutoff) {
      std::vector<double> exceed(tail_len);
      const double ec = std::exp(cutoff);
      for (std::size_t j = 0; j < tail_len; ++j) exceed[j] = std::exp(lw[order[n - tail_len + j]]) - ec;
      try {
        const GpdFit fit = gpd_fit(exceed);
        k = fit.k;
        if (std::isfinite(k)) {
          for (std::size_t j = 0; j < tail_len; ++j) {
            const double p = (static_cast<double>(j) + 0.5) / static_cast<double>(tail_len);
            const double q = std::log(gpd_quantile(p, fit.k, fit.sigma) + ec);
            lw[order[n - tail_len + j]] = std::min(q, max_lw);
          }
        }
      } catch (const DegenerateSample&) {
        k = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  // Truncate at S^(3/4) times the mean weight, then normalize.
  double lse = log_sum_exp(lw);
  const double cap = 0.75 * std::log(ds) + lse - std::log(ds);
  for (double& v : lw) v = std::min(v, cap);
  lse = log_sum_exp(lw);
  for (double& v : lw) v -= lse;
  if (k_out) *k_out = k;
  return lw;
}

std::size_t LooResult::n_high_k() const {
  return static_cast<std::size_t>(std::count(k_flag.begin(), k_flag.end(), KFlag::High));
}
std::size_t LooResult::n_degenerate() const {
  return static_cast<std::size_t>(std::count(k_flag.begin(), k_flag.end(), KFlag::Degenerate));
}

std::string LooResult::to_json() const {
  nlohmann::ordered_json j;
  j["elpd_loo"] = elpd_hat;
  j["se"] = se;
  j["n_trials"] = pointwise.size();
  j["pareto_k_threshold"] = kParetoKThreshold;
  j["n_high_k"] = n_high_k();
  j["n_degenerate_k"] = n_degenerate();
  j["pointwise_elpd"] = pointwise;
  nlohmann::ordered_json ks = nlohmann::ordered_json::array();
  for (double k : pareto_k) {
    if (std::isfinite(k)) ks.push_back(k); else ks.push_back(nullptr);
  }
  j["pareto_k"] = ks;
  return j.dump(2) + "\n";
}

LooResult psis_loo(const LogLikMatrix& ll) {
  if (ll.n_draws < 100) throw std::invalid_argument("PSIS-LOO needs at least 100 draws");
  if (!std::all_of(ll.values.begin(), ll.values.end(), [](double v) { return std::isfinite(v); })) {
    throw std::invalid_argument("log-likelihood matrix contains non-finite values");
  }
  LooResult r;
  const std::size_t n = ll.n_trials;
  r.pointwise.resize(n);
  r.pareto_k.resize(n);
  r.k_flag.resize(n);
  const auto ni = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t ii = 0; ii < ni; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const std::vector<double> col = ll.column(i);
    double k = 0.0;
    std::vector<double> lw = psis_log_weights(col, &k);
    for (std::size_t s = 0; s < col.size(); ++s) lw[s] += col[s];
    r.pointwise[i] = log_sum_exp(lw);
    r.pareto_k[i] = k;
    r.k_flag[i] = !std::isfinite(k) ? KFlag::Degenerate : (k > kParetoKThreshold ? KFlag::High : KFlag::Ok);
  }
  r.elpd_hat = std::accumulate(r.pointwise.begin(), r.pointwise.end(), 0.0);
  if (n > 1) {
    const double mean = r.elpd_hat / static_cast<double>(n);
    double ss = 0.0;
    for (double v : r.pointwise) ss += (v - mean) * (v - mean);
    r.se = std::sqrt(static_cast<double>(n) * ss / static_cast<double>(n - 1));
  }
  return r;
}

ElpdDiff elpd_diff(const LooResult& a, const LooResult& b) {
  const std::size_t n = a.pointwise.size();
  if (n != b.pointwise.size()) throw std::invalid_argument("LOO results cover different numbers of trials");
  ElpdDiff d;
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a.pointwise[i] - b.pointwise[i];
  d.diff = std::accumulate(diff.begin(), diff.end(), 0.0);
  if (n > 1) {
    const double mean = d.diff / static_cast<double>(n);
    double ss = 0.0;
    for (double v : diff) ss += (v - mean) * (v - mean);
    d.se = std::sqrt(static_cast<double>(n) * ss / static_cast<double>(n - 1));
  }
  return d;
}

}  // namespace gpmix
