#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "gpmix/diagnostics.hpp"
#include "gpmix/model.hpp"
#include "gpmix/sampler.hpp"

using namespace gpmix;

namespace {

ConjugateNormalModel conjugate_model() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(1.5, 2.0);
  std::vector<double> y(40);
  for (double& v : y) v = n(rng);
  return ConjugateNormalModel(y, 2.0, 0.0, 3.0);
}

/// Independent normals on very different scales.
class ScaledNormal final : public Model {
 public:
  explicit ScaledNormal(std::vector<double> sd) : sd_(std::move(sd)) {}
  std::size_t dim() const override { return sd_.size(); }
  std::vector<std::string> names() const override {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < sd_.size(); ++k) out.push_back("x" + std::to_string(k));
    return out;
  }
  double log_density(std::span<const double> x, std::span<double> g) const override {
    double lp = 0.0;
    for (std::size_t k = 0; k < sd_.size(); ++k) {
      const double z = x[k] / sd_[k];
      lp -= 0.5 * z * z;
      if (!g.empty()) g[k] = -z / sd_[k];
    }
    return lp;
  }
  std::size_t n_obs() const override { return 0; }
  void pointwise_loglik(std::span<const double>, std::span<double>) const override {}

 private:
  std::vector<double> sd_;
};

/// Rejects every point.
class Nowhere final : public Model {
 public:
  std::size_t dim() const override { return 2; }
  std::vector<std::string> names() const override { return {"a", "b"}; }
  double log_density(std::span<const double>, std::span<double> g) const override {
    std::fill(g.begin(), g.end(), 0.0);
    return -std::numeric_limits<double>::infinity();
  }
  std::size_t n_obs() const override { return 0; }
  void pointwise_loglik(std::span<const double>, std::span<double>) const override {}
  std::string rejection_reason(std::span<const double>) const override { return "shift above minimum rt"; }
};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Two-sided Kolmogorov-Smirnov statistic against Normal(m, s).
double ks_statistic(std::vector<double> x, double m, double s) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf((x[i] - m) / s);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

}  // namespace

TEST_CASE("conjugate posterior mean within three Monte Carlo standard errors") {
  const auto model = conjugate_model();
  SamplerConfig cfg;
  cfg.n_chains = 4;
  cfg.n_iter = 2000;
  cfg.n_warmup = 1000;
  cfg.seed = 21;
  const PosteriorDraws pd = run_chains(model, cfg);
  const auto col = pd.column(0);
  double mean = 0.0;
  for (double v : col) mean += v;
  mean /= static_cast<double>(col.size());
  const Diagnostics d = diagnostics(pd);
  const double mcse = model.posterior_sd() / std::sqrt(d.params[0].ess_bulk);
  CHECK(std::abs(mean - model.posterior_mean()) < 3.0 * mcse);
  CHECK(d.params[0].rhat < 1.01);
  CHECK(pd.n_divergent() == 0);
}

TEST_CASE("draws pass a Kolmogorov-Smirnov test against the exact posterior") {
  const auto model = conjugate_model();
  SamplerConfig cfg;
  cfg.n_chains = 1;
  cfg.n_iter = 3000;
  cfg.n_warmup = 1000;
  cfg.seed = 4;
  const PosteriorDraws pd = run_chains(model, cfg);
  REQUIRE(pd.total_draws() == 2000);
  const double d = ks_statistic(pd.column(0), model.posterior_mean(), model.posterior_sd());
  // critical value at alpha = 0.01
  CHECK(d < 1.6276 / std::sqrt(2000.0));
}

TEST_CASE("metric adaptation handles badly scaled targets") {
  const ScaledNormal model({0.01, 1.0, 100.0});
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iter = 1500;
  cfg.n_warmup = 750;
  cfg.seed = 8;
  const PosteriorDraws pd = run_chains(model, cfg);
  CHECK(pd.n_divergent() == 0);
  const std::vector<double> sd = {0.01, 1.0, 100.0};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto col = pd.column(k);
    double m = 0.0, ss = 0.0;
    for (double v : col) m += v;
    m /= static_cast<double>(col.size());
    for (double v : col) ss += (v - m) * (v - m);
    const double s = std::sqrt(ss / static_cast<double>(col.size() - 1));
    CHECK(s == doctest::Approx(sd[k]).epsilon(0.15));
    CHECK(pd.stats[0].inv_metric[k] == doctest::Approx(sd[k] * sd[k]).epsilon(0.5));
  }
  for (const ChainStats& s : pd.stats) {
    double mean_accept = 0.0;
    for (double a : s.accept_stat) mean_accept += a;
    mean_accept /= static_cast<double>(s.accept_stat.size());
    CHECK(mean_accept > 0.6);
  }
}

TEST_CASE("same seed gives bitwise identical draws") {
  const auto model = conjugate_model();
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iter = 300;
  cfg.n_warmup = 150;
  cfg.seed = 77;
  const PosteriorDraws a = run_chains(model, cfg);
  cfg.n_threads = 1;
  const PosteriorDraws b = run_chains(model, cfg);
  CHECK(a.values == b.values);
  CHECK(a.stats[1].energy == b.stats[1].energy);
  cfg.seed = 78;
  CHECK(run_chains(model, cfg).values != a.values);
}

TEST_CASE("chains differ from one another") {
  const auto model = conjugate_model();
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_iter = 200;
  cfg.n_warmup = 100;
  const PosteriorDraws pd = run_chains(model, cfg);
  CHECK(pd.at(0, 0, 0) != pd.at(1, 0, 0));
  CHECK(pd.stats.size() == 2);
  CHECK(pd.stats[0].lp.size() == 100);
}

TEST_CASE("no finite starting point is a sampler error naming the constraint") {
  SamplerConfig cfg;
  cfg.n_iter = 20;
  cfg.n_warmup = 10;
  try {
    run_chains(Nowhere{}, cfg);
    FAIL("expected SamplerError");
  } catch (const SamplerError& e) {
    CHECK(std::string(e.what()).find("shift above minimum rt") != std::string::npos);
  }
}

TEST_CASE("configuration validation") {
  SamplerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.n_warmup = cfg.n_iter;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.target_accept = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.n_chains = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.max_depth = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
