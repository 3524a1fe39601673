#include "gpmix/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <omp.h>

#include "gpmix/simulate.hpp"

namespace gpmix {

void SamplerConfig::validate() const {
  if (n_chains < 1) throw std::invalid_argument("need at least one chain");
  if (n_warmup < 0 || n_warmup >= n_iter) {
    throw std::invalid_argument("warmup must be non-negative and smaller than the iteration count");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw std::invalid_argument("target acceptance must lie in (0, 1)");
  }
  if (max_depth < 1) throw std::invalid_argument("max tree depth must be positive");
  if (n_threads < 0) throw std::invalid_argument("thread count must be non-negative");
}

std::vector<double> PosteriorDraws::column(std::size_t param) const {
  std::vector<double> out;
  out.reserve(total_draws());
  for (int c = 0; c < n_chains; ++c) {
    for (int s = 0; s < n_draws; ++s) out.push_back(at(c, s, param));
  }
  return out;
}

int PosteriorDraws::n_divergent() const {
  int n = 0;
  for (const auto& st : stats) n += static_cast<int>(std::count(st.divergent.begin(), st.divergent.end(), 1));
  return n;
}

namespace {

using Vec = std::vector<double>;

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct PhasePoint {
  Vec q;
  Vec p;
  Vec g;  // gradient of the log density
  double lp = 0.0;
};

class StepSizeAdapter {
 public:
  explicit StepSizeAdapter(double delta) : delta_(delta) {}
  void restart(double eps) {
    mu_ = std::log(10.0 * eps);
    s_bar_ = 0.0;
    x_bar_ = 0.0;
    counter_ = 0;
  }
  double learn(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / kGamma;
    const double x_eta = std::pow(counter_, -kKappa);
    x_bar_ = x_eta * x + (1.0 - x_eta) * x_bar_;
    return std::exp(x);
  }
  double final_step_size() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;
  double delta_;
  double mu_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
  double counter_ = 0.0;
};

// Welford accumulator for the diagonal metric.
class VarianceEstimator {
 public:
  explicit VarianceEstimator(std::size_t n) : mean_(n, 0.0), m2_(n, 0.0) {}
  void restart() {
    count_ = 0;
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(m2_.begin(), m2_.end(), 0.0);
  }
  void add(const Vec& q) {
    ++count_;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double d = q[i] - mean_[i];
      mean_[i] += d / static_cast<double>(count_);
      m2_[i] += d * (q[i] - mean_[i]);
    }
  }
  std::size_t count() const { return count_; }
  Vec variance() const {
    Vec v(m2_.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = m2_[i] / static_cast<double>(count_ - 1);
    return v;
  }

 private:
  std::size_t count_ = 0;
  Vec mean_;
  Vec m2_;
};

// Warmup schedule: an initial fast buffer, doubling slow windows that
// re-estimate the metric, and a terminal fast buffer.
class WindowSchedule {
 public:
  WindowSchedule(int n_warmup) : n_warmup_(n_warmup) {
    if (n_warmup < 20) {
      enabled_ = false;
      return;
    }
    if (kInitBuffer + kBaseWindow + kTermBuffer > n_warmup) {
      init_buffer_ = static_cast<int>(0.15 * n_warmup);
      term_buffer_ = static_cast<int>(0.1 * n_warmup);
      window_size_ = n_warmup - (init_buffer_ + term_buffer_);
    }
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  bool in_window() const {
    return enabled_ && counter_ >= init_buffer_ && counter_ < n_warmup_ - term_buffer_ &&
           counter_ != n_warmup_;
  }
  bool window_ends() const { return enabled_ && counter_ == next_window_ && counter_ != n_warmup_; }
  void advance_window() {
    if (next_window_ == n_warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != n_warmup_ - term_buffer_ - 1) {
      const int boundary = next_window_ + 2 * window_size_;
      if (boundary >= n_warmup_ - term_buffer_) next_window_ = n_warmup_ - term_buffer_ - 1;
    }
  }
  void tick() { ++counter_; }

 private:
  static constexpr int kInitBuffer = 75;
  static constexpr int kTermBuffer = 50;
  static constexpr int kBaseWindow = 25;
  int n_warmup_;
  bool enabled_ = true;
  int init_buffer_ = kInitBuffer;
  int term_buffer_ = kTermBuffer;
  int window_size_ = kBaseWindow;
  int next_window_ = 0;
  int counter_ = 0;
};

class Nuts {
 public:
  Nuts(const Model& model, Rng& rng, int max_depth)
      : model_(model), rng_(rng), max_depth_(max_depth), inv_metric_(model.dim(), 1.0) {}

  struct Transition {
    double accept_stat = 0.0;
    int depth = 0;
    int n_leapfrog = 0;
    bool divergent = false;
    double energy = 0.0;
  };

  PhasePoint& state() { return z_; }
  Vec& inv_metric() { return inv_metric_; }
  double& step_size() { return eps_; }

  void set_position(Vec q) {
    z_.q = std::move(q);
    z_.p.assign(z_.q.size(), 0.0);
    z_.g.assign(z_.q.size(), 0.0);
    z_.lp = model_.log_density(z_.q, z_.g);
  }

  // Doubles or halves the step size until a single leapfrog step crosses
  // an acceptance probability of 0.8.
  void init_step_size() {
    const PhasePoint start = z_;
    sample_momentum();
    double h0 = hamiltonian(z_);
    leapfrog(z_, eps_);
    double h = hamiltonian(z_);
    if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
    double delta_h = h0 - h;
    const int direction = delta_h > std::log(0.8) ? 1 : -1;
    for (int guard = 0; guard < 100; ++guard) {
      z_ = start;
      sample_momentum();
      h0 = hamiltonian(z_);
      leapfrog(z_, eps_);
      h = hamiltonian(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      delta_h = h0 - h;
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
      if (eps_ > 1e7) throw SamplerError("step size diverged during initialization");
      if (eps_ == 0.0) throw SamplerError("step size collapsed to zero during initialization");
    }
    z_ = start;
  }

  Transition transition() {
    sample_momentum();
    const double h0 = hamiltonian(z_);

    PhasePoint z_fwd = z_;
    PhasePoint z_bck = z_;
    PhasePoint z_sample = z_;
    PhasePoint z_propose = z_;

    Vec p_fwd_fwd = z_.p, p_fwd_bck = z_.p, p_bck_fwd = z_.p, p_bck_bck = z_.p;
    Vec ps_fwd_fwd = dtau_dp(z_.p), ps_fwd_bck = ps_fwd_fwd, ps_bck_fwd = ps_fwd_fwd,
        ps_bck_bck = ps_fwd_fwd;
    Vec rho = z_.p;
    double log_sum_weight = 0.0;
    Transition tr;
    double sum_metro = 0.0;
    divergent_ = false;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    while (tr.depth < max_depth_) {
      Vec rho_fwd(rho.size(), 0.0), rho_bck(rho.size(), 0.0);
      bool valid = false;
      double lsw_subtree = -std::numeric_limits<double>::infinity();
      if (unif(rng_) > 0.5) {
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        ps_bck_fwd = ps_fwd_bck;
        z_ = z_fwd;
        valid = build_tree(tr.depth, z_propose, ps_fwd_bck, ps_fwd_fwd, rho_fwd, p_fwd_bck,
                           p_fwd_fwd, h0, 1.0, tr.n_leapfrog, lsw_subtree, sum_metro);
        z_fwd = z_;
      } else {
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        ps_fwd_bck = ps_bck_fwd;
        z_ = z_bck;
        valid = build_tree(tr.depth, z_propose, ps_bck_fwd, ps_bck_bck, rho_bck, p_bck_fwd,
                           p_bck_bck, h0, -1.0, tr.n_leapfrog, lsw_subtree, sum_metro);
        z_bck = z_;
      }
      if (!valid) break;
      ++tr.depth;
      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (unif(rng_) < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

      for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = rho_bck[i] + rho_fwd[i];
      bool persist = criterion(ps_bck_bck, ps_fwd_fwd, rho);
      Vec ext(rho.size());
      for (std::size_t i = 0; i < rho.size(); ++i) ext[i] = rho_bck[i] + p_fwd_bck[i];
      persist = persist && criterion(ps_bck_bck, ps_fwd_bck, ext);
      for (std::size_t i = 0; i < rho.size(); ++i) ext[i] = rho_fwd[i] + p_bck_fwd[i];
      persist = persist && criterion(ps_bck_fwd, ps_fwd_fwd, ext);
      if (!persist) break;
    }
    tr.divergent = divergent_;
    tr.accept_stat = tr.n_leapfrog > 0 ? sum_metro / tr.n_leapfrog : 0.0;
    z_ = z_sample;
    tr.energy = hamiltonian(z_);
    return tr;
  }

 private:
  void sample_momentum() {
    std::normal_distribution<double> n01(0.0, 1.0);
    for (std::size_t i = 0; i < z_.p.size(); ++i) z_.p[i] = n01(rng_) / std::sqrt(inv_metric_[i]);
  }

  double kinetic(const PhasePoint& z) const {
    double k = 0.0;
    for (std::size_t i = 0; i < z.p.size(); ++i) k += inv_metric_[i] * z.p[i] * z.p[i];
    return 0.5 * k;
  }
  double hamiltonian(const PhasePoint& z) const { return -z.lp + kinetic(z); }

  Vec dtau_dp(const Vec& p) const {
    Vec out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = inv_metric_[i] * p[i];
    return out;
  }

  static bool criterion(const Vec& ps_minus, const Vec& ps_plus, const Vec& rho) {
    return dot(ps_plus, rho) > 0.0 && dot(ps_minus, rho) > 0.0;
  }

  void leapfrog(PhasePoint& z, double eps) const {
    for (std::size_t i = 0; i < z.p.size(); ++i) z.p[i] += 0.5 * eps * z.g[i];
    for (std::size_t i = 0; i < z.q.size(); ++i) z.q[i] += eps * inv_metric_[i] * z.p[i];
    z.lp = model_.log_density(z.q, z.g);
    for (std::size_t i = 0; i < z.p.size(); ++i) z.p[i] += 0.5 * eps * z.g[i];
  }

  bool build_tree(int depth, PhasePoint& z_propose, Vec& ps_beg, Vec& ps_end, Vec& rho, Vec& p_beg,
                  Vec& p_end, double h0, double sign, int& n_leapfrog, double& log_sum_weight,
                  double& sum_metro) {
    if (depth == 0) {
      leapfrog(z_, sign * eps_);
      ++n_leapfrog;
      double h = hamiltonian(z_);
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      if (h - h0 > kMaxDeltaH) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z_;
      ps_beg = dtau_dp(z_.p);
      ps_end = ps_beg;
      for (std::size_t i = 0; i < rho.size(); ++i) rho[i] += z_.p[i];
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent_;
    }

    const std::size_t n = rho.size();
    Vec rho_left(n, 0.0), p_left_end(n), ps_left_end(n);
    double lsw_left = -std::numeric_limits<double>::infinity();
    if (!build_tree(depth - 1, z_propose, ps_beg, ps_left_end, rho_left, p_beg, p_left_end, h0, sign,
                    n_leapfrog, lsw_left, sum_metro)) {
      return false;
    }
    PhasePoint z_propose_right = z_;
    Vec rho_right(n, 0.0), p_right_beg(n), ps_right_beg(n);
    double lsw_right = -std::numeric_limits<double>::infinity();
    if (!build_tree(depth - 1, z_propose_right, ps_right_beg, ps_end, rho_right, p_right_beg, p_end,
                    h0, sign, n_leapfrog, lsw_right, sum_metro)) {
      return false;
    }

    const double lsw_subtree = log_sum_exp(lsw_left, lsw_right);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (lsw_right > lsw_subtree) {
      z_propose = z_propose_right;
    } else if (unif(rng_) < std::exp(lsw_right - lsw_subtree)) {
      z_propose = z_propose_right;
    }

    Vec rho_subtree(n);
    for (std::size_t i = 0; i < n; ++i) {
      rho_subtree[i] = rho_left[i] + rho_right[i];
      rho[i] += rho_subtree[i];
    }
    bool persist = criterion(ps_beg, ps_end, rho_subtree);
    Vec ext(n);
    for (std::size_t i = 0; i < n; ++i) ext[i] = rho_left[i] + p_right_beg[i];
    persist = persist && criterion(ps_beg, ps_right_beg, ext);
    for (std::size_t i = 0; i < n; ++i) ext[i] = rho_right[i] + p_left_end[i];
    persist = persist && criterion(ps_left_end, ps_end, ext);
    return persist;
  }

  static constexpr double kMaxDeltaH = 1000.0;
  const Model& model_;
  Rng& rng_;
  int max_depth_;
  Vec inv_metric_;
  double eps_ = 1.0;
  PhasePoint z_;
  bool divergent_ = false;
};

Vec initial_point(const Model& model, Rng& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Vec q(model.dim(), 0.0);
  Vec g(model.dim(), 0.0);
  std::string reason;
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::fill(q.begin(), q.end(), 0.0);
    for (std::size_t k = 0; k < model.n_dispersed(); ++k) q[k] = u(rng);
    const double lp = model.log_density(q, g);
    const bool ok = std::isfinite(lp) &&
                    std::all_of(g.begin(), g.end(), [](double v) { return std::isfinite(v); });
    if (ok) return q;
    reason = model.rejection_reason(q);
    if (reason.empty()) reason = "gradient is not finite";
  }
  throw SamplerError("no finite initial point after 100 attempts: " + reason);
}

void run_one_chain(const Model& model, const SamplerConfig& cfg, int chain, double* out,
                   ChainStats& stats) {
  Rng rng(stream_seed(cfg.seed, 0x5eed, static_cast<std::uint64_t>(chain)));
  Nuts nuts(model, rng, cfg.max_depth);
  nuts.set_position(initial_point(model, rng));
  nuts.init_step_size();

  StepSizeAdapter step_adapter(cfg.target_accept);
  step_adapter.restart(nuts.step_size());
  WindowSchedule schedule(cfg.n_warmup);
  VarianceEstimator var_est(model.dim());
  const std::size_t dim = model.dim();
  const int n_keep = cfg.n_retained();
  stats = ChainStats{};
  stats.accept_stat.reserve(n_keep);

  for (int it = 0; it < cfg.n_iter; ++it) {
    const bool warmup = it < cfg.n_warmup;
    const auto tr = nuts.transition();
    if (warmup) {
      if (tr.divergent) ++stats.warmup_divergences;
      nuts.step_size() = step_adapter.learn(tr.accept_stat);
      bool metric_updated = false;
      if (schedule.in_window()) var_est.add(nuts.state().q);
      if (schedule.window_ends()) {
        schedule.advance_window();
        const double n = static_cast<double>(var_est.count());
        Vec var = var_est.variance();
        for (double& v : var) v = (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0));
        nuts.inv_metric() = std::move(var);
        var_est.restart();
        metric_updated = true;
      }
      schedule.tick();
      if (metric_updated) {
        nuts.init_step_size();
        step_adapter.restart(nuts.step_size());
      }
      if (it == cfg.n_warmup - 1) nuts.step_size() = step_adapter.final_step_size();
      continue;
    }
    const int s = it - cfg.n_warmup;
    std::copy(nuts.state().q.begin(), nuts.state().q.end(), out + static_cast<std::size_t>(s) * dim);
    stats.accept_stat.push_back(tr.accept_stat);
    stats.step_size.push_back(nuts.step_size());
    stats.tree_depth.push_back(tr.depth);
    stats.n_leapfrog.push_back(tr.n_leapfrog);
    stats.divergent.push_back(tr.divergent ? 1 : 0);
    stats.energy.push_back(tr.energy);
    stats.lp.push_back(nuts.state().lp);
  }
  stats.adapted_step_size = nuts.step_size();
  stats.inv_metric = nuts.inv_metric();
}

}  // namespace

PosteriorDraws run_chains(const Model& model, const SamplerConfig& cfg) {
  cfg.validate();
  PosteriorDraws pd;
  pd.names = model.names();
  pd.n_chains = cfg.n_chains;
  pd.n_draws = cfg.n_retained();
  pd.values.assign(pd.total_draws() * model.dim(), 0.0);
  pd.stats.resize(static_cast<std::size_t>(cfg.n_chains));

  std::vector<std::string> errors(static_cast<std::size_t>(cfg.n_chains));
  const int threads = cfg.n_threads > 0 ? cfg.n_threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int c = 0; c < cfg.n_chains; ++c) {
    try {
      double* out = pd.values.data() + static_cast<std::size_t>(c) * pd.n_draws * model.dim();
      run_one_chain(model, cfg, c, out, pd.stats[static_cast<std::size_t>(c)]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(c)] = "chain " + std::to_string(c + 1) + ": " + e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw SamplerError(e);
  }
  return pd;
}

}  // namespace gpmix
