#pragma once

// No-U-Turn Hamiltonian Monte Carlo with multinomial trajectory sampling,
// dual-averaging step-size adaptation and windowed diagonal metric
// adaptation during warmup.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpmix/model.hpp"

namespace gpmix {

struct SamplerConfig {
  int n_chains = 2;
  int n_iter = 2000;    // per chain, warmup included
  int n_warmup = 1000;
  std::uint64_t seed = 1;
  double target_accept = 0.8;
  int max_depth = 10;
  /// Worker threads across chains; 0 keeps the OpenMP default.
  int n_threads = 0;

  /// Throws std::invalid_argument unless 0 <= n_warmup < n_iter,
  /// n_chains >= 1, 0 < target_accept < 1 and max_depth >= 1.
  void validate() const;
  int n_retained() const { return n_iter - n_warmup; }
};

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ChainStats {
  std::vector<double> accept_stat;
  std::vector<double> step_size;
  std::vector<int> tree_depth;
  std::vector<int> n_leapfrog;
  std::vector<char> divergent;
  std::vector<double> energy;
  std::vector<double> lp;
  double adapted_step_size = 0.0;
  std::vector<double> inv_metric;
  int warmup_divergences = 0;
};

struct PosteriorDraws {
  std::vector<std::string> names;
  int n_chains = 0;
  int n_draws = 0;  // retained per chain
  std::vector<double> values;  // [chain][draw][parameter]
  std::vector<ChainStats> stats;

  std::size_t n_params() const { return names.size(); }
  std::size_t total_draws() const { return static_cast<std::size_t>(n_chains) * n_draws; }
  double at(int chain, int draw, std::size_t param) const {
    return values[(static_cast<std::size_t>(chain) * n_draws + draw) * n_params() + param];
  }
  std::span<const double> row(int chain, int draw) const {
    return {values.data() + (static_cast<std::size_t>(chain) * n_draws + draw) * n_params(), n_params()};
  }
  /// All retained values of one parameter, chain after chain.
  std::vector<double> column(std::size_t param) const;
  int n_divergent() const;
};

/// Runs `cfg.n_chains` independent chains. Each chain's random stream is
/// derived from (seed, chain), so the draws do not depend on the number of
/// threads. Throws SamplerError when no finite initial point is found in
/// 100 attempts, naming the violated constraint.
PosteriorDraws run_chains(const Model& model, const SamplerConfig& cfg);

}  // namespace gpmix
