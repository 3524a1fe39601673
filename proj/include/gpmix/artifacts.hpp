#pragma once

// On-disk artifacts shared by the command-line tool: posterior draws CSV,
// diagnostics JSON, posterior summary table and run manifests.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gpmix/diagnostics.hpp"
#include "gpmix/sampler.hpp"
#include "json.hpp"

namespace gpmix {

/// Columns: chain, iter, lp__, accept_stat__, stepsize__, treedepth__,
/// n_leapfrog__, divergent__, energy__, then one column per parameter.
/// One row per retained draw; numbers use shortest round-trip formatting.
std::string draws_to_csv(const PosteriorDraws& pd);
/// Throws DataError on malformed input or ragged chains.
PosteriorDraws draws_from_csv(std::string_view text);

std::string diagnostics_to_json(const Diagnostics& d, const PosteriorDraws& pd);

/// Per parameter: mean, sd, 2.5/50/97.5% quantiles, R-hat and ESS.
std::string summary_csv(const PosteriorDraws& pd, const Diagnostics& d);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

/// Run manifest: command, input file digests, seed, configuration, priors
/// and tool versions. Contains nothing time- or host-dependent, so equal
/// runs produce byte-identical manifests.
struct Manifest {
  std::string command;
  std::map<std::string, std::string> input_digests;  // path -> sha256
  std::uint64_t seed = 0;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::string priors;
  std::vector<std::string> outputs;

  void add_input(const std::string& path);
  std::string to_json() const;
};

std::string version_string();

}  // namespace gpmix
