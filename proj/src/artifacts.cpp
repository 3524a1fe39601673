#include "gpmix/artifacts.hpp"

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gpmix/csv.hpp"
#include "gpmix/data.hpp"

namespace gpmix {

namespace {

constexpr std::array<std::string_view, 9> kMetaColumns = {
    "chain", "iter", "lp__", "accept_stat__", "stepsize__", "treedepth__",
    "n_leapfrog__", "divergent__", "energy__"};

nlohmann::ordered_json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

std::string draws_to_csv(const PosteriorDraws& pd) {
  std::string out;
  for (std::size_t k = 0; k < kMetaColumns.size(); ++k) {
    if (k) out += ',';
    out += kMetaColumns[k];
  }
  for (const auto& n : pd.names) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (int c = 0; c < pd.n_chains; ++c) {
    const bool have_stats = static_cast<std::size_t>(c) < pd.stats.size() &&
                            pd.stats[static_cast<std::size_t>(c)].lp.size() == static_cast<std::size_t>(pd.n_draws);
    for (int d = 0; d < pd.n_draws; ++d) {
      out += std::to_string(c + 1);
      out += ',';
      out += std::to_string(d + 1);
      if (have_stats) {
        const ChainStats& s = pd.stats[static_cast<std::size_t>(c)];
        const auto u = static_cast<std::size_t>(d);
        for (double v : {s.lp[u], s.accept_stat[u], s.step_size[u]}) {
          out += ',';
          out += csv::format_double(v);
        }
        out += ',' + std::to_string(s.tree_depth[u]) + ',' + std::to_string(s.n_leapfrog[u]) + ',' +
               std::to_string(static_cast<int>(s.divergent[u])) + ',' + csv::format_double(s.energy[u]);
      } else {
        out += ",,,,,,,";
      }
      for (double v : pd.row(c, d)) {
        out += ',';
        out += csv::format_double(v);
      }
      out += '\n';
    }
  }
  return out;
}

PosteriorDraws draws_from_csv(std::string_view text) {
  const auto lines = csv::lines(text);
  if (lines.empty()) throw DataError("draws file is empty");
  const auto header = csv::split_record(lines[0]);
  if (header.size() < kMetaColumns.size()) throw DataError("draws header is too short", 1);
  for (std::size_t k = 0; k < kMetaColumns.size(); ++k) {
    if (header[k] != kMetaColumns[k]) {
      throw DataError("draws header column " + std::to_string(k + 1) + " should be " +
                      std::string(kMetaColumns[k]), 1);
    }
  }
  PosteriorDraws pd;
  pd.names.assign(header.begin() + kMetaColumns.size(), header.end());
  const std::size_t np = pd.names.size();
  std::vector<std::size_t> per_chain;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const auto f = csv::split_record(lines[li]);
    if (f.size() != header.size()) throw DataError("draws row has the wrong number of fields", li + 1);
    const auto chain = csv::parse_long(f[0]);
    if (!chain || *chain < 1) throw DataError("bad chain number", li + 1);
    const auto ci = static_cast<std::size_t>(*chain - 1);
    if (ci > per_chain.size()) throw DataError("chains must appear in order", li + 1);
    if (ci == per_chain.size()) {
      per_chain.push_back(0);
      pd.stats.emplace_back();
    }
    if (ci + 1 != per_chain.size()) throw DataError("chains must appear in order", li + 1);
    ++per_chain[ci];
    ChainStats& s = pd.stats[ci];
    auto num = [&](std::size_t k) {
      if (f[k].empty()) return std::nan("");
      const auto v = csv::parse_double(f[k]);
      if (!v) throw DataError("column " + header[k] + " is not a number", li + 1);
      return *v;
    };
    s.lp.push_back(num(2));
    s.accept_stat.push_back(num(3));
    s.step_size.push_back(num(4));
    s.tree_depth.push_back(static_cast<int>(std::isnan(num(5)) ? 0 : num(5)));
    s.n_leapfrog.push_back(static_cast<int>(std::isnan(num(6)) ? 0 : num(6)));
    s.divergent.push_back(static_cast<char>(num(7) == 1.0));
    s.energy.push_back(num(8));
    for (std::size_t k = 0; k < np; ++k) {
      const double v = num(kMetaColumns.size() + k);
      if (std::isnan(v)) throw DataError("missing value for " + pd.names[k], li + 1);
      pd.values.push_back(v);
    }
  }
  if (per_chain.empty()) throw DataError("draws file has no rows");
  for (std::size_t n : per_chain) {
    if (n != per_chain[0]) throw DataError("chains have different numbers of draws");
  }
  pd.n_chains = static_cast<int>(per_chain.size());
  pd.n_draws = static_cast<int>(per_chain[0]);
  return pd;
}

std::string diagnostics_to_json(const Diagnostics& d, const PosteriorDraws& pd) {
  nlohmann::ordered_json j;
  j["n_chains"] = pd.n_chains;
  j["n_draws_per_chain"] = pd.n_draws;
  j["n_divergent"] = d.n_divergent;
  j["max_rhat"] = number_or_null(d.max_rhat);
  j["min_ess_bulk"] = number_or_null(d.min_ess_bulk);
  j["n_degenerate"] = d.n_degenerate;
  j["converged"] = d.converged();
  auto params = nlohmann::ordered_json::array();
  for (const auto& p : d.params) {
    nlohmann::ordered_json e;
    e["name"] = p.name;
    e["rhat"] = number_or_null(p.rhat);
    e["ess_bulk"] = number_or_null(p.ess_bulk);
    e["ess_tail"] = number_or_null(p.ess_tail);
    e["degenerate"] = p.degenerate;
    params.push_back(std::move(e));
  }
  j["parameters"] = std::move(params);
  return j.dump(2) + "\n";
}

std::string summary_csv(const PosteriorDraws& pd, const Diagnostics& d) {
  std::string out = "parameter,mean,sd,q2.5,q50,q97.5,rhat,ess_bulk,ess_tail\n";
  auto fmt = [](double v) { return std::isfinite(v) ? csv::format_double(v) : std::string("NA"); };
  for (std::size_t k = 0; k < pd.n_params(); ++k) {
    std::vector<double> col = pd.column(k);
    const double n = static_cast<double>(col.size());
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd = col.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::sort(col.begin(), col.end());
    out += pd.names[k];
    for (double v : {mean, sd, quantile_sorted(col, 0.025), quantile_sorted(col, 0.5), quantile_sorted(col, 0.975)}) {
      out += ',' + fmt(v);
    }
    const bool have = k < d.params.size();
    out += ',' + fmt(have ? d.params[k].rhat : NAN);
    out += ',' + fmt(have ? d.params[k].ess_bulk : NAN);
    out += ',' + fmt(have ? d.params[k].ess_tail : NAN);
    out += '\n';
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 0xF];
  }
  return out;
}

void Manifest::add_input(const std::string& path) { input_digests[path] = sha256_hex(csv::read_file(path)); }

std::string version_string() {
  std::ostringstream os;
  os << "gpmix 0.1.0";
#if defined(__clang__)
  os << " clang " << __clang_major__ << '.' << __clang_minor__;
#elif defined(__GNUC__)
  os << " gcc " << __GNUC__ << '.' << __GNUC_MINOR__;
#endif
#ifdef _OPENMP
  os << " openmp " << _OPENMP;
#endif
  return os.str();
}

std::string Manifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = version_string();
  nlohmann::ordered_json in = nlohmann::ordered_json::object();
  for (const auto& [path, digest] : input_digests) in[path] = "sha256:" + digest;
  j["inputs"] = std::move(in);
  j["seed"] = seed;
  j["config"] = config;
  j["priors"] = priors;
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

}  // namespace gpmix
