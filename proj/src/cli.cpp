#include "gpmix/cli.hpp"

#include <omp.h>

#include <chrono>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "gpmix/artifacts.hpp"
#include "gpmix/compare.hpp"
#include "gpmix/csv.hpp"
#include "gpmix/data.hpp"
#include "gpmix/diagnostics.hpp"
#include "gpmix/hier.hpp"
#include "gpmix/ppc.hpp"
#include "gpmix/report.hpp"
#include "gpmix/sampler.hpp"
#include "gpmix/simulate.hpp"
#include "gpmix/tree.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace gpmix {

namespace {

/// Errors in user-supplied inputs; mapped to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct StrictFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string absolute_path(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

std::string read_input(const std::string& path) {
  try {
    return csv::read_file(path);
  } catch (const std::runtime_error&) {
    throw InputError("cannot read " + path);
  }
}

void write_output(const fs::path& dir, const std::string& name, std::string_view content,
                  std::vector<std::string>* written = nullptr) {
  fs::create_directories(dir);
  csv::write_file((dir / name).string(), content);
  if (written) written->push_back(name);
}

ModelKind parse_kind(const std::string& s) {
  const auto k = parse_model_kind(s);
  if (!k) throw InputError("unknown model '" + s + "' (expected baseline, mpt, surprisal or mpt-surprisal)");
  return *k;
}

PriorConfig load_priors(const std::string& path) {
  if (path.empty()) return {};
  try {
    return parse_prior_config(read_input(path));
  } catch (const std::invalid_argument& e) {
    throw InputError(path + ": " + e.what());
  }
}

TrialSet load_trials(const std::string& data, const std::string& surprisal, bool in_bits) {
  if (!fs::exists(data)) throw InputError("data file not found: " + data);
  TrialSet ts = read_trials_file(data);
  if (!surprisal.empty()) ts = attach_surprisal(ts, parse_surprisal_table(read_input(surprisal), in_bits));
  if (ts.empty()) throw InputError("no trials left after the reading-time window");
  return ts;
}

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

/// Everything needed to rebuild a fitted model from its output directory.
struct FitRecord {
  fs::path dir;
  ModelKind kind = ModelKind::MPT;
  std::string data;
  std::string surprisal;
  bool surprisal_bits = false;
  std::string data_digest;
  PriorConfig priors;
  TrialSet trials;
  PosteriorDraws draws;
  std::string label;
};

FitRecord load_fit(const std::string& dir) {
  FitRecord f;
  f.dir = dir;
  const fs::path manifest = f.dir / "manifest.json";
  if (!fs::exists(manifest)) throw InputError("no manifest.json in " + dir);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_input(manifest.string()));
    if (j.at("command").get<std::string>() != "fit") throw InputError(dir + " is not a fit directory");
    const auto& cfg = j.at("config");
    f.kind = parse_kind(cfg.at("model").get<std::string>());
    f.data = cfg.at("data").get<std::string>();
    f.surprisal = cfg.at("surprisal").get<std::string>();
    f.surprisal_bits = cfg.at("surprisal_bits").get<bool>();
    f.data_digest = j.at("inputs").at(f.data).get<std::string>();
    f.priors = parse_prior_config(j.at("priors").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed manifest in " + dir + ": " + e.what());
  }
  const std::string now = "sha256:" + sha256_hex(read_input(f.data));
  if (now != f.data_digest) throw InputError("data file " + f.data + " changed since the fit in " + dir);
  f.trials = load_trials(f.data, f.surprisal, f.surprisal_bits);
  f.draws = draws_from_csv(read_input((f.dir / "draws.csv").string()));
  f.label = std::string(to_string(f.kind));
  return f;
}

PosteriorDraws load_draws(const std::string& draws, const std::string& fit_dir) {
  if (!draws.empty()) return draws_from_csv(read_input(draws));
  if (!fit_dir.empty()) return draws_from_csv(read_input((fs::path(fit_dir) / "draws.csv").string()));
  throw InputError("either --draws or --fit-dir is required");
}

std::string trial_category(const Trial& t) {
  const auto type = trial_type_of(t);
  return type ? std::string(to_string(*type)) : std::string("UNCLASSIFIED");
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
  std::uint64_t seed = 1;
  std::size_t participants = 50;
  std::size_t items = 24;
  double surp_slope = std::nan("");
  bool omit_surprisal = false;
  std::string out_dir = "sim";
};

int cmd_simulate(const SimulateOpts& o, std::ostream& out) {
  DesignSpec ds = recovery_design(o.seed);
  if (o.participants < 2 * ds.blocks.size()) {
    throw InputError("need at least " + std::to_string(2 * ds.blocks.size()) + " participants");
  }
  const std::size_t per = o.participants / ds.blocks.size();
  std::size_t extra = o.participants % ds.blocks.size();
  for (auto& b : ds.blocks) {
    b.n_participants = per + (extra > 0 ? 1 : 0);
    if (extra > 0) --extra;
    b.n_items = o.items;
  }
  PopulationParams params = reference_parameters();
  if (!std::isnan(o.surp_slope)) params.pop.push_back(o.surp_slope);
  SimulationResult sim = simulate_dataset(params, ds);
  TrialSet ts = sim.trials;
  if (o.omit_surprisal) {
    std::vector<Trial> stripped = ts.trials();
    for (auto& t : stripped) {
      t.surp_crit.reset();
      t.surp_spill.reset();
    }
    ts = TrialSet(std::move(stripped), ts.n_excluded());
  }
  const fs::path dir(o.out_dir);
  std::vector<std::string> written;
  write_output(dir, "trials.csv", serialize_trials(ts), &written);
  write_output(dir, "surprisal.csv", serialize_surprisal_table(sim.surprisal), &written);
  write_output(dir, "truth.json", sim.truth.to_json(), &written);
  Manifest m;
  m.command = "simulate";
  m.seed = o.seed;
  m.config["participants"] = o.participants;
  m.config["items_per_block"] = o.items;
  if (!std::isnan(o.surp_slope)) m.config["surp_slope"] = o.surp_slope;
  m.config["omit_surprisal"] = o.omit_surprisal;
  m.outputs = written;
  write_output(dir, "manifest.json", m.to_json());
  out << "simulated " << ts.size() << " trials (" << ts.n_excluded() << " outside the RT window) into "
      << dir.string() << "\n";
  return kExitOk;
}

// --------------------------------------------------------------------- fit

struct FitOpts {
  std::string data;
  std::string surprisal;
  bool surprisal_bits = false;
  std::string model = "mpt";
  std::string priors;
  std::string out_dir = "fit";
  SamplerConfig sampler;
  bool strict = false;
};

int cmd_fit(const FitOpts& o, std::ostream& out) {
  const ModelKind kind = parse_kind(o.model);
  const PriorConfig priors = load_priors(o.priors);
  const TrialSet ts = load_trials(o.data, o.surprisal, o.surprisal_bits);
  const auto model = make_model(kind, ts, priors);
  try {
    o.sampler.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }

  const auto t0 = std::chrono::steady_clock::now();
  const PosteriorDraws pd = run_chains(*model, o.sampler);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Diagnostics d = diagnostics(pd);

  const fs::path dir(o.out_dir);
  std::vector<std::string> written;
  write_output(dir, "draws.csv", draws_to_csv(pd), &written);
  write_output(dir, "diagnostics.json", diagnostics_to_json(d, pd), &written);
  write_output(dir, "summary.csv", summary_csv(pd, d), &written);

  Manifest m;
  m.command = "fit";
  m.seed = o.sampler.seed;
  const std::string data_abs = absolute_path(o.data);
  m.add_input(data_abs);
  std::string surp_abs;
  if (!o.surprisal.empty()) {
    surp_abs = absolute_path(o.surprisal);
    m.add_input(surp_abs);
  }
  m.config["model"] = std::string(to_string(kind));
  m.config["data"] = data_abs;
  m.config["surprisal"] = surp_abs;
  m.config["surprisal_bits"] = o.surprisal_bits;
  m.config["chains"] = o.sampler.n_chains;
  m.config["iter"] = o.sampler.n_iter;
  m.config["warmup"] = o.sampler.n_warmup;
  m.config["target_accept"] = o.sampler.target_accept;
  m.config["max_depth"] = o.sampler.max_depth;
  m.config["n_trials"] = ts.size();
  m.config["n_excluded"] = ts.n_excluded();
  m.config["diagnostics"] = {{"max_rhat", std::isfinite(d.max_rhat) ? nlohmann::ordered_json(d.max_rhat) : nullptr},
                             {"min_ess_bulk", std::isfinite(d.min_ess_bulk) ? nlohmann::ordered_json(d.min_ess_bulk) : nullptr},
                             {"n_divergent", d.n_divergent},
                             {"converged", d.converged()}};
  m.priors = serialize_prior_config(priors);
  m.outputs = written;
  write_output(dir, "manifest.json", m.to_json());

  nlohmann::ordered_json timing;
  timing["wall_seconds"] = seconds;
  timing["threads"] = omp_get_max_threads();
  write_output(dir, "timing.json", timing.dump(2) + "\n");

  out << "fit " << to_string(kind) << " on " << ts.size() << " trials: " << pd.n_chains << " chains x "
      << pd.n_draws << " draws, max R-hat " << d.max_rhat << ", min bulk ESS " << d.min_ess_bulk << ", "
      << d.n_divergent << " divergent\n";
  if (o.strict && !d.converged()) {
    throw StrictFailure("R-hat above 1.05 (max " + std::to_string(d.max_rhat) + ") or undefined");
  }
  return kExitOk;
}

// ---------------------------------------------------------------- diagnose

int cmd_diagnose(const std::string& draws, const std::string& fit_dir, const std::string& out_dir,
                 bool strict, std::ostream& out) {
  const PosteriorDraws pd = load_draws(draws, fit_dir);
  const Diagnostics d = diagnostics(pd);
  const fs::path dir = !out_dir.empty() ? fs::path(out_dir) : (!fit_dir.empty() ? fs::path(fit_dir) : fs::path("."));
  write_output(dir, "diagnostics.json", diagnostics_to_json(d, pd));
  write_output(dir, "summary.csv", summary_csv(pd, d));
  out << "parameters " << pd.n_params() << ", max R-hat " << d.max_rhat << ", min bulk ESS " << d.min_ess_bulk
      << ", divergent " << d.n_divergent << ", degenerate " << d.n_degenerate << "\n";
  for (const auto& p : d.params) {
    if (!(p.rhat < 1.05)) out << "  R-hat " << p.rhat << "  " << p.name << "\n";
  }
  if (strict && !d.converged()) throw StrictFailure("convergence check failed");
  return kExitOk;
}

// --------------------------------------------------------------------- loo

LooResult loo_of(const FitRecord& f) {
  const auto model = make_model(f.kind, f.trials, f.priors);
  if (model->dim() != f.draws.n_params()) {
    throw InputError("draws in " + f.dir.string() + " do not match the " + f.label + " model");
  }
  return psis_loo(pointwise_loglik(f.draws, *model));
}

int cmd_loo(const std::string& fit_dir, const std::string& out_dir, std::ostream& out) {
  const FitRecord f = load_fit(fit_dir);
  const LooResult r = loo_of(f);
  const fs::path dir = out_dir.empty() ? f.dir : fs::path(out_dir);
  write_output(dir, "loo.json", r.to_json());
  std::string csv = "trial,study_id,participant_id,item_id,category,elpd,pareto_k\n";
  for (std::size_t i = 0; i < f.trials.size(); ++i) {
    const Trial& t = f.trials[i];
    csv += std::to_string(i + 1) + ',' + t.study_id + ',' + t.participant_id + ',' + t.item_id + ',' +
           trial_category(t) + ',' + csv::format_double(r.pointwise[i]) + ',' +
           (std::isfinite(r.pareto_k[i]) ? csv::format_double(r.pareto_k[i]) : std::string("NA")) + '\n';
  }
  write_output(dir, "pointwise.csv", csv);
  out << f.label << ": elpd_loo " << r.elpd_hat << " (SE " << r.se << "), " << r.n_high_k()
      << " trials with Pareto k > " << kParetoKThreshold << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- compare

int cmd_compare(const std::vector<std::string>& fits, const std::string& reference,
                const std::string& out_dir, std::ostream& out) {
  if (fits.size() < 2) throw InputError("compare needs at least two --fit directories");
  std::vector<FitRecord> recs;
  for (const auto& d : fits) recs.push_back(load_fit(d));
  for (std::size_t k = 0; k < recs.size(); ++k) {
    for (std::size_t j = 0; j < k; ++j) {
      if (recs[j].label == recs[k].label) recs[k].label += "@" + recs[k].dir.string();
    }
    if (recs[k].data_digest != recs[0].data_digest || recs[k].trials.size() != recs[0].trials.size()) {
      throw InputError("fits " + recs[0].dir.string() + " and " + recs[k].dir.string() +
                       " were run on different trial sets");
    }
  }
  std::size_t ref = 0;
  if (!reference.empty()) {
    const auto it = std::find_if(recs.begin(), recs.end(), [&](const FitRecord& r) {
      return r.label == reference || r.dir.string() == reference;
    });
    if (it == recs.end()) throw InputError("reference model '" + reference + "' is not among the fits");
    ref = static_cast<std::size_t>(it - recs.begin());
  }
  std::vector<LooResult> loos;
  for (const auto& r : recs) loos.push_back(loo_of(r));

  std::string table = "model,delta_elpd,se_delta,elpd_loo,se_elpd,n_high_k\n";
  std::string pointwise = "model,reference,trial,study_id,participant_id,item_id,category,rt_crit,delta_elpd\n";
  out << "model                 delta_elpd      SE\n";
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const ElpdDiff d = elpd_diff(loos[k], loos[ref]);
    table += recs[k].label + ',' + csv::format_double(d.diff) + ',' + csv::format_double(d.se) + ',' +
             csv::format_double(loos[k].elpd_hat) + ',' + csv::format_double(loos[k].se) + ',' +
             std::to_string(loos[k].n_high_k()) + '\n';
    char line[160];
    std::snprintf(line, sizeof line, "%-20s %11.1f %7.1f\n", recs[k].label.c_str(), d.diff, d.se);
    out << line;
    if (k == ref) continue;
    const TrialSet& ts = recs[k].trials;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const Trial& t = ts[i];
      pointwise += recs[k].label + ',' + recs[ref].label + ',' + std::to_string(i + 1) + ',' + t.study_id + ',' +
                   t.participant_id + ',' + t.item_id + ',' + trial_category(t) + ',' +
                   csv::format_double(t.rt_crit) + ',' +
                   csv::format_double(loos[k].pointwise[i] - loos[ref].pointwise[i]) + '\n';
    }
  }
  const fs::path dir(out_dir);
  write_output(dir, "compare.csv", table);
  write_output(dir, "pointwise_diff.csv", pointwise);
  return kExitOk;
}

// --------------------------------------------------------------------- ppc

int cmd_ppc(const std::string& fit_dir, std::size_t reps, std::uint64_t seed, const std::string& out_dir,
            std::ostream& out) {
  const FitRecord f = load_fit(fit_dir);
  if (!is_mpt_family(f.kind)) throw InputError("posterior predictive checks need an MPT-family fit");
  const auto sets = replicate(f.draws, f.trials, uses_surprisal(f.kind), reps, seed);
  const ProportionTable t = trial_type_table(f.trials, sets);
  const fs::path dir = out_dir.empty() ? f.dir : fs::path(out_dir);
  write_output(dir, "ppc.csv", t.to_csv());
  out << "cells " << t.rows.size() << ", observed inside 95% predictive interval: " << t.coverage() * 100.0
      << "%\n";
  for (const auto& c : t.empty_cells) out << "  no classifiable trials: " << c << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ report

int cmd_report(const std::string& draws, const std::string& fit_dir, const std::string& out_dir,
               std::ostream& out) {
  const PosteriorDraws pd = load_draws(draws, fit_dir);
  const std::string csv = report_csv(report_table(pd));
  const fs::path dir = !out_dir.empty() ? fs::path(out_dir) : (!fit_dir.empty() ? fs::path(fit_dir) : fs::path("."));
  write_output(dir, "report.csv", csv);
  out << csv;
  return kExitOk;
}

// -------------------------------------------------------------------- tree

int cmd_tree(const std::string& paradigm_s, const std::string& task_s, std::ostream& out) {
  const auto paradigm = parse_paradigm(paradigm_s);
  const auto task = parse_task(task_s);
  if (!paradigm) throw InputError("unknown paradigm " + paradigm_s);
  if (!task) throw InputError("unknown task " + task_s);
  const PopulationParams pop = reference_parameters();
  const MptLayout layout(false, 1, 1);
  std::vector<double> coords(layout.dim(), 0.0);
  std::copy(pop.pop.begin(), pop.pop.end(), coords.begin());
  ProcessProbs pp = transform(layout, coords).cp.base_probs;
  if (!regressions_possible(*paradigm)) pp.p_overt = pp.p_base_regress = 0.0;
  if (*task != Task::QUESTION) pp.p_infer = 0.0;
  auto comp = [](const RegionComponent& rc) {
    nlohmann::ordered_json c;
    c["component"] = "C" + std::to_string(static_cast<int>(rc.comp));
    c["plus_regression_cost"] = rc.plus_regression_cost;
    return c;
  };
  auto branch = [](const std::optional<bool>& b) -> nlohmann::ordered_json {
    if (!b) return nullptr;
    return *b;
  };
  nlohmann::ordered_json j;
  j["paradigm"] = std::string(to_string(*paradigm));
  j["task"] = std::string(to_string(*task));
  nlohmann::ordered_json paths = nlohmann::ordered_json::array();
  for (const auto& p : enumerate_paths(pp, *paradigm, *task)) {
    nlohmann::ordered_json e;
    e["expression"] = p.expression;
    e["probability"] = p.prob;
    const Branches& b = p.branches;
    e["branches"] = {{"base_regress", branch(b.base_regress)}, {"attentive", branch(b.attentive)},
                     {"gp", branch(b.gp)},                     {"overt", branch(b.overt)},
                     {"postpone", branch(b.postpone)},         {"success", branch(b.success)},
                     {"infer", branch(b.infer)}};
    e["crit"] = comp(p.crit);
    e["spill"] = comp(p.spill);
    e["p_good"] = p.outcome_dist[0];
    e["regression_observed"] = p.regression_observed;
    paths.push_back(std::move(e));
  }
  j["paths"] = std::move(paths);
  out << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent-process mixture models of garden-path reading"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP worker threads (0 keeps the default)")->check(CLI::NonNegativeNumber);

  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "Simulate a synthetic dataset from the reference parameters");
  sim->add_option("--seed", so.seed);
  sim->add_option("--participants", so.participants, "Participants, split over four paradigm blocks");
  sim->add_option("--items", so.items, "Items per block")->check(CLI::PositiveNumber);
  sim->add_option("--surp-slope", so.surp_slope, "Generate from the hybrid model with this surprisal slope");
  sim->add_flag("--omit-surprisal", so.omit_surprisal, "Leave the surprisal columns of trials.csv empty");
  sim->add_option("--out-dir", so.out_dir);

  FitOpts fo;
  auto* fit = app.add_subcommand("fit", "Fit a model with NUTS");
  fit->add_option("--data", fo.data, "Trial CSV")->required();
  fit->add_option("--surprisal", fo.surprisal, "Surprisal table joined onto the trials");
  fit->add_flag("--surprisal-bits", fo.surprisal_bits, "Surprisal table is in bits; convert to nats");
  fit->add_option("--model", fo.model, "baseline, mpt, surprisal or mpt-surprisal");
  fit->add_option("--chains", fo.sampler.n_chains);
  fit->add_option("--iter", fo.sampler.n_iter, "Iterations per chain, warmup included");
  fit->add_option("--warmup", fo.sampler.n_warmup);
  fit->add_option("--seed", fo.sampler.seed);
  fit->add_option("--target-accept", fo.sampler.target_accept);
  fit->add_option("--max-depth", fo.sampler.max_depth);
  fit->add_option("--priors", fo.priors, "Prior config file (key = value)");
  fit->add_option("--out-dir", fo.out_dir);
  fit->add_flag("--strict", fo.strict, "Exit 4 unless every R-hat is below 1.05");

  std::string draws, fit_dir, out_dir, reference;
  bool strict = false;
  auto* diag = app.add_subcommand("diagnose", "Convergence diagnostics for a draws file");
  diag->add_option("--draws", draws);
  diag->add_option("--fit-dir", fit_dir);
  diag->add_option("--out-dir", out_dir);
  diag->add_flag("--strict", strict);

  auto* loo = app.add_subcommand("loo", "PSIS-LOO for a fit directory");
  loo->add_option("--fit-dir", fit_dir)->required();
  loo->add_option("--out-dir", out_dir);

  std::vector<std::string> fits;
  auto* cmp = app.add_subcommand("compare", "elpd differences between fits of the same data");
  cmp->add_option("--fit", fits, "Fit directory (repeat)")->required();
  cmp->add_option("--reference", reference, "Reference model name or directory (default: first fit)");
  cmp->add_option("--out-dir", out_dir)->required();

  std::size_t reps = kDefaultReplicates;
  std::uint64_t ppc_seed = 1;
  auto* ppc = app.add_subcommand("ppc", "Posterior predictive trial-type proportions");
  ppc->add_option("--fit-dir", fit_dir)->required();
  ppc->add_option("--reps", reps)->check(CLI::PositiveNumber);
  ppc->add_option("--seed", ppc_seed);
  ppc->add_option("--out-dir", out_dir);

  auto* rep = app.add_subcommand("report", "95% intervals on interpretable scales");
  rep->add_option("--draws", draws);
  rep->add_option("--fit-dir", fit_dir);
  rep->add_option("--out-dir", out_dir);

  std::string paradigm = "ET", task = "QUESTION";
  auto* tree = app.add_subcommand("tree", "List the latent paths of a paradigm/task cell");
  tree->add_option("--paradigm", paradigm);
  tree->add_option("--task", task);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitData;
  }

  try {
    set_threads(threads);
    if (*sim) return cmd_simulate(so, out);
    if (*fit) return cmd_fit(fo, out);
    if (*diag) return cmd_diagnose(draws, fit_dir, out_dir, strict, out);
    if (*loo) return cmd_loo(fit_dir, out_dir, out);
    if (*cmp) return cmd_compare(fits, reference, out_dir, out);
    if (*ppc) return cmd_ppc(fit_dir, reps, ppc_seed, out_dir, out);
    if (*rep) return cmd_report(draws, fit_dir, out_dir, out);
    if (*tree) return cmd_tree(paradigm, task, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitData;
  } catch (const SamplerError& e) {
    err << "sampler error: " << e.what() << "\n";
    return kExitSampler;
  } catch (const StrictFailure& e) {
    err << "diagnostics: " << e.what() << "\n";
    return kExitStrict;
  }
  return kExitData;
}

}  // namespace gpmix
