#include "gpmix/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace gpmix {

using nlohmann::json;
using namespace mpt;

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  h = mix(h ^ a);
  h = mix(h ^ b);
  h = mix(h ^ c);
  return h;
}

void DesignSpec::validate() const {
  if (blocks.empty()) throw std::invalid_argument("design has no study blocks");
  for (const StudyBlock& b : blocks) {
    const std::string where = "study block " + b.study_id + ": ";
    if (b.study_id.empty()) throw std::invalid_argument("study block without an id");
    if (b.n_items < 1) throw std::invalid_argument(where + "needs at least one item");
    if (b.n_participants < 2) {
      throw std::invalid_argument(where + "needs two participants to balance ambiguity within item");
    }
    if (b.len_crit_min < 1 || b.len_crit_max < b.len_crit_min || b.len_spill_min < 1 ||
        b.len_spill_max < b.len_spill_min) {
      throw std::invalid_argument(where + "invalid region length range");
    }
    if (!(b.mvrr_fraction >= 0.0 && b.mvrr_fraction <= 1.0) ||
        !(b.animacy_fraction >= 0.0 && b.animacy_fraction <= 1.0)) {
      throw std::invalid_argument(where + "fractions must lie in [0, 1]");
    }
    if (b.paradigm == Paradigm::MAZE && b.task != Task::NONE) {
      throw std::invalid_argument(where + "Maze blocks have no end-of-trial task");
    }
  }
}

std::size_t DesignSpec::n_participants() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.n_participants;
  return n;
}

std::size_t DesignSpec::n_items() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.n_items;
  return n;
}

DesignSpec recovery_design(std::uint64_t seed) {
  DesignSpec ds;
  ds.seed = seed;
  ds.blocks = {
      {"et", Paradigm::ET, Task::QUESTION, 13, 24, 0.0},
      {"spr", Paradigm::SPR, Task::QUESTION, 13, 24, 0.5},
      {"bspr", Paradigm::BSPR, Task::JUDGMENT, 12, 24, 0.5},
      {"maze", Paradigm::MAZE, Task::NONE, 12, 24, 0.0},
  };
  return ds;
}

PopulationParams reference_parameters() {
  PopulationParams pp;
  pp.pop.assign(kNumPop - 1, 0.0);
  auto& c = pp.pop;
  c[kLogitAttentive] = logit(0.91);
  c[kLogitGp] = logit(0.19);
  c[kLogitOvert] = logit(0.25);
  c[kLogitPostpone] = logit(0.675);
  c[kLogitSuccessO] = logit(0.705);
  c[kLogitSuccessC] = logit(0.415);
  c[kLogitInfer] = logit(0.30);
  c[kLogitBaseRegress] = logit(0.015);

  // Reading-time scale: a median of 250 ms above the shift at the reference
  // length; component offsets reproduce the millisecond targets as
  // differences of successive component medians.
  const double len_slope = 0.02;
  const double base_ms = 250.0;
  const double att_ms = 6.0;
  const double gp_ms = 14.5;
  const double reanalysis_ms = 467.5;
  const double regression_ms = 299.0;
  c[kLenSlope] = len_slope;
  c[kMu] = std::log(base_ms) - len_slope * kReferenceLength;
  c[kLogSigma1] = std::log(0.30);
  c[kLogSigmaDiff] = std::log(0.15);
  c[kLogShift] = std::log(166.0);
  const double m2 = base_ms + att_ms;
  const double m3 = m2 + gp_ms;
  c[kLogAttCost] = std::log(std::log(m2 / base_ms));
  c[kLogGpCost] = std::log(std::log(m3 / m2));
  c[kLogReanalysisCost] = std::log(std::log((m3 + reanalysis_ms) / m3));
  c[kLogRegressionCost] = std::log(std::log((m3 + regression_ms) / m3));

  // Probability-scale increases mapped to logit offsets from the baselines.
  c[kBeta1] = logit(0.67) - logit(0.19);
  c[kBeta2] = logit(0.825) - logit(0.67);
  c[kBeta3] = logit(0.82) - logit(0.705);
  c[kBeta4] = logit(0.67) - logit(0.415);
  c[kBeta5] = logit(0.02) - logit(0.015);
  c[kBetaAnimacy] = 0.0;
  c[kLogitEtShift] = logit(0.8);
  c[kLogitEtRegressionCost] = logit(0.7);
  c[kLogEtOvertSurplus] = std::log(0.5);

  pp.log_tau_participant.fill(std::log(0.5));
  pp.log_tau_participant[kReShift] = std::log(0.1);
  pp.log_tau_item[kReItemGp] = std::log(0.5);
  pp.log_tau_item[kReItemInfer] = std::log(0.3);
  return pp;
}

SimulatedTrial simulate_trial(const ProcessProbs& pp, const RtParams& rp, const Trial& frame,
                              Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto flip = [&](double p) { return unif(rng) < p; };

  const bool reg_possible = regressions_possible(frame.paradigm);
  SimulatedTrial out;
  out.trial = frame;
  Branches& br = out.path.branches;

  const bool base = reg_possible && flip(pp.p_base_regress);
  if (reg_possible) br.base_regress = base;
  bool overt = false;
  bool good = true;

  br.attentive = flip(pp.p_attentive);
  if (!*br.attentive) {
    out.path.crit = {Component::C1, base};
    out.path.spill = {Component::C1, false};
    good = flip(0.5);
  } else {
    br.gp = flip(pp.p_gp);
    bool understood = true;
    if (!*br.gp) {
      out.path.crit = {Component::C2, base};
      out.path.spill = {Component::C2, false};
    } else {
      overt = reg_possible && flip(pp.p_overt);
      if (reg_possible) br.overt = overt;
      double p_success = 0.0;
      if (overt) {
        out.path.crit = {Component::C5, base};
        out.path.spill = {Component::C2, false};
        p_success = pp.p_success_o;
      } else {
        br.postpone = flip(pp.p_postpone);
        if (*br.postpone) {
          out.path.crit = {Component::C3, base};
          out.path.spill = {Component::C4, false};
        } else {
          out.path.crit = {Component::C4, base};
          out.path.spill = {Component::C2, false};
        }
        p_success = pp.p_success_c;
      }
      br.success = flip(p_success);
      understood = *br.success;
    }
    good = understood;
    if (understood && frame.task == Task::QUESTION) {
      br.infer = flip(pp.p_infer);
      good = !*br.infer;
    }
  }

  auto draw_rt = [&](const RegionComponent& rc, int len, const std::optional<double>& surp) {
    const ComponentSpec spec = spec_of(rc);
    const double loc = comp_location(spec, rp, len, surp.value_or(0.0));
    return rp.shift + std::exp(loc + spec.scale(rp) * normal(rng));
  };
  out.trial.rt_crit = draw_rt(out.path.crit, frame.len_crit, frame.surp_crit);
  out.trial.rt_spill = draw_rt(out.path.spill, frame.len_spill, frame.surp_spill);
  out.trial.regression = reg_possible ? (base || overt ? Regression::YES : Regression::NO)
                                      : Regression::NA;
  out.trial.outcome = frame.task == Task::NONE ? Outcome::NA
                                               : (good ? Outcome::GOOD : Outcome::BAD);
  return out;
}

SimulatedTrial simulate_trial(const ConstrainedParams& cp, const Trial& frame,
                              std::size_t participant, std::size_t item, Rng& rng) {
  return simulate_trial(assemble_process_probs(cp, frame, participant, item),
                        assemble_rt_params(cp, frame, participant, item), frame, rng);
}

namespace {

std::string padded(std::size_t k) {
  std::string s = std::to_string(k + 1);
  return std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

struct ItemDesign {
  std::string id;
  Construction construction = Construction::NPZ;
  DisambType disamb_type = DisambType::COMMA;
  int len_crit = 1;
  int len_spill = 1;
  std::array<double, 2> surp_crit{};   // [ambiguous, unambiguous]
  std::array<double, 2> surp_spill{};
};

std::vector<TallyCell> tally(const std::vector<Trial>& trials) {
  std::map<std::pair<std::string, std::string>, TallyCell> cells;
  for (const Trial& t : trials) {
    auto key = std::make_pair(t.study_id, condition_label(t));
    TallyCell& c = cells[key];
    c.study_id = key.first;
    c.condition = key.second;
    ++c.n_trials;
    if (auto type = trial_type_of(t)) {
      ++c.n_classified;
      ++c.type_counts[static_cast<int>(*type)];
    }
  }
  std::vector<TallyCell> out;
  for (auto& [k, c] : cells) out.push_back(std::move(c));
  return out;
}

json branches_json(const Branches& b) {
  json j = json::object();
  auto put = [&](const char* k, const std::optional<bool>& v) {
    if (v) j[k] = *v;
  };
  put("base_regress", b.base_regress);
  put("attentive", b.attentive);
  put("gp", b.gp);
  put("overt", b.overt);
  put("postpone", b.postpone);
  put("success", b.success);
  put("infer", b.infer);
  return j;
}

Branches branches_from_json(const json& j) {
  Branches b;
  auto get = [&](const char* k, std::optional<bool>& v) {
    if (j.contains(k)) v = j.at(k).get<bool>();
  };
  get("base_regress", b.base_regress);
  get("attentive", b.attentive);
  get("gp", b.gp);
  get("overt", b.overt);
  get("postpone", b.postpone);
  get("success", b.success);
  get("infer", b.infer);
  return b;
}

json component_json(const RegionComponent& rc) {
  return {{"component", static_cast<int>(rc.comp)}, {"plus_regression_cost", rc.plus_regression_cost}};
}

RegionComponent component_from_json(const json& j) {
  return {static_cast<Component>(j.at("component").get<int>()),
          j.at("plus_regression_cost").get<bool>()};
}

}  // namespace

std::string GroundTruth::to_json() const {
  json j;
  j["seed"] = seed;
  j["with_surprisal"] = with_surprisal;
  j["n_top_level"] = n_top_level;
  j["n_excluded"] = n_excluded;
  json params = json::array();
  for (std::size_t k = 0; k < names.size(); ++k) {
    params.push_back({{"name", names[k]}, {"value", coordinates[k]}});
  }
  j["coordinates"] = std::move(params);
  json p = json::array();
  for (const PathRecord& r : paths) {
    p.push_back({{"branches", branches_json(r.branches)},
                 {"crit", component_json(r.crit)},
                 {"spill", component_json(r.spill)}});
  }
  j["paths"] = std::move(p);
  json t = json::array();
  for (const TallyCell& c : tallies) {
    json counts = json::object();
    for (TrialType type : kAllTrialTypes) {
      counts[std::string(to_string(type))] = c.type_counts[static_cast<int>(type)];
    }
    t.push_back({{"study_id", c.study_id},
                 {"condition", c.condition},
                 {"n_trials", c.n_trials},
                 {"n_classified", c.n_classified},
                 {"counts", counts}});
  }
  j["tallies"] = std::move(t);
  return j.dump(1) + "\n";
}

GroundTruth GroundTruth::from_json(const std::string& text) {
  const json j = json::parse(text);
  GroundTruth g;
  g.seed = j.at("seed").get<std::uint64_t>();
  g.with_surprisal = j.at("with_surprisal").get<bool>();
  g.n_top_level = j.at("n_top_level").get<std::size_t>();
  g.n_excluded = j.at("n_excluded").get<std::size_t>();
  for (const json& p : j.at("coordinates")) {
    g.names.push_back(p.at("name").get<std::string>());
    g.coordinates.push_back(p.at("value").get<double>());
  }
  for (const json& p : j.at("paths")) {
    g.paths.push_back({branches_from_json(p.at("branches")), component_from_json(p.at("crit")),
                       component_from_json(p.at("spill"))});
  }
  for (const json& c : j.at("tallies")) {
    TallyCell cell;
    cell.study_id = c.at("study_id").get<std::string>();
    cell.condition = c.at("condition").get<std::string>();
    cell.n_trials = c.at("n_trials").get<std::size_t>();
    cell.n_classified = c.at("n_classified").get<std::size_t>();
    for (TrialType type : kAllTrialTypes) {
      cell.type_counts[static_cast<int>(type)] =
          c.at("counts").at(std::string(to_string(type))).get<std::size_t>();
    }
    g.tallies.push_back(std::move(cell));
  }
  return g;
}

SimulationResult simulate_dataset(const PopulationParams& params, const DesignSpec& ds) {
  ds.validate();
  const std::size_t n_p = ds.n_participants();
  const std::size_t n_i = ds.n_items();
  const bool ws = params.with_surprisal();
  if (params.pop.size() != kNumPop && params.pop.size() != kNumPop - 1) {
    throw std::invalid_argument("population parameter vector has wrong length");
  }
  const MptLayout gen_layout(ws, n_p, n_i);

  std::vector<double> coords(gen_layout.dim(), 0.0);
  std::copy(params.pop.begin(), params.pop.end(), coords.begin());
  for (int e = 0; e < kNumParticipantEffects; ++e) {
    coords[gen_layout.log_tau_participant(e)] = params.log_tau_participant[e];
  }
  for (int e = 0; e < kNumItemEffects; ++e) coords[gen_layout.log_tau_item(e)] = params.log_tau_item[e];
  for (int k = 0; k < kNumParticipantCpc; ++k) {
    coords[gen_layout.cpc_participant(k)] = params.cpc_participant[k];
  }
  for (int k = 0; k < kNumItemCpc; ++k) coords[gen_layout.cpc_item(k)] = params.cpc_item[k];
  for (std::size_t p = 0; p < n_p; ++p) {
    Rng rng(stream_seed(ds.seed, 1, p));
    std::normal_distribution<double> z(0.0, 1.0);
    for (int e = 0; e < kNumParticipantEffects; ++e) coords[gen_layout.z_participant(p, e)] = z(rng);
  }
  for (std::size_t i = 0; i < n_i; ++i) {
    Rng rng(stream_seed(ds.seed, 2, i));
    std::normal_distribution<double> z(0.0, 1.0);
    for (int e = 0; e < kNumItemEffects; ++e) coords[gen_layout.z_item(i, e)] = z(rng);
  }
  const ConstrainedParams cp = transform(gen_layout, coords).cp;

  // Items: construction, lengths and surprisal are properties of the sentence.
  std::vector<ItemDesign> items(n_i);
  SurprisalTable surprisal;
  std::size_t item0 = 0;
  for (const StudyBlock& b : ds.blocks) {
    const auto n_mvrr = static_cast<std::size_t>(std::lround(b.mvrr_fraction * static_cast<double>(b.n_items)));
    const auto n_animacy = static_cast<std::size_t>(std::lround(b.animacy_fraction * static_cast<double>(n_mvrr)));
    for (std::size_t k = 0; k < b.n_items; ++k) {
      ItemDesign& it = items[item0 + k];
      it.id = b.study_id + "_I" + padded(k);
      const std::size_t first_mvrr = b.n_items - n_mvrr;
      if (k >= first_mvrr) {
        it.construction = Construction::MVRR;
        it.disamb_type = (k - first_mvrr) < n_animacy ? DisambType::ANIMACY : DisambType::RELATIVE_CLAUSE;
      }
      Rng rng(stream_seed(ds.seed, 3, item0 + k));
      it.len_crit = std::uniform_int_distribution<int>(b.len_crit_min, b.len_crit_max)(rng);
      it.len_spill = std::uniform_int_distribution<int>(b.len_spill_min, b.len_spill_max)(rng);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const double crit_base = 3.0 + 6.0 * u(rng);
      const double crit_bump = 1.0 + 2.0 * u(rng);
      const double spill_base = 2.0 + 6.0 * u(rng);
      const double spill_bump = u(rng);
      it.surp_crit = {crit_base + crit_bump, crit_base};
      it.surp_spill = {spill_base + spill_bump, spill_base};
      surprisal.insert({it.id, Ambiguity::AMBIGUOUS, it.disamb_type}, it.surp_crit[0], it.surp_spill[0]);
      surprisal.insert({it.id, Ambiguity::UNAMBIGUOUS, it.disamb_type}, it.surp_crit[1],
                       it.surp_spill[1]);
    }
    item0 += b.n_items;
  }

  // Frames in block / participant / item order.
  struct Slot {
    Trial frame;
    std::size_t p;
    std::size_t i;
  };
  std::vector<Slot> slots;
  std::size_t p0 = 0;
  item0 = 0;
  for (const StudyBlock& b : ds.blocks) {
    for (std::size_t j = 0; j < b.n_participants; ++j) {
      for (std::size_t k = 0; k < b.n_items; ++k) {
        const ItemDesign& it = items[item0 + k];
        Trial f;
        f.study_id = b.study_id;
        f.participant_id = b.study_id + "_P" + padded(j);
        f.item_id = it.id;
        f.paradigm = b.paradigm;
        f.task = b.task;
        f.construction = it.construction;
        f.disamb_type = it.disamb_type;
        const int a = (j + k) % 2 == 0 ? 0 : 1;
        f.ambiguity = a == 0 ? Ambiguity::AMBIGUOUS : Ambiguity::UNAMBIGUOUS;
        f.len_crit = it.len_crit;
        f.len_spill = it.len_spill;
        f.surp_crit = it.surp_crit[a];
        f.surp_spill = it.surp_spill[a];
        slots.push_back({std::move(f), p0 + j, item0 + k});
      }
    }
    p0 += b.n_participants;
    item0 += b.n_items;
  }

  std::vector<SimulatedTrial> sims(slots.size());
  const auto n_slots = static_cast<std::ptrdiff_t>(slots.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < n_slots; ++s) {
    const Slot& sl = slots[static_cast<std::size_t>(s)];
    Rng rng(stream_seed(ds.seed, 4, sl.p, sl.i));
    sims[static_cast<std::size_t>(s)] = simulate_trial(cp, sl.frame, sl.p, sl.i, rng);
  }

  SimulationResult res;
  std::vector<Trial> kept;
  std::size_t n_excluded = 0;
  for (SimulatedTrial& st : sims) {
    if (!in_rt_window(st.trial)) {
      ++n_excluded;
      continue;
    }
    res.truth.paths.push_back(st.path);
    kept.push_back(std::move(st.trial));
  }
  res.truth.tallies = tally(kept);
  res.trials = TrialSet(std::move(kept), n_excluded);
  res.surprisal = std::move(surprisal);

  // Re-express the truth in the fitted dataset's index order.
  const TrialSet& ts = res.trials;
  const MptLayout fit_layout(ws, ts.n_participants(), ts.n_items());
  std::unordered_map<std::string, std::size_t> gen_p;
  std::unordered_map<std::string, std::size_t> gen_i;
  for (const Slot& sl : slots) {
    gen_p.emplace(sl.frame.participant_id, sl.p);
    gen_i.emplace(sl.frame.item_id, sl.i);
  }
  std::vector<double> fit(fit_layout.dim(), 0.0);
  std::copy(coords.begin(), coords.begin() + static_cast<std::ptrdiff_t>(fit_layout.z_participant(0, 0)),
            fit.begin());
  for (std::size_t p = 0; p < ts.n_participants(); ++p) {
    const std::size_t g = gen_p.at(ts.participant_ids()[p]);
    for (int e = 0; e < kNumParticipantEffects; ++e) {
      fit[fit_layout.z_participant(p, e)] = coords[gen_layout.z_participant(g, e)];
    }
  }
  for (std::size_t i = 0; i < ts.n_items(); ++i) {
    const std::size_t g = gen_i.at(ts.item_ids()[i]);
    for (int e = 0; e < kNumItemEffects; ++e) fit[fit_layout.z_item(i, e)] = coords[gen_layout.z_item(g, e)];
  }
  res.truth.seed = ds.seed;
  res.truth.with_surprisal = ws;
  res.truth.names = fit_layout.names();
  res.truth.coordinates = std::move(fit);
  res.truth.n_top_level = fit_layout.n_top_level();
  res.truth.n_excluded = n_excluded;
  return res;
}

TrialSet simulate_on_frame(const ConstrainedParams& cp, const TrialSet& frames, std::uint64_t seed) {
  if (cp.participant_effects.size() != frames.n_participants() ||
      cp.item_effects.size() != frames.n_items()) {
    throw std::invalid_argument("parameter point does not match the design frame");
  }
  std::vector<Trial> out(frames.size());
  const auto n = static_cast<std::ptrdiff_t>(frames.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    Rng rng(stream_seed(seed, 5, ut));
    out[ut] = simulate_trial(cp, frames[ut], frames.participant_index(ut), frames.item_index(ut), rng).trial;
  }
  return TrialSet(std::move(out), 0);
}

}  // namespace gpmix
