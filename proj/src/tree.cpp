#include "gpmix/tree.hpp"

#include <cmath>
#include <stdexcept>

namespace gpmix {

void validate_process_probs(const ProcessProbs& pp, Paradigm paradigm) {
  const std::pair<const char*, double> fields[] = {
      {"p_attentive", pp.p_attentive}, {"p_gp", pp.p_gp},
      {"p_overt", pp.p_overt},         {"p_postpone", pp.p_postpone},
      {"p_success_o", pp.p_success_o}, {"p_success_c", pp.p_success_c},
      {"p_infer", pp.p_infer},         {"p_base_regress", pp.p_base_regress}};
  for (const auto& [name, p] : fields) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument(std::string(name) + " outside [0, 1]");
    }
  }
  if (!regressions_possible(paradigm) && (pp.p_overt != 0.0 || pp.p_base_regress != 0.0)) {
    throw std::invalid_argument(std::string(to_string(paradigm)) +
                                " requires p_overt = p_base_regress = 0");
  }
}

namespace {

std::string factor(bool taken, const char* name) {
  return taken ? std::string(name) : "(1-" + std::string(name) + ")";
}

std::string expression_of(const Branches& b) {
  std::string out;
  auto add = [&](const std::optional<bool>& branch, const char* name) {
    if (!branch) return;
    if (!out.empty()) out += '*';
    out += factor(*branch, name);
  };
  add(b.base_regress, "p_base_regress");
  add(b.attentive, "p_attentive");
  add(b.gp, "p_gp");
  add(b.overt, "p_overt");
  add(b.postpone, "p_postpone");
  add(b.success, b.overt.value_or(false) ? "p_success_o" : "p_success_c");
  add(b.infer, "p_infer");
  return out.empty() ? "1" : out;
}

}  // namespace

std::vector<LatentPath> enumerate_paths(const ProcessProbs& pp, Paradigm paradigm, Task task) {
  validate_process_probs(pp, paradigm);
  std::vector<LatentPath> out;
  for_each_path(pp, paradigm, task, [&](const PathVisit<double>& v) {
    LatentPath p;
    p.branches = v.branches;
    p.prob = v.prob;
    p.crit = v.crit;
    p.spill = v.spill;
    p.outcome_dist = {v.p_good, 1.0 - v.p_good};
    p.regression_observed = v.regression_observed;
    p.expression = expression_of(v.branches);
    out.push_back(std::move(p));
  });
  return out;
}

double OutcomeDist::prob(const Observation& o) const {
  for (const auto& [obs, p] : categories) {
    if (obs == o) return p;
  }
  return 0.0;
}

std::vector<Observation> observable_categories(Paradigm paradigm, Task task) {
  std::vector<Outcome> outcomes = {Outcome::NA};
  if (task != Task::NONE) outcomes = {Outcome::GOOD, Outcome::BAD};
  std::vector<Regression> regressions = {Regression::NA};
  if (regressions_possible(paradigm)) regressions = {Regression::NO, Regression::YES};
  std::vector<Observation> out;
  for (Outcome o : outcomes) {
    for (Regression r : regressions) out.push_back({o, r});
  }
  return out;
}

OutcomeDist event_probabilities(const ProcessProbs& pp, Paradigm paradigm, Task task) {
  OutcomeDist dist;
  for (const Observation& o : observable_categories(paradigm, task)) {
    dist.categories.emplace_back(o, 0.0);
  }
  for (const LatentPath& path : enumerate_paths(pp, paradigm, task)) {
    for (auto& [o, p] : dist.categories) {
      p += path.prob * observation_factor(path.outcome_dist[0], path.regression_observed, o);
    }
  }
  return dist;
}

double p_yes_no_regress(const ProcessProbs& pp) {
  const double a = pp.p_attentive;
  const double g = pp.p_gp;
  const double o = pp.p_overt;
  const double q = pp.p_postpone;
  const double c = pp.p_success_c;
  const double i = pp.p_infer;
  return (1.0 - pp.p_base_regress) *
         ((1.0 - a) * 0.5 +
          a * (1.0 - g) * i +
          a * g * (1.0 - o) * (1.0 - q) * (1.0 - c) +
          a * g * (1.0 - o) * q * (1.0 - c) +
          a * g * (1.0 - o) * (1.0 - q) * c * i +
          a * g * (1.0 - o) * q * c * i);
}

std::vector<std::pair<LatentPath, double>> path_posterior(const ProcessProbs& pp,
                                                          Paradigm paradigm, Task task,
                                                          const Observation& observed) {
  std::vector<std::pair<LatentPath, double>> out;
  double total = 0.0;
  for (LatentPath& path : enumerate_paths(pp, paradigm, task)) {
    const double w =
        path.prob * observation_factor(path.outcome_dist[0], path.regression_observed, observed);
    if (w > 0.0) {
      total += w;
      out.emplace_back(std::move(path), w);
    }
  }
  if (!(total > 0.0)) {
    throw std::domain_error("observation has zero probability under these process probabilities");
  }
  for (auto& [path, w] : out) w /= total;
  return out;
}

}  // namespace gpmix
