#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "gpmix/tree.hpp"

using namespace gpmix;

namespace {

ProcessProbs random_probs(std::mt19937_64& rng, Paradigm paradigm = Paradigm::ET, Task task = Task::QUESTION) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ProcessProbs pp{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
  if (!regressions_possible(paradigm)) pp.p_overt = pp.p_base_regress = 0.0;
  if (task != Task::QUESTION) pp.p_infer = 0.0;
  return pp;
}

ProcessProbs deterministic_attentive() {
  ProcessProbs pp;
  pp.p_attentive = 1.0;
  return pp;
}

constexpr Observation kGoodNoReg{Outcome::GOOD, Regression::NO};
constexpr Observation kBadNoReg{Outcome::BAD, Regression::NO};
constexpr Observation kBadReg{Outcome::BAD, Regression::YES};

/// Independent sampler of the branch sequence, returning the observable
/// category.
Observation draw_category(const ProcessProbs& pp, Paradigm paradigm, Task task, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto flip = [&](double p) { return u(rng) < p; };
  const bool reg_possible = regressions_possible(paradigm);
  bool regression = reg_possible && flip(pp.p_base_regress);
  bool good = false;
  if (!flip(pp.p_attentive)) {
    good = flip(0.5);
  } else if (!flip(pp.p_gp)) {
    good = !(task == Task::QUESTION && flip(pp.p_infer));
  } else {
    const bool overt = reg_possible && flip(pp.p_overt);
    regression = regression || overt;
    if (!overt) flip(pp.p_postpone);  // consumes the branch; no observable effect
    const bool success = flip(overt ? pp.p_success_o : pp.p_success_c);
    good = success && !(task == Task::QUESTION && flip(pp.p_infer));
  }
  Observation o;
  o.outcome = task == Task::NONE ? Outcome::NA : (good ? Outcome::GOOD : Outcome::BAD);
  o.regression = reg_possible ? (regression ? Regression::YES : Regression::NO) : Regression::NA;
  return o;
}

std::string key(const Observation& o) {
  return std::string(to_string(o.outcome)) + "/" + std::string(to_string(o.regression));
}

}  // namespace

TEST_CASE("degenerate branches leave a single path") {
  SUBCASE("attentive, no garden path") {
    const auto paths = enumerate_paths(deterministic_attentive(), Paradigm::BSPR, Task::JUDGMENT);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].prob == 1.0);
    CHECK(paths[0].crit.comp == Component::C2);
    CHECK(paths[0].spill.comp == Component::C2);
    CHECK(paths[0].outcome_dist[0] == 1.0);
  }
  SUBCASE("inattentive") {
    ProcessProbs pp;
    const auto paths = enumerate_paths(pp, Paradigm::SPR, Task::JUDGMENT);
    REQUIRE(paths.size() == 1);
    CHECK(paths[0].crit.comp == Component::C1);
    CHECK(paths[0].spill.comp == Component::C1);
    CHECK(paths[0].outcome_dist[0] == 0.5);
    CHECK(paths[0].outcome_dist[1] == 0.5);
  }
}

TEST_CASE("component assignment follows the latent route") {
  ProcessProbs pp{0.7, 0.6, 0.3, 0.4, 0.5, 0.5, 0.0, 0.2};
  for (const auto& p : enumerate_paths(pp, Paradigm::ET, Task::JUDGMENT)) {
    const Branches& b = p.branches;
    CHECK(p.regression_observed == (*b.base_regress || b.overt.value_or(false)));
    CHECK(p.crit.plus_regression_cost == *b.base_regress);
    CHECK_FALSE(p.spill.plus_regression_cost);
    CHECK(p.outcome_dist[0] + p.outcome_dist[1] == 1.0);
    if (!*b.attentive) {
      CHECK(p.crit.comp == Component::C1);
      CHECK(p.spill.comp == Component::C1);
    } else if (!*b.gp) {
      CHECK(p.crit.comp == Component::C2);
      CHECK(p.spill.comp == Component::C2);
    } else if (*b.overt) {
      CHECK(p.crit.comp == Component::C5);
      CHECK(p.spill.comp == Component::C2);
    } else if (*b.postpone) {
      CHECK(p.crit.comp == Component::C3);
      CHECK(p.spill.comp == Component::C4);
    } else {
      CHECK(p.crit.comp == Component::C4);
      CHECK(p.spill.comp == Component::C2);
    }
  }
}

TEST_CASE("path probabilities partition unity on a random grid") {
  std::mt19937_64 rng(1);
  const std::array<std::pair<Paradigm, Task>, 5> cells = {{{Paradigm::ET, Task::QUESTION},
                                                          {Paradigm::BSPR, Task::JUDGMENT},
                                                          {Paradigm::SPR, Task::QUESTION},
                                                          {Paradigm::SPR, Task::JUDGMENT},
                                                          {Paradigm::MAZE, Task::NONE}}};
  for (int rep = 0; rep < 10000; ++rep) {
    const auto& [paradigm, task] = cells[static_cast<std::size_t>(rep) % cells.size()];
    const ProcessProbs pp = random_probs(rng, paradigm, task);
    double sum = 0.0;
    for (const auto& p : enumerate_paths(pp, paradigm, task)) sum += p.prob;
    REQUIRE(std::abs(sum - 1.0) < 1e-12);
    double cat = 0.0;
    for (const auto& [o, pr] : event_probabilities(pp, paradigm, task).categories) cat += pr;
    REQUIRE(std::abs(cat - 1.0) < 1e-12);
  }
}

TEST_CASE("category counts per paradigm and task") {
  const ProcessProbs pp{0.9, 0.3, 0.2, 0.5, 0.6, 0.4, 0.2, 0.05};
  CHECK(event_probabilities(pp, Paradigm::ET, Task::QUESTION).categories.size() == 4);
  ProcessProbs spr = pp;
  spr.p_overt = spr.p_base_regress = 0.0;
  CHECK(event_probabilities(spr, Paradigm::SPR, Task::JUDGMENT).categories.size() == 2);
  CHECK(event_probabilities(spr, Paradigm::MAZE, Task::NONE).categories.size() == 1);
  CHECK(event_probabilities(spr, Paradigm::SPR, Task::JUDGMENT).prob(kBadReg) == 0.0);
}

TEST_CASE("event probabilities for hand-solved settings") {
  SUBCASE("attentive without garden path") {
    const auto d = event_probabilities(deterministic_attentive(), Paradigm::ET, Task::QUESTION);
    CHECK(d.prob(kGoodNoReg) == 1.0);
    CHECK(d.prob(kBadNoReg) == 0.0);
    CHECK(d.prob(kBadReg) == 0.0);
  }
  SUBCASE("certain failed covert reanalysis with baseline regressions") {
    ProcessProbs pp;
    pp.p_base_regress = 0.2;
    pp.p_attentive = 1.0;
    pp.p_gp = 1.0;
    const auto d = event_probabilities(pp, Paradigm::ET, Task::QUESTION);
    CHECK(d.prob(kBadNoReg) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(d.prob(kBadReg) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(p_yes_no_regress(pp) == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("pure guessing") {
    ProcessProbs pp;
    CHECK(p_yes_no_regress(pp) == 0.5);
  }
}

TEST_CASE("closed-form question formula equals enumeration") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 1000; ++rep) {
    const ProcessProbs pp = random_probs(rng);
    const double enumerated = event_probabilities(pp, Paradigm::ET, Task::QUESTION).prob(kBadNoReg);
    REQUIRE(std::abs(p_yes_no_regress(pp) - enumerated) < 1e-12);
  }
}

TEST_CASE("event probabilities equal a brute-force sum over paths") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const ProcessProbs pp = random_probs(rng, Paradigm::BSPR, Task::JUDGMENT);
    std::map<std::string, double> sums;
    for (const auto& p : enumerate_paths(pp, Paradigm::BSPR, Task::JUDGMENT)) {
      const Regression r = p.regression_observed ? Regression::YES : Regression::NO;
      sums[key({Outcome::GOOD, r})] += p.prob * p.outcome_dist[0];
      sums[key({Outcome::BAD, r})] += p.prob * p.outcome_dist[1];
    }
    for (const auto& [o, pr] : event_probabilities(pp, Paradigm::BSPR, Task::JUDGMENT).categories) {
      REQUIRE(std::abs(pr - sums[key(o)]) < 1e-12);
    }
  }
}

TEST_CASE("enumeration matches Monte-Carlo branch simulation") {
  std::mt19937_64 rng(4);
  const std::array<std::pair<Paradigm, Task>, 3> cells = {
      {{Paradigm::ET, Task::QUESTION}, {Paradigm::BSPR, Task::JUDGMENT}, {Paradigm::SPR, Task::QUESTION}}};
  for (const auto& [paradigm, task] : cells) {
    const ProcessProbs pp = random_probs(rng, paradigm, task);
    constexpr int kDraws = 1000000;
    std::map<std::string, int> counts;
    for (int s = 0; s < kDraws; ++s) ++counts[key(draw_category(pp, paradigm, task, rng))];
    for (const auto& [o, pr] : event_probabilities(pp, paradigm, task).categories) {
      const double se = std::sqrt(pr * (1.0 - pr) / kDraws);
      CHECK(std::abs(counts[key(o)] / static_cast<double>(kDraws) - pr) < 3.0 * se + 1e-12);
    }
  }
}

TEST_CASE("judgment blocking leaves two routes to a no-regression rejection") {
  const ProcessProbs pp{0.8, 0.4, 0.3, 0.5, 0.6, 0.5, 0.0, 0.1};
  int families = 0;
  bool guess = false, covert_failure = false;
  for (const auto& p : enumerate_paths(pp, Paradigm::BSPR, Task::JUDGMENT)) {
    if (p.regression_observed || p.outcome_dist[1] == 0.0) continue;
    ++families;
    if (!*p.branches.attentive) guess = true;
    if (p.branches.gp.value_or(false) && !*p.branches.overt && !*p.branches.success) covert_failure = true;
    CHECK_FALSE(p.branches.infer.has_value());
  }
  CHECK(guess);
  CHECK(covert_failure);
  CHECK(families == 3);  // guess, failed covert in situ, failed covert postponed
}

TEST_CASE("regression categories are nondecreasing in their drivers") {
  std::mt19937_64 rng(5);
  auto p_reg = [](const ProcessProbs& pp) {
    const auto d = event_probabilities(pp, Paradigm::ET, Task::QUESTION);
    return d.prob({Outcome::GOOD, Regression::YES}) + d.prob(kBadReg);
  };
  for (int rep = 0; rep < 500; ++rep) {
    ProcessProbs pp = random_probs(rng);
    ProcessProbs more_base = pp, more_overt = pp;
    more_base.p_base_regress = std::min(1.0, pp.p_base_regress + 0.1);
    more_overt.p_overt = std::min(1.0, pp.p_overt + 0.1);
    CHECK(p_reg(more_base) >= p_reg(pp) - 1e-15);
    CHECK(p_reg(more_overt) >= p_reg(pp) - 1e-15);
  }
}

TEST_CASE("path posterior") {
  SUBCASE("deterministic parameters") {
    const auto post = path_posterior(deterministic_attentive(), Paradigm::ET, Task::QUESTION, kGoodNoReg);
    REQUIRE(post.size() == 1);
    CHECK(post[0].second == 1.0);
  }
  SUBCASE("impossible observation") {
    ProcessProbs pp{0.9, 0.3, 0.0, 0.5, 0.6, 0.4, 0.2, 0.0};
    CHECK_THROWS_AS(path_posterior(pp, Paradigm::ET, Task::QUESTION, kBadReg), std::domain_error);
  }
  SUBCASE("responsibilities are prior times outcome match") {
    std::mt19937_64 rng(6);
    const ProcessProbs pp = random_probs(rng);
    const auto paths = enumerate_paths(pp, Paradigm::ET, Task::QUESTION);
    double norm = 0.0;
    for (const auto& p : paths) norm += p.regression_observed ? 0.0 : p.prob * p.outcome_dist[1];
    double total = 0.0;
    for (const auto& [path, r] : path_posterior(pp, Paradigm::ET, Task::QUESTION, kBadNoReg)) {
      CHECK_FALSE(path.regression_observed);
      CHECK(r == doctest::Approx(path.prob * path.outcome_dist[1] / norm).epsilon(1e-12));
      total += r;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("probability validation") {
  ProcessProbs pp = deterministic_attentive();
  pp.p_gp = 1.5;
  CHECK_THROWS_AS(validate_process_probs(pp, Paradigm::ET), std::invalid_argument);
  ProcessProbs spr = deterministic_attentive();
  spr.p_base_regress = 0.1;
  CHECK_THROWS_AS(validate_process_probs(spr, Paradigm::SPR), std::invalid_argument);
  CHECK_NOTHROW(validate_process_probs(spr, Paradigm::BSPR));
}
