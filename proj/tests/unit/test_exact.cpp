#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "chmm/exact.hpp"
#include "support/sir_fixtures.hpp"
#include "support/toy_model.hpp"

using namespace chmm;
using chmm::testing::enumerate_paths;
using chmm::testing::ToyModel;

namespace {

struct ToyCase {
  std::vector<ChainInfo> chains;
  int steps;
};

std::vector<ToyCase> toy_cases() {
  return {
      {{{0, 0}, {0, 1}, {0, 0}}, 4},
      {{{0, 0}, {1, 1}, {0, 1}}, 4},
      {{{0, 0, 1}, {0, 1}, {0, 0, 2}}, 4},
      {{{0, 0}, {0, 0}}, 6},
      {{{0, 1}, {0, 0}, {1, 0}, {1, 1, 0}}, 3},
  };
}

}  // namespace

TEST(JointFilter, MatchesEnumerationOnToys) {
  std::uint64_t seed = 1;
  for (const auto& c : toy_cases()) {
    const ToyModel model(c.chains, c.steps);
    for (int rep = 0; rep < 3; ++rep) {
      const auto y = chmm::testing::toy_observations(model, seed++);
      const auto truth = enumerate_paths(model, y);
      EXPECT_NEAR(exact_log_likelihood(model, y), truth.log_likelihood, 1e-10);
    }
  }
}

TEST(JointFilter, SmoothingMatchesEnumeration) {
  std::uint64_t seed = 50;
  for (const auto& c : toy_cases()) {
    const ToyModel model(c.chains, c.steps);
    const auto y = chmm::testing::toy_observations(model, seed++);
    const auto truth = enumerate_paths(model, y);
    const auto smooth = exact_smoothing_marginals(model, y);
    ASSERT_EQ(smooth.size(), truth.marginals.size());
    for (std::size_t i = 0; i < smooth.size(); ++i) EXPECT_NEAR(smooth[i], truth.marginals[i], 1e-10);
  }
}

TEST(JointFilter, MatchesEnumerationOnSirPen) {
  const auto data = chmm::testing::two_bird_pen();
  for (double beta : {0.0, 0.7, 2.3}) {
    sir::SirParams p = sir::reference_params().tied(sir::ModelVariant::from_index(1));
    p.beta_N = p.beta_T = beta;
    const sir::SirModel model(data.chickens, data.steps(), p);
    const auto truth = enumerate_paths(model, data.observations);
    EXPECT_NEAR(exact_log_likelihood(model, data.observations), truth.log_likelihood, 1e-10);
  }
}

TEST(JointFilter, BlocksFactorize) {
  const auto data = chmm::testing::simulated("scaling-4", 21);
  const sir::SirModel model(data.chickens, data.steps(), sir::reference_params());
  double sum = 0.0;
  for (int b = 0; b < model.layout().blocks(); ++b) {
    const auto pen = data.pen_subset(b);
    const sir::SirModel pen_model(pen.chickens, pen.steps(), sir::reference_params());
    const double pen_ll = exact_log_likelihood(pen_model, pen.observations);
    EXPECT_NEAR(joint_forward_filter(model, data.observations, b).log_likelihood, pen_ll, 1e-10);
    sum += pen_ll;
  }
  EXPECT_NEAR(exact_log_likelihood(model, data.observations), sum, 1e-9);
}

TEST(JointFilter, FilteredRowsAreDistributions) {
  const ToyModel model({{0, 0}, {0, 1}, {0, 0}}, 5);
  const auto y = chmm::testing::toy_observations(model, 3);
  const auto f = joint_forward_filter(model, y, 0);
  EXPECT_EQ(f.joint_states, 27u);
  for (int t = 0; t < 5; ++t) {
    double total = 0.0;
    for (double v : f.row(t)) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(JointFilter, RefusesAboveBudget) {
  const auto data = chmm::testing::simulated("scaling-16", 1);
  const sir::SirModel model(data.chickens, data.steps(), sir::reference_params());
  EXPECT_EQ(joint_state_count(model, 0), 43046721u);
  EXPECT_THROW(exact_log_likelihood(model, data.observations), BudgetExceeded);
  EXPECT_THROW(exact_log_likelihood(model, data.observations, 100), BudgetExceeded);
}

TEST(JointFfbs, DrawsFollowTheExactPosterior) {
  const ToyModel model({{0, 0}, {0, 1}}, 2);
  const auto y = chmm::testing::toy_observations(model, 8, 0.0);
  const double ll = exact_log_likelihood(model, y);
  Rng rng(2);
  const int n = 40000;
  std::map<std::vector<State>, int> counts;
  for (int i = 0; i < n; ++i) {
    const auto draw = joint_ffbs_sample(model, y, rng);
    EXPECT_NEAR(draw.log_density, log_complete_density(draw.x, y, model) - ll, 1e-10);
    std::vector<State> key;
    for (int k = 0; k < 2; ++k) {
      for (State s : draw.x.chain(k)) key.push_back(s);
    }
    ++counts[key];
  }
  for (const auto& [key, count] : counts) {
    Trajectories x(2, 2);
    for (int i = 0; i < 4; ++i) x.set(i / 2, i % 2, key[i]);
    const double p = std::exp(log_complete_density(x, y, model) - ll);
    EXPECT_NEAR(static_cast<double>(count) / n, p, 5.0 * std::sqrt(p * (1 - p) / n) + 1e-4);
  }
}
