#include <gtest/gtest.h>

#include <cmath>

#include "chmm/evidence.hpp"
#include "chmm/exact.hpp"
#include "chmm/pf.hpp"
#include "support/sir_fixtures.hpp"
#include "support/toy_model.hpp"

using namespace chmm;
using chmm::testing::ToyModel;

TEST(ParticleFilter, SingleStepIsExact) {
  const ToyModel model({{0, 0}, {0, 1}, {1, 0}}, 1);
  const auto y = chmm::testing::toy_observations(model, 2, 0.0);
  Rng rng(1);
  const auto r = pf_loglik(model, y, 10, rng);
  EXPECT_NEAR(r.log_likelihood, exact_log_likelihood(model, y), 1e-12);
  EXPECT_EQ(r.block_log_likelihood.size(), 2u);
}

TEST(ParticleFilter, UnbiasedOnToy) {
  const ToyModel model({{0, 0}, {0, 1}, {0, 0}, {1, 1}}, 5);
  const auto y = chmm::testing::toy_observations(model, 3);
  const double truth = exact_log_likelihood(model, y);
  Rng rng(2);
  std::vector<double> lw;
  for (int i = 0; i < 3000; ++i) lw.push_back(pf_loglik(model, y, 20, rng).log_likelihood);
  const auto s = summarize_log_weights(lw);
  EXPECT_LT(std::abs(std::expm1(s.log_mean - truth) / s.se_log), 4.0);
}

TEST(ParticleFilter, BlockEstimatesSumToTotal) {
  const auto data = chmm::testing::simulated("scaling-4", 4);
  const sir::SirModel model(data.chickens, data.steps(), sir::reference_params());
  Rng rng(3);
  const auto r = pf_loglik(model, data.observations, 200, rng);
  double sum = 0.0;
  for (double b : r.block_log_likelihood) sum += b;
  EXPECT_NEAR(sum, r.log_likelihood, 1e-9);
  EXPECT_NEAR(r.log_likelihood, exact_log_likelihood(model, data.observations), 0.5);
}

TEST(ParticleFilter, RejectsNonPositiveParticleCount) {
  const ToyModel model({{0, 0}}, 2);
  Rng rng(1);
  EXPECT_THROW(pf_loglik(model, ObservationGrid(1, 2), 0, rng), std::invalid_argument);
}
