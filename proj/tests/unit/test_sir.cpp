#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "chmm/simulate.hpp"
#include "chmm/sir.hpp"
#include "support/oracles.hpp"
#include "support/sir_fixtures.hpp"

using namespace chmm;
using namespace chmm::sir;

TEST(ModelVariant, TableNumbering) {
  EXPECT_EQ(ModelVariant::from_index(1), ModelVariant{});
  EXPECT_EQ(ModelVariant::from_index(16), (ModelVariant{true, true, true, true}));
  EXPECT_EQ(ModelVariant::from_index(3), (ModelVariant{false, true, false, false}));
  EXPECT_THROW(ModelVariant::from_index(0), std::invalid_argument);
  EXPECT_THROW(ModelVariant::from_index(17), std::invalid_argument);
}

TEST(ModelVariant, BijectionAndParameterCounts) {
  std::vector<ModelVariant> seen;
  for (int m = 1; m <= 16; ++m) {
    const auto v = ModelVariant::from_index(m);
    EXPECT_EQ(v.index(), m);
    EXPECT_EQ(std::find(seen.begin(), seen.end(), v), seen.end());
    seen.push_back(v);
    EXPECT_EQ(static_cast<int>(v.parameter_names().size()), v.free_parameter_count());
    EXPECT_EQ(v.free_parameter_count(), 3 + v.split_p + v.split_beta + v.has_nu + v.split_gamma);
  }
  EXPECT_EQ(ModelVariant::from_index(1).free_parameter_count(), 3);
  EXPECT_EQ(ModelVariant::from_index(16).free_parameter_count(), 7);
}

TEST(SirParams, TyingObeysVariant) {
  const SirParams p{0.9, 0.8, 2.3, 1.4, 1.2, 0.5, 0.3};
  const auto t = p.tied(ModelVariant::from_index(1));
  EXPECT_EQ(t.p_T, t.p_N);
  EXPECT_EQ(t.beta_T, t.beta_N);
  EXPECT_EQ(t.gamma_T, t.gamma_N);
  EXPECT_EQ(t.nu_N, 1.0);
  EXPECT_TRUE(t.satisfies(ModelVariant::from_index(1)));
  EXPECT_TRUE(p.satisfies(ModelVariant::from_index(16)));
  EXPECT_FALSE(p.satisfies(ModelVariant::from_index(3)));
}

TEST(Transform, RoundTripsEveryVariant) {
  Rng rng(12);
  for (int m = 1; m <= 16; ++m) {
    const auto v = ModelVariant::from_index(m);
    SirFamily family({}, 1, v);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> u(v.free_parameter_count());
      family.sample_prior(rng, u);
      const auto p = untransform(u, v);
      EXPECT_TRUE(p.satisfies(v));
      const auto back = transform(p, v);
      for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(back[i], u[i], 1e-9 * std::max(1.0, std::abs(u[i])));
    }
  }
}

TEST(Transform, TransformedPriorIntegratesToOne) {
  // Each coordinate has density exp(x - e^x); integrate it by the trapezoid rule.
  const auto v = ModelVariant::from_index(1);
  double total = 0.0;
  const double h = 1e-3;
  for (double x = -40.0; x < 5.0; x += h) {
    const double u[] = {x, 0.0, 0.0};
    total += std::exp(prior_log_density_transformed(u, v) - 2.0 * (0.0 - 1.0)) * h;
  }
  EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(Transform, TransformedPriorMatchesChangeOfVariables) {
  const auto v = ModelVariant::from_index(16);
  Rng rng(5);
  SirFamily family({}, 1, v);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> u(7);
    family.sample_prior(rng, u);
    const auto p = untransform(u, v);
    // Jacobians: |dp/dx| = p * e^x for p = exp(-e^x); |dr/dx| = r.
    double log_jac = 0.0;
    for (int i = 0; i < 7; ++i) {
      const bool prob = v.parameter_names()[i][0] == 'p';
      log_jac += prob ? std::log(std::exp(-std::exp(u[i]))) + u[i] : u[i];
    }
    EXPECT_NEAR(prior_log_density_transformed(u, v), prior_log_density(p, v) + log_jac, 1e-9);
  }
}

TEST(Prior, SupportAndValues) {
  const auto v = ModelVariant::from_index(1);
  SirParams p;
  p.p_N = p.p_T = 0.3;
  p.beta_N = p.beta_T = 2.0;
  p.gamma_N = p.gamma_T = 0.5;
  EXPECT_NEAR(prior_log_density(p, v), -2.5, 1e-12);
  p.p_N = p.p_T = 1.5;
  EXPECT_EQ(prior_log_density(p, v), kLogZero);
  p.p_N = p.p_T = 0.3;
  p.beta_N = p.beta_T = -1.0;
  EXPECT_EQ(prior_log_density(p, v), kLogZero);
}

TEST(TransitionMatrix, AnalyticEntries) {
  const auto m = half_day_transition_matrix(0.8, 0.3);
  EXPECT_NEAR(m[0], std::exp(-0.4), 1e-15);
  EXPECT_NEAR(m[4], std::exp(-0.15), 1e-15);
  EXPECT_NEAR(m[5], 1.0 - std::exp(-0.15), 1e-15);
  EXPECT_NEAR(m[1], 0.8 / (0.3 - 0.8) * (std::exp(-0.4) - std::exp(-0.15)), 1e-14);
  EXPECT_EQ(m[8], 1.0);
  EXPECT_EQ(m[3], 0.0);
}

TEST(TransitionMatrix, MatchesMatrixExponential) {
  Rng rng(77);
  for (int rep = 0; rep < 20000; ++rep) {
    const double a = rep % 4 == 0 ? 0.0 : 10.0 * rng.uniform();
    const double g = rep % 5 == 0 ? a : 10.0 * rng.uniform();
    const auto m = half_day_transition_matrix(a, g);
    const auto oracle = chmm::testing::expm_half_day(a, g);
    for (int i = 0; i < 9; ++i) ASSERT_NEAR(m[i], oracle[i], 1e-10) << "a=" << a << " g=" << g;
    for (int r = 0; r < 3; ++r) EXPECT_NEAR(m[r * 3] + m[r * 3 + 1] + m[r * 3 + 2], 1.0, 1e-12);
  }
}

TEST(TransitionMatrix, ContinuousAcrossEqualRates) {
  for (double g : {1e-6, 0.3, 1.0, 7.5}) {
    const auto at = half_day_transition_matrix(g, g);
    for (double d : {1e-12, 1e-10, 1e-9, 2e-9, 1e-7}) {
      const auto above = half_day_transition_matrix(g + d, g);
      const auto below = half_day_transition_matrix(std::max(0.0, g - d), g);
      for (int i = 0; i < 9; ++i) {
        EXPECT_NEAR(above[i], at[i], 1e-6);
        EXPECT_NEAR(below[i], at[i], 1e-6);
      }
    }
  }
}

TEST(TransitionMatrix, RejectsNegativeRates) {
  EXPECT_THROW(half_day_transition_matrix(-1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(half_day_transition_matrix(1.0, std::nan("")), std::invalid_argument);
}

TEST(ForceOfInfection, FrequencyDependentWithSusceptibility) {
  SirParams p{0.5, 0.5, 2.0, 1.0, 1.5, 1.0, 1.0};
  EXPECT_EQ(force_of_infection(0, 0, false, 17, p), 0.0);
  EXPECT_NEAR(force_of_infection(2, 1, false, 10, p), 1.5 / 10 * (2 * 2.0 + 1 * 1.0), 1e-15);
  EXPECT_NEAR(force_of_infection(2, 1, true, 10, p), 1.0 / 10 * (2 * 2.0 + 1 * 1.0), 1e-15);
}

TEST(InitialDistribution, ChallengeOnly) {
  const SirParams p{0.9, 0.8, 1, 1, 1, 1, 1};
  ChickenMeta c;
  c.challenge = true;
  c.transgenic = true;
  EXPECT_NEAR(initial_distribution(c, p)[1], 0.8, 1e-15);
  c.challenge = false;
  EXPECT_EQ(initial_distribution(c, p)[0], 1.0);
}

TEST(Emission, DegenerateObservationModel) {
  EXPECT_EQ(emission_log_prob(kMissing, kRemoved), 0.0);
  EXPECT_EQ(emission_log_prob(kAlive, kSusceptible), 0.0);
  EXPECT_EQ(emission_log_prob(kAlive, kRemoved), kLogZero);
  EXPECT_EQ(emission_log_prob(kDead, kRemoved), 0.0);
  EXPECT_EQ(emission_log_prob(kDead, kInfectious), kLogZero);
  EXPECT_EQ(emission_log_prob(kMoribundRemoved, kInfectious), 0.0);
  EXPECT_EQ(emission_log_prob(kMoribundRemoved, kSusceptible), kLogZero);
}

TEST(SirModel, KernelsMatchDirectFormula) {
  const auto sim = simulate_experiment(preset_design("scaling-8"), reference_params(), ModelVariant::from_index(16), 3);
  const auto params = reference_params();
  const SirModel model(sim.data.chickens, sim.data.steps(), params);
  Rng rng(1);
  std::vector<double> prob(9), logp(9);
  for (int rep = 0; rep < 500; ++rep) {
    const int kind = rep % 2;
    std::vector<int> counts(6, 0);
    const int n_inf = static_cast<int>(rng.uniform() * 5), t_inf = static_cast<int>(rng.uniform() * 4);
    counts[kNonTransgenic * 3 + kInfectious] = n_inf;
    counts[kTransgenic * 3 + kInfectious] = t_inf;
    counts[kind * 3 + kSusceptible] += 1;
    model.transition(0, kind, 0, counts, prob, logp);
    const double a = force_of_infection(n_inf, t_inf, kind == kTransgenic, 8, params);
    const auto direct = half_day_transition_matrix(a, kind == kTransgenic ? params.gamma_T : params.gamma_N);
    for (int i = 0; i < 9; ++i) {
      EXPECT_NEAR(prob[i], direct[i], 1e-14);
      if (direct[i] > 0.0) {
        EXPECT_NEAR(logp[i], std::log(direct[i]), 1e-12);
      }
    }
  }
}

TEST(SirModel, DensityInvariantUnderSwappingIdenticalChickens) {
  const auto sim = simulate_experiment(preset_design("scaling-8"), reference_params(), ModelVariant::from_index(16), 8);
  auto data = sim.data;
  // Two contact birds of the same pen and type; swap their rows.
  int a = -1, b = -1;
  for (int k = 0; k < data.chickens_count() && b < 0; ++k) {
    for (int j = k + 1; j < data.chickens_count(); ++j) {
      const auto& ck = data.chickens[k];
      const auto& cj = data.chickens[j];
      if (ck.pen == cj.pen && ck.transgenic == cj.transgenic && !ck.challenge && !cj.challenge) {
        a = k, b = j;
        break;
      }
    }
  }
  ASSERT_GE(b, 0);
  const SirModel model(data.chickens, data.steps(), reference_params());
  const double before = log_complete_density(sim.truth, data.observations, model);
  auto chickens = data.chickens;
  std::swap(chickens[a], chickens[b]);
  auto y = data.observations;
  auto x = sim.truth;
  for (int t = 0; t < y.steps(); ++t) {
    const int ya = y(a, t);
    y.set(a, t, y(b, t));
    y.set(b, t, ya);
    const State xa = x(a, t);
    x.set(a, t, x(b, t));
    x.set(b, t, xa);
  }
  const SirModel swapped(chickens, data.steps(), reference_params());
  EXPECT_NEAR(log_complete_density(x, y, swapped), before, 1e-10);
}

TEST(SirModel, FeasibleStartAlwaysHasPositiveDensity) {
  for (int s = 0; s < 600; ++s) {
    Rng rng(s);
    const auto v = ModelVariant::from_index(1 + s % 16);
    SirFamily family({}, 1, v);
    std::vector<double> u(v.free_parameter_count());
    family.sample_prior(rng, u);
    const auto p = untransform(u, v);
    const char* preset = s % 3 == 0 ? "scaling-4" : (s % 3 == 1 ? "scaling-8" : "hpai-cross");
    const auto sim = simulate_experiment(preset_design(preset), p, v, s);
    const SirModel model(sim.data.chickens, sim.data.steps(), p);
    Trajectories x;
    ASSERT_NO_THROW(x = model.feasible_start(sim.data.observations)) << "seed " << s;
    EXPECT_GT(log_complete_density(x, sim.data.observations, model), kLogZero);
  }
}

TEST(SirData, ValidationCatchesInconsistentRecords) {
  auto data = simulate_experiment(preset_design("scaling-4"), reference_params(), ModelVariant::from_index(16), 2).data;
  EXPECT_NO_THROW(data.validate());
  auto bad = data;
  bad.chickens[0].pen_size = 3;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = data;
  for (int t = 0; t < bad.steps(); ++t) bad.observations.set(1, t, kAlive);
  bad.observations.set(1, 3, kDead);
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(SirData, MoribundRecordImpliesRemovalAtTheNextStep) {
  const auto data = chmm::testing::sir_data({"C,1,0,1,AM."});
  EXPECT_EQ(data.chickens[0].last_present, 2);
  EXPECT_EQ(data.chickens[0].implied_removal, 2);
  SirParams p = reference_params();
  const SirModel model(data.chickens, 3, p);
  EXPECT_EQ(model.emission_log_prob(0, 2, kMissing, kInfectious), kLogZero);
  EXPECT_EQ(model.emission_log_prob(0, 2, kMissing, kRemoved), 0.0);
  // Alone in its pen the bird must start infectious, stay I, then be removed.
  const double expected = std::log(p.p_N) - 0.5 * p.gamma_N + std::log1p(-std::exp(-0.5 * p.gamma_N));
  EXPECT_NEAR(exact_log_likelihood(model, data.observations), expected, 1e-12);
  // An M in the last column has no step to imply.
  const auto edge = chmm::testing::sir_data({"C,1,0,1,AAM"});
  EXPECT_EQ(edge.chickens[0].implied_removal, -1);
  EXPECT_EQ(edge.chickens[0].last_present, 2);
  EXPECT_THROW(chmm::testing::sir_data({"C,1,0,1,AMA"}), std::invalid_argument);
}

TEST(SirData, PenSubsetKeepsPenMembers) {
  const auto data =
      simulate_experiment(preset_design("scaling-4"), reference_params(), ModelVariant::from_index(16), 2).data;
  EXPECT_EQ(data.pens(), 4);
  const auto pen = data.pen_subset(2);
  EXPECT_EQ(pen.chickens_count(), 4);
  for (const auto& c : pen.chickens) EXPECT_EQ(c.pen, 3);
  EXPECT_NO_THROW(pen.validate());
}
