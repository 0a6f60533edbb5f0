#include <gtest/gtest.h>

#include <cmath>

#include "chmm/exact.hpp"
#include "chmm/mcmc.hpp"
#include "support/oracles.hpp"
#include "support/sir_fixtures.hpp"

using namespace chmm;

namespace {

sir::SirFamily family_for(const sir::SirData& data, int model) {
  return sir::SirFamily(data.chickens, data.steps(), sir::ModelVariant::from_index(model));
}

}  // namespace

TEST(RobustCholesky, FactorsAndRepairs) {
  Eigen::MatrixXd m(2, 2);
  m << 4.0, 2.0, 2.0, 3.0;
  const auto l = robust_cholesky(m);
  EXPECT_NEAR((l * l.transpose() - m).norm(), 0.0, 1e-12);
  Eigen::MatrixXd singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;
  const auto ls = robust_cholesky(singular);
  EXPECT_NEAR((ls * ls.transpose() - singular).norm(), 0.0, 1e-6);
  Eigen::MatrixXd negative(1, 1);
  negative << -1.0;
  EXPECT_THROW(robust_cholesky(negative), std::runtime_error);
}

TEST(DefenseMixture, ZeroWeightIsThePrior) {
  const auto data = chmm::testing::two_bird_pen();
  const auto family = family_for(data, 1);
  const DefenseMixture mix(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3), 0.0);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> u(3);
    mix.sample(rng, family, u);
    EXPECT_NEAR(mix.log_density(u, family), family.log_prior(u), 1e-14);
  }
}

TEST(DefenseMixture, DensityIntegratesToOne) {
  // One-dimensional family slice: integrate the mixture over a fine grid.
  class OneDim final : public ModelFamily {
   public:
    int dimension() const override { return 1; }
    std::vector<std::string> parameter_names() const override { return {"x"}; }
    double log_prior(std::span<const double> u) const override { return u[0] - std::exp(u[0]); }
    void sample_prior(Rng& rng, std::span<double> u) const override { u[0] = std::log(-std::log(1.0 - rng.uniform())); }
    std::unique_ptr<CoupledModel> build(std::span<const double>) const override { return nullptr; }
  } family;
  for (double df : {0.0, 5.0}) {
    const DefenseMixture mix(Eigen::VectorXd::Constant(1, 0.4), Eigen::MatrixXd::Constant(1, 1, 0.3), 0.95, df);
    double total = 0.0, h = 1e-3;
    for (double x = -60.0; x < 60.0; x += h) {
      const double u[] = {x};
      total += std::exp(mix.log_density(u, family)) * h;
    }
    EXPECT_NEAR(total, 1.0, 2e-4) << "df=" << df;
  }
}

TEST(DefenseMixture, PositiveWherePriorIsPositive) {
  const auto family = family_for(chmm::testing::two_bird_pen(), 1);
  const DefenseMixture mix(Eigen::VectorXd::Constant(3, 0.5), 0.01 * Eigen::MatrixXd::Identity(3, 3), 0.95);
  for (double x : {-30.0, -3.0, 0.0, 2.0, 3.5}) {
    const std::vector<double> u = {x, -x, x};
    EXPECT_GT(mix.log_density(u, family), kLogZero);
  }
}

TEST(DefenseMixture, StudentTScaleMatchesCovariance) {
  const auto family = family_for(chmm::testing::two_bird_pen(), 1);
  Eigen::MatrixXd cov(3, 3);
  cov << 0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.2;
  const DefenseMixture mix(Eigen::Vector3d(0.1, -0.2, 0.3), cov, 1.0, 8.0);
  Rng rng(4);
  const int n = 100000;
  Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
  for (int i = 0; i < n; ++i) {
    std::vector<double> u(3);
    mix.sample(rng, family, u);
    const Eigen::Vector3d d = Eigen::Vector3d(u[0], u[1], u[2]) - mix.mean();
    acc += d * d.transpose();
  }
  EXPECT_LT(((acc / n) - cov).cwiseAbs().maxCoeff(), 0.02);
}

TEST(DefenseMixture, FitMatchesSampleMoments) {
  Rng rng(5);
  std::vector<std::vector<double>> samples;
  for (int i = 0; i < 400; ++i) samples.push_back({1.0 + rng.normal(), 2.0 * rng.normal()});
  const auto mix = fit_defense_mixture(samples, 0.95);
  EXPECT_NEAR(mix.mean()[0], 1.0, 0.2);
  EXPECT_NEAR(mix.covariance()(1, 1), 4.0, 0.8);
  EXPECT_EQ(mix.lambda(), 0.95);
  EXPECT_THROW(fit_defense_mixture(std::vector<std::vector<double>>(10, {0.0}), 0.95), std::invalid_argument);
}

TEST(Mcmc, PosteriorMeanMatchesQuadrature) {
  const auto data = chmm::testing::two_bird_pen();
  const auto family = family_for(data, 1);
  // Posterior mean of p by Gauss-Legendre over (p, beta, gamma) in prior-CDF coordinates.
  std::vector<double> x, w;
  chmm::testing::gauss_legendre01(24, x, w);
  double z = 0.0, m = 0.0;
  for (int i = 0; i < 24; ++i) {
    for (int j = 0; j < 24; ++j) {
      for (int l = 0; l < 24; ++l) {
        sir::SirParams p;
        p.p_N = p.p_T = x[i];
        p.beta_N = p.beta_T = -std::log1p(-x[j]);
        p.gamma_N = p.gamma_T = -std::log1p(-x[l]);
        p.nu_N = 1.0;
        const sir::SirModel model(data.chickens, data.steps(), p);
        const double lik = std::exp(exact_log_likelihood(model, data.observations)) * w[i] * w[j] * w[l];
        z += lik;
        m += lik * x[i];
      }
    }
  }
  McmcConfig cfg;
  cfg.iterations = 60000;
  Rng rng(6);
  const auto r = mcmc_joint(family, data.observations, cfg, rng);
  double mean_p = 0.0;
  for (const auto& u : r.theta) mean_p += sir::untransform(u, family.variant()).p_N;
  mean_p /= r.theta.size();
  EXPECT_NEAR(mean_p, m / z, 0.03);
  EXPECT_GE(r.acceptance_rate, 0.1);
  EXPECT_LE(r.acceptance_rate, 0.5);
  EXPECT_EQ(r.names, (std::vector<std::string>{"p", "beta", "gamma"}));
}

TEST(Mcmc, RejectsBadInitialVector) {
  const auto data = chmm::testing::two_bird_pen();
  const auto family = family_for(data, 1);
  Rng rng(1);
  EXPECT_THROW(mcmc_joint(family, data.observations, McmcConfig{}, rng, {0.0}), DimensionError);
}
