#include "chmm/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "chmm/iffbs.hpp"

namespace chmm {

Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& m) {
  const int d = static_cast<int>(m.rows());
  const double scale = std::max(m.diagonal().cwiseAbs().mean(), 1e-300);
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  for (double jitter = 0.0; jitter <= 1e-2 * scale; jitter = jitter == 0.0 ? 1e-12 * scale : jitter * 10.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(sym + jitter * Eigen::MatrixXd::Identity(d, d));
    if (llt.info() == Eigen::Success) return llt.matrixL();
  }
  throw std::runtime_error("covariance is not positive definite even after jitter");
}

McmcResult mcmc_joint(const ModelFamily& family, const ObservationGrid& y, const McmcConfig& config, Rng& rng,
                      std::vector<double> initial) {
  const int d = family.dimension();
  if (config.iterations < 1) throw std::invalid_argument("MCMC needs at least one iteration");
  if (initial.empty()) initial.assign(d, std::log(std::numbers::ln2));  // prior medians of both transforms
  if (static_cast<int>(initial.size()) != d) throw DimensionError("initial parameter vector has the wrong length");

  Eigen::VectorXd u = Eigen::Map<Eigen::VectorXd>(initial.data(), d);
  auto model = family.build(initial);
  EmissionTable emissions(*model, y);
  // The grid points at this copy; the layout does not depend on theta.
  const ChainLayout layout = model->layout();
  GridState grid(layout, model->num_states(), model->feasible_start(y));
  double log_target = log_complete_density(grid.x(), y, *model) + family.log_prior(initial);
  if (log_target == kLogZero) throw SupportError("MCMC start has zero posterior density");

  const int burn_in = static_cast<int>(config.burn_in_fraction * config.iterations);
  Eigen::MatrixXd chol = config.initial_step * Eigen::MatrixXd::Identity(d, d);
  double log_scale = 0.0;
  Eigen::VectorXd running_mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd running_m2 = Eigen::MatrixXd::Zero(d, d);
  int seen = 0;

  McmcResult result;
  result.names = family.parameter_names();
  result.theta.reserve(config.iterations - burn_in);
  int accepted_after = 0;
  std::vector<double> proposal(d);
  Eigen::VectorXd z(d);

  for (int it = 0; it < config.iterations; ++it) {
    for (int i = 0; i < d; ++i) z[i] = rng.normal();
    const Eigen::VectorXd cand = u + std::exp(log_scale) * (chol * z);
    std::copy(cand.data(), cand.data() + d, proposal.begin());
    double accept_prob = 0.0;
    const double prior = family.log_prior(proposal);
    std::unique_ptr<CoupledModel> cand_model;
    if (prior != kLogZero) {
      cand_model = family.build(proposal);
      const double cand_target = log_complete_density(grid.x(), y, *cand_model) + prior;
      if (cand_target != kLogZero) accept_prob = std::min(1.0, std::exp(cand_target - log_target));
    }
    const bool accept = rng.uniform() < accept_prob;
    if (accept) {
      u = cand;
      model = std::move(cand_model);
      emissions = EmissionTable(*model, y);
    }
    iffbs_sweep(*model, emissions, grid, rng, {}, config.random_sweep_order);
    std::vector<double> current(u.data(), u.data() + d);
    log_target = log_complete_density(grid.x(), y, *model) + family.log_prior(current);

    if (it < burn_in) {
      log_scale += std::min(0.05, 1.0 / std::sqrt(it + 1.0)) * (accept_prob - config.target_acceptance);
      ++seen;
      const Eigen::VectorXd delta = u - running_mean;
      running_mean += delta / seen;
      running_m2 += delta * (u - running_mean).transpose();
      if (seen >= config.adapt_start && seen % config.adapt_interval == 0) {
        const Eigen::MatrixXd cov = running_m2 / (seen - 1);
        chol = robust_cholesky(cov * (2.38 * 2.38 / d) + 1e-10 * Eigen::MatrixXd::Identity(d, d));
      }
    } else {
      result.theta.push_back(std::move(current));
      accepted_after += accept ? 1 : 0;
    }
  }
  result.acceptance_rate = result.theta.empty() ? 0.0 : static_cast<double>(accepted_after) / result.theta.size();
  result.final_log_scale = log_scale;
  return result;
}

DefenseMixture::DefenseMixture(Eigen::VectorXd mean, Eigen::MatrixXd covariance, double lambda, double t_df)
    : mean_(std::move(mean)), covariance_(std::move(covariance)), lambda_(lambda), t_df_(t_df) {
  if (!(lambda_ >= 0.0 && lambda_ <= 1.0)) throw std::invalid_argument("mixture weight must lie in [0,1]");
  if (t_df_ != 0.0 && !(t_df_ > 2.0)) throw std::invalid_argument("t component needs more than 2 degrees of freedom");
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size())
    throw DimensionError("mixture covariance does not match the mean");
  const Eigen::MatrixXd scale = t_df_ > 0.0 ? Eigen::MatrixXd(covariance_ * ((t_df_ - 2.0) / t_df_)) : covariance_;
  chol_ = robust_cholesky(scale);
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
}

double DefenseMixture::component_log_density(std::span<const double> u) const {
  const int d = dimension();
  if (static_cast<int>(u.size()) != d) throw DimensionError("parameter vector has the wrong length");
  const Eigen::VectorXd diff = Eigen::Map<const Eigen::VectorXd>(u.data(), d) - mean_;
  const double q = chol_.triangularView<Eigen::Lower>().solve(diff).squaredNorm();
  if (t_df_ > 0.0) {
    const double nu = t_df_;
    return std::lgamma(0.5 * (nu + d)) - std::lgamma(0.5 * nu) - 0.5 * d * std::log(nu * std::numbers::pi) -
           0.5 * log_det_ - 0.5 * (nu + d) * std::log1p(q / nu);
  }
  return -0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * log_det_ - 0.5 * q;
}

double DefenseMixture::log_density(std::span<const double> u, const ModelFamily& family) const {
  const double prior = family.log_prior(u);
  if (lambda_ == 0.0) return prior;
  const double comp = component_log_density(u);
  if (lambda_ == 1.0) return comp;
  const double terms[2] = {std::log(lambda_) + comp, std::log1p(-lambda_) + prior};
  return log_sum_exp(terms);
}

void DefenseMixture::sample(Rng& rng, const ModelFamily& family, std::span<double> u) const {
  const int d = dimension();
  if (static_cast<int>(u.size()) != d) throw DimensionError("parameter vector has the wrong length");
  if (rng.uniform() >= lambda_) {
    family.sample_prior(rng, u);
    return;
  }
  Eigen::VectorXd z(d);
  for (int i = 0; i < d; ++i) z[i] = rng.normal();
  double stretch = 1.0;
  if (t_df_ > 0.0) {
    std::chi_squared_distribution<double> chi2(t_df_);
    stretch = std::sqrt(t_df_ / chi2(rng));
  }
  const Eigen::VectorXd draw = mean_ + stretch * (chol_ * z);
  std::copy(draw.data(), draw.data() + d, u.begin());
}

DefenseMixture fit_defense_mixture(const std::vector<std::vector<double>>& samples, double lambda, double t_df) {
  if (samples.size() < 100) throw std::invalid_argument("fitting the mixture needs at least 100 samples");
  const int d = static_cast<int>(samples.front().size());
  const int n = static_cast<int>(samples.size());
  Eigen::MatrixXd data(n, d);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(samples[i].size()) != d) throw DimensionError("ragged parameter samples");
    for (int j = 0; j < d; ++j) data(i, j) = samples[i][j];
  }
  const Eigen::VectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
  return DefenseMixture(mean, cov, lambda, t_df);
}

}  // namespace chmm
