#ifndef CHMM_MCMC_HPP
#define CHMM_MCMC_HPP

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "chmm/core.hpp"
#include "chmm/family.hpp"
#include "chmm/random.hpp"

namespace chmm {

struct McmcConfig {
  int iterations = 10000;
  double burn_in_fraction = 0.2;
  /// Iterations before the empirical covariance replaces the initial proposal.
  int adapt_start = 200;
  int adapt_interval = 50;
  double target_acceptance = 0.234;
  double initial_step = 0.1;
  bool random_sweep_order = false;
};

struct McmcResult {
  /// Post-burn-in draws of the transformed parameters, one row per iteration.
  std::vector<std::vector<double>> theta;
  std::vector<std::string> names;
  double acceptance_rate = 0.0;
  double final_log_scale = 0.0;
};

/// Metropolis-within-Gibbs on p(theta, X | Y): an adaptive random-walk move on
/// the transformed parameters alternates with one IFFBS sweep of X. The
/// proposal covariance and scale adapt during burn-in only.
McmcResult mcmc_joint(const ModelFamily& family, const ObservationGrid& y, const McmcConfig& config, Rng& rng,
                      std::vector<double> initial = {});

/// lambda * Gaussian (or Student t) + (1 - lambda) * prior, on the transformed
/// parameters. The prior component is the family's prior density with the
/// transform's Jacobian, so both components live on the same space.
class DefenseMixture {
 public:
  DefenseMixture(Eigen::VectorXd mean, Eigen::MatrixXd covariance, double lambda, double t_df = 0.0);

  int dimension() const { return static_cast<int>(mean_.size()); }
  double lambda() const { return lambda_; }
  /// Degrees of freedom of the heavy-tailed component; 0 selects the Gaussian.
  double t_df() const { return t_df_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }

  double component_log_density(std::span<const double> u) const;
  double log_density(std::span<const double> u, const ModelFamily& family) const;
  void sample(Rng& rng, const ModelFamily& family, std::span<double> u) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  /// Lower Cholesky factor of the component's scale matrix.
  Eigen::MatrixXd chol_;
  double log_det_ = 0.0;
  double lambda_;
  double t_df_;
};

/// Moment-matches the component to `samples` (at least 100 rows). A t
/// component gets scale covariance * (df - 2) / df so its covariance matches.
DefenseMixture fit_defense_mixture(const std::vector<std::vector<double>>& samples, double lambda,
                                   double t_df = 0.0);

/// Cholesky factor of `m`, adding diagonal jitter until it succeeds.
/// Throws std::runtime_error if no jitter up to 1e-2 * mean diagonal works.
Eigen::MatrixXd robust_cholesky(const Eigen::MatrixXd& m);

}  // namespace chmm

#endif  // CHMM_MCMC_HPP
