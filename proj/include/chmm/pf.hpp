#ifndef CHMM_PF_HPP
#define CHMM_PF_HPP

#include <string>
#include <vector>

#include "chmm/core.hpp"
#include "chmm/random.hpp"

namespace chmm {

struct PfResult {
  /// Estimate of log p(Y | theta); kLogZero if every particle died.
  double log_likelihood = 0.0;
  std::vector<double> block_log_likelihood;
  /// Empty unless the particle system degenerated.
  std::string diagnostic;
};

/// Particle filter over half-day steps, run independently per block. Each
/// step proposes every chain from its transition row restricted by the next
/// observation (p(x_{t+1} | x_t) e_{t+1}(x_{t+1}), normalized) and weights the
/// particle by the mass that restriction removed. Systematic resampling every
/// step. The first step is sampled exactly from p(x_1 | y_1).
PfResult pf_loglik(const CoupledModel& model, const ObservationGrid& y, int n_particles, Rng& rng);

}  // namespace chmm

#endif  // CHMM_PF_HPP
