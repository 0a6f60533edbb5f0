#ifndef CHMM_SIMULATE_HPP
#define CHMM_SIMULATE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "chmm/core.hpp"
#include "chmm/sir.hpp"

namespace chmm::sir {

struct PenDesign {
  int size = 17;
  int challenge = 5;
  bool challenge_transgenic = false;
  bool contact_transgenic = false;
};

struct ExperimentDesign {
  std::string name;
  std::vector<PenDesign> pens;
  int steps = 20;
  /// Probability that an I -> R death is preceded by extraction of the
  /// moribund bird one half-day earlier.
  double moribund_prob = 0.5;

  /// Throws std::invalid_argument on an inconsistent design.
  void validate() const;
};

/// "hpai-cross" or "scaling-{4,8,16,32,64}"; throws std::invalid_argument otherwise.
ExperimentDesign preset_design(const std::string& name);
std::vector<std::string> preset_names();

struct SimulatedExperiment {
  SirData data;
  Trajectories truth;
};

/// Forward-simulates every pen from its own RNG stream of `seed`. Parameters
/// are tied to `variant` first. Deaths are recorded as D at the death step and
/// missing afterwards; an extracted moribund bird is recorded as M at the step
/// before its death, and its death step is missing in the data.
SimulatedExperiment simulate_experiment(const ExperimentDesign& design, const SirParams& params,
                                        const ModelVariant& variant, std::uint64_t seed);

}  // namespace chmm::sir

#endif  // CHMM_SIMULATE_HPP
