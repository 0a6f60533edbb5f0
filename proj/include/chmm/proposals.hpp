#ifndef CHMM_PROPOSALS_HPP
#define CHMM_PROPOSALS_HPP

#include <span>
#include <vector>

#include "chmm/core.hpp"
#include "chmm/iffbs.hpp"
#include "chmm/random.hpp"

namespace chmm {

/// ESS of normalized weights, 1 / sum(w^2). Throws std::invalid_argument if
/// the weights are negative or do not sum to one within 1e-9.
double ess(std::span<const double> weights);

/// Posterior trajectory samples with one normalized weight vector per block.
/// Blocks never interact, so each block's weights only track how well the
/// samples of that block agree with what has been proposed in it.
struct GuidingEnsemble {
  std::vector<GridState> samples;
  std::vector<std::vector<double>> weights;

  int size() const { return static_cast<int>(samples.size()); }
  double ess(int block) const { return chmm::ess(weights[block]); }
  void reset_weights(int block);
};

/// N IFFBS sweeps after `burn_in` sweeps from the model's feasible start,
/// keeping every sweep. Weights start uniform.
GuidingEnsemble generate_guiding_samples(const CoupledModel& model, const EmissionTable& emissions,
                                         const ObservationGrid& y, int n, int burn_in, Rng& rng);

/// Index of the sample with the largest complete-data density; lowest index on ties.
int select_high_posterior(const GuidingEnsemble& ensemble, const ObservationGrid& y, const CoupledModel& model);

struct ProposalDraw {
  Trajectories x;
  /// Exact log density of the draw under the proposal.
  double log_q = 0.0;
};

/// One IFFBS sweep started from `x_tilde`: chain k is drawn given the chains
/// already proposed and x_tilde for the rest.
ProposalDraw diffbs_propose(const Trajectories& x_tilde, const CoupledModel& model, const EmissionTable& emissions,
                            Rng& rng);

/// Rebuilds block `block`'s samples for the chains from position `from` of the
/// block onward, conditional on the chains before it in `base`. Starts from
/// `base`, runs `refresh_sweeps` sweeps, then keeps one sample per sweep.
/// When `clamp_chain` >= 0 that chain is only resampled before `clamp_from`.
void regenerate(GuidingEnsemble& ensemble, const GridState& base, int block, int from, const CoupledModel& model,
                const EmissionTable& emissions, Rng& rng, int refresh_sweeps, int clamp_chain = -1,
                int clamp_from = -1);

struct MiffbsOptions {
  /// Regenerate when a block's ESS drops below this; negative means N/2.
  double regen_threshold = -1.0;
  int refresh_sweeps = 2;
  /// Also check the ESS before every backward step, not only at chain starts.
  bool per_step_regeneration = false;
  /// Draw the last chain of each block from its single full conditional.
  bool full_conditional_last = true;
};

struct MiffbsDiagnostics {
  int regenerations = 0;
  /// ESS of the chain's block at the start of each chain, in proposal order.
  std::vector<double> chain_start_ess;
};

/// One MIFFBS draw. The ensemble is consumed: proposed chains are written
/// into every sample and weights are updated in place.
ProposalDraw miffbs_propose(GuidingEnsemble& ensemble, const CoupledModel& model, const EmissionTable& emissions,
                            Rng& rng, const MiffbsOptions& options = {}, MiffbsDiagnostics* diagnostics = nullptr);

}  // namespace chmm

#endif  // CHMM_PROPOSALS_HPP
