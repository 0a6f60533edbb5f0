#ifndef CHMM_IFFBS_HPP
#define CHMM_IFFBS_HPP

#include <span>
#include <vector>

#include "chmm/core.hpp"
#include "chmm/random.hpp"

namespace chmm {

/// A trajectory grid together with the two count tables IFFBS needs: the
/// per-time summaries of present chains and, per (t, block), the number of
/// chains of each kind making each non-frozen transition t -> t+1.
/// The layout must outlive the state.
class GridState {
 public:
  GridState() = default;
  GridState(const ChainLayout& layout, int num_states, Trajectories x);

  const Trajectories& x() const { return x_; }
  const SummaryStatistics& summary() const { return summary_; }
  const ChainLayout& layout() const { return *layout_; }
  int states() const { return S_; }

  /// Transition counts laid out [kind][from][to].
  std::span<const int> transitions(int t, int b) const {
    return {trans_.data() + trans_offset(t, b), static_cast<std::size_t>(trans_stride())};
  }

  /// Replaces chain k's path, keeping both count tables in step. O(T).
  void set_chain(int k, std::span<const State> path);

  /// True when both count tables equal a full recount.
  bool counts_consistent() const;

 private:
  int trans_stride() const { return layout_->kinds() * S_ * S_; }
  std::size_t trans_offset(int t, int b) const {
    return (static_cast<std::size_t>(t) * layout_->blocks() + b) * trans_stride();
  }
  void apply_chain(int k, int sign);

  const ChainLayout* layout_ = nullptr;
  int S_ = 0;
  Trajectories x_;
  SummaryStatistics summary_;
  std::vector<int> trans_;
};

/// Modified forward quantities for one chain given every other chain.
struct ChainConditional {
  int chain = 0;
  int steps = 0;
  int states = 0;
  /// T x S normalized filtered rows.
  std::vector<double> filtered;
  /// T x S predictive rows; the first is the initial distribution.
  std::vector<double> predictive;
  /// T x S log of the other-chain factor; the last row is zero.
  std::vector<double> log_other;
  /// (T-1) x S x S transition kernels of the chain itself.
  std::vector<double> own;

  std::span<const double> filtered_row(int t) const { return {filtered.data() + t * states, std::size_t(states)}; }
  std::span<const double> predictive_row(int t) const {
    return {predictive.data() + t * states, std::size_t(states)};
  }
  std::span<const double> log_other_row(int t) const { return {log_other.data() + t * states, std::size_t(states)}; }
  double own_transition(int t, int from, int to) const {
    return own[(static_cast<std::size_t>(t) * states + from) * states + to];
  }
};

/// Computes the modified forward pass for chain k; chain k's current values
/// in `grid` are ignored. Returns false if some filtered row is all zero.
bool try_forward_pass(const CoupledModel& model, const EmissionTable& emissions, const GridState& grid, int k,
                      ChainConditional& out);

/// As try_forward_pass; throws SupportError on an all-zero row.
ChainConditional modified_forward_pass(const CoupledModel& model, const EmissionTable& emissions,
                                       const GridState& grid, int k);

/// Backward-samples a path from a completed forward pass. Steps at and after
/// `clamp_from` keep the values already in `path`. Returns the log density of
/// the sampled part.
double backward_sample(const ChainConditional& cond, Rng& rng, std::span<State> path, int clamp_from);

/// Exact log density of `path` under the chain's full conditional.
double path_log_density(const ChainConditional& cond, std::span<const State> path);

/// Draws chain k from its full conditional, writes it into `grid`, and
/// returns the log density of the draw. Steps at and after `clamp_from` are
/// held fixed. Throws SupportError on zero support.
double iffbs_chain_update(const CoupledModel& model, const EmissionTable& emissions, GridState& grid, int k,
                          Rng& rng, int clamp_from = -1);

/// One Gibbs sweep over `chains` (all chains, in index order, when empty).
/// Returns the summed log densities of the chain draws.
double iffbs_sweep(const CoupledModel& model, const EmissionTable& emissions, GridState& grid, Rng& rng,
                   std::span<const int> chains = {}, bool random_order = false);

}  // namespace chmm

#endif  // CHMM_IFFBS_HPP
