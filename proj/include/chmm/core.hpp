#ifndef CHMM_CORE_HPP
#define CHMM_CORE_HPP

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chmm {

using State = std::uint8_t;

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();
inline constexpr int kMissing = -1;

/// Raised when a configuration has zero probability under the model
/// (an all-zero filtered row, an infeasible start, a failed proposal).
class SupportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

double log_sum_exp(std::span<const double> values);

/// Per-chain state space shared by every chain.
class StateSpace {
 public:
  explicit StateSpace(std::vector<std::string> labels);

  int size() const { return static_cast<int>(labels_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(int s) const { return labels_.at(s); }

 private:
  std::vector<std::string> labels_;
};

/// K x T grid of hidden states, row-major by chain.
class Trajectories {
 public:
  Trajectories() = default;
  Trajectories(int chains, int steps, State fill = 0);

  int chains() const { return chains_; }
  int steps() const { return steps_; }

  State operator()(int k, int t) const { return data_[index(k, t)]; }
  void set(int k, int t, State s) { data_[index(k, t)] = s; }

  std::span<const State> chain(int k) const {
    return {data_.data() + static_cast<std::size_t>(k) * steps_, static_cast<std::size_t>(steps_)};
  }
  std::span<State> chain(int k) {
    return {data_.data() + static_cast<std::size_t>(k) * steps_, static_cast<std::size_t>(steps_)};
  }

  /// Throws DimensionError if any entry is outside [0, num_states).
  void validate(int num_states) const;

  bool operator==(const Trajectories&) const = default;

 private:
  std::size_t index(int k, int t) const { return static_cast<std::size_t>(k) * steps_ + t; }

  int chains_ = 0;
  int steps_ = 0;
  std::vector<State> data_;
};

/// K x T grid of observation symbols; kMissing marks censored cells.
class ObservationGrid {
 public:
  ObservationGrid() = default;
  ObservationGrid(int chains, int steps, int fill = kMissing);

  int chains() const { return chains_; }
  int steps() const { return steps_; }

  int operator()(int k, int t) const { return data_[static_cast<std::size_t>(k) * steps_ + t]; }
  void set(int k, int t, int symbol) { data_[static_cast<std::size_t>(k) * steps_ + t] = symbol; }
  bool missing(int k, int t) const { return (*this)(k, t) == kMissing; }

  bool operator==(const ObservationGrid&) const = default;

 private:
  int chains_ = 0;
  int steps_ = 0;
  std::vector<int> data_;
};

/// Opaque per-chain metadata the core algorithms need. `block` is the
/// interaction unit (chains in different blocks never influence each other),
/// `kind` selects the transition kernel within a block, and the chain takes
/// part in its block's summary up to and including `last_present`. After that
/// step the chain is frozen: it keeps its state and has no further
/// transitions.
struct ChainInfo {
  int block = 0;
  int kind = 0;
  int last_present = std::numeric_limits<int>::max();
};

class ChainLayout {
 public:
  ChainLayout() = default;
  ChainLayout(std::vector<ChainInfo> chains, int num_kinds);

  int chains() const { return static_cast<int>(chains_.size()); }
  int blocks() const { return num_blocks_; }
  int kinds() const { return num_kinds_; }
  const ChainInfo& operator[](int k) const { return chains_[k]; }
  const std::vector<int>& block_members(int b) const { return members_[b]; }

  bool present(int k, int t) const { return t <= chains_[k].last_present; }
  /// True when the transition t -> t+1 of chain k is the frozen identity.
  bool frozen_after(int k, int t) const { return t + 1 > chains_[k].last_present; }

 private:
  std::vector<ChainInfo> chains_;
  std::vector<std::vector<int>> members_;
  int num_blocks_ = 0;
  int num_kinds_ = 1;
};

/// Per-time counts of present chains by (block, kind, state).
class SummaryStatistics {
 public:
  SummaryStatistics() = default;
  SummaryStatistics(int steps, int blocks, int kinds, int states);

  int steps() const { return steps_; }
  int stride() const { return kinds_ * states_; }

  /// Counts for one block at time t, laid out [kind][state].
  std::span<const int> block(int t, int b) const {
    return {counts_.data() + offset(t, b), static_cast<std::size_t>(stride())};
  }
  int count(int t, int b, int kind, int s) const { return counts_[offset(t, b) + kind * states_ + s]; }

  /// Total present chains in block b at time t.
  int present_in_block(int t, int b) const;

  void add(int t, int b, int kind, int s, int delta) { counts_[offset(t, b) + kind * states_ + s] += delta; }

  bool operator==(const SummaryStatistics&) const = default;

 private:
  std::size_t offset(int t, int b) const {
    return (static_cast<std::size_t>(t) * blocks_ + b) * static_cast<std::size_t>(stride());
  }

  int steps_ = 0;
  int blocks_ = 0;
  int kinds_ = 0;
  int states_ = 0;
  std::vector<int> counts_;
};

SummaryStatistics compute_summaries(const Trajectories& x, const ChainLayout& layout, int num_states);

/// O(T) incremental update for a single cell change: x(k,t) old -> new.
void update_summaries(SummaryStatistics& summary, const ChainLayout& layout, int k, int t, State old_state,
                      State new_state);

/// The contract every concrete coupled model implements. An instance is bound
/// to one parameter value. Rows are in the linear domain; a row for a chain
/// of `kind` in state f is evaluated with `block_counts` that already include
/// that chain (in state f) at time t.
class CoupledModel {
 public:
  virtual ~CoupledModel() = default;

  virtual const StateSpace& states() const = 0;
  virtual const ChainLayout& layout() const = 0;
  virtual int steps() const = 0;

  virtual void initial_probs(int chain, std::span<double> out) const = 0;

  /// Writes the S x S row-major kernel for chains of `kind` in `block` for the
  /// transition t -> t+1. `log_prob` may be empty when only `prob` is needed.
  virtual void transition(int block, int kind, int t, std::span<const int> block_counts, std::span<double> prob,
                          std::span<double> log_prob) const = 0;

  /// log p(y | state). A missing cell gives 0 unless the model implies the
  /// state from the chain's record.
  virtual double emission_log_prob(int chain, int t, int symbol, int state) const = 0;

  virtual double prior_log_density() const { return 0.0; }

  /// A trajectory grid with positive probability under the model given y.
  /// Throws SupportError when none can be constructed.
  virtual Trajectories feasible_start(const ObservationGrid& y) const = 0;

  int num_states() const { return states().size(); }
  int chains() const { return layout().chains(); }

  std::vector<double> initial_log_probs(int chain) const;
  /// Log transition row of chain k from `from_state` at time t, under the
  /// summary at time t (which must include chain k in `from_state`).
  std::vector<double> transition_log_row(int chain, int t, State from_state, const SummaryStatistics& summary) const;
};

/// Linear-domain emission likelihoods e[k][t][s] for a fixed data set.
class EmissionTable {
 public:
  EmissionTable() = default;
  EmissionTable(const CoupledModel& model, const ObservationGrid& y);

  std::span<const double> row(int k, int t) const {
    return {values_.data() + (static_cast<std::size_t>(k) * steps_ + t) * states_,
            static_cast<std::size_t>(states_)};
  }
  int steps() const { return steps_; }

 private:
  int steps_ = 0;
  int states_ = 0;
  std::vector<double> values_;
};

/// log p(Y | X, theta) + log p(X | theta). kLogZero for impossible paths.
double log_complete_density(const Trajectories& x, const ObservationGrid& y, const CoupledModel& model);

}  // namespace chmm

#endif  // CHMM_CORE_HPP
