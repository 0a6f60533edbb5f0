#include "chmm/exact.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace chmm {

namespace {

/// Joint state space of one block together with the per-step kernels.
class BlockSpace {
 public:
  BlockSpace(const CoupledModel& model, const ObservationGrid& y, int block, std::size_t budget)
      : model_(model), layout_(model.layout()), chains_(layout_.block_members(block)), block_(block),
        S_(model.num_states()), T_(model.steps()), emissions_(model, y) {
    size_ = 1;
    for (std::size_t c = 0; c < chains_.size(); ++c) {
      if (size_ > budget / S_)
        throw BudgetExceeded("block " + std::to_string(block) + " has " + std::to_string(chains_.size()) +
                             " chains; the joint space exceeds the budget of " + std::to_string(budget) + " states");
      size_ *= S_;
    }
    states_.resize(chains_.size());
    rows_.resize(chains_.size() * S_);
    counts_.resize(static_cast<std::size_t>(layout_.kinds()) * S_);
    kernels_.resize(static_cast<std::size_t>(layout_.kinds()) * S_ * S_);
    kinds_ready_.assign(layout_.kinds(), false);
  }

  std::size_t size() const { return size_; }
  int chains() const { return static_cast<int>(chains_.size()); }
  const std::vector<int>& members() const { return chains_; }

  void decode(std::size_t i) {
    for (auto& s : states_) {
      s = static_cast<State>(i % S_);
      i /= S_;
    }
  }
  State state(int c) const { return states_[c]; }

  /// Kronecker product of per-chain length-S vectors, written into out[0..size).
  void kron(const double* rows, std::vector<double>& out) const {
    std::size_t width = 1;
    out[0] = 1.0;
    for (int c = 0; c < chains(); ++c) {
      const double* r = rows + c * S_;
      for (int s = S_ - 1; s >= 0; --s) {
        double* dst = out.data() + s * width;
        for (std::size_t j = 0; j < width; ++j) dst[j] = out[j] * r[s];
      }
      width *= S_;
    }
  }

  void initial_rows() {
    for (int c = 0; c < chains(); ++c) model_.initial_probs(chains_[c], {rows_.data() + c * S_, std::size_t(S_)});
  }

  void emission_rows(int t) {
    for (int c = 0; c < chains(); ++c) {
      auto e = emissions_.row(chains_[c], t);
      std::copy(e.begin(), e.end(), rows_.begin() + c * S_);
    }
  }

  /// Per-chain transition rows t -> t+1 out of the currently decoded state.
  void transition_rows(int t) {
    std::fill(counts_.begin(), counts_.end(), 0);
    for (int c = 0; c < chains(); ++c) {
      const int k = chains_[c];
      if (layout_.present(k, t)) ++counts_[layout_[k].kind * S_ + states_[c]];
    }
    std::fill(kinds_ready_.begin(), kinds_ready_.end(), false);
    for (int c = 0; c < chains(); ++c) {
      const int k = chains_[c];
      double* r = rows_.data() + c * S_;
      if (layout_.frozen_after(k, t)) {
        std::fill(r, r + S_, 0.0);
        r[states_[c]] = 1.0;
        continue;
      }
      const int kind = layout_[k].kind;
      double* kernel = kernels_.data() + static_cast<std::size_t>(kind) * S_ * S_;
      if (!kinds_ready_[kind]) {
        model_.transition(block_, kind, t, counts_, {kernel, std::size_t(S_ * S_)}, {});
        kinds_ready_[kind] = true;
      }
      std::copy(kernel + states_[c] * S_, kernel + (states_[c] + 1) * S_, r);
    }
  }

  const double* rows() const { return rows_.data(); }

  /// Transition probability from the decoded state to joint state j, using
  /// rows from the last transition_rows call.
  double transition_to(std::size_t j) const {
    double p = 1.0;
    for (int c = 0; c < chains(); ++c) {
      p *= rows_[c * S_ + static_cast<int>(j % S_)];
      j /= S_;
    }
    return p;
  }

  int steps() const { return T_; }

 private:
  const CoupledModel& model_;
  const ChainLayout& layout_;
  std::vector<int> chains_;
  int block_;
  int S_;
  int T_;
  EmissionTable emissions_;
  std::size_t size_ = 1;
  std::vector<State> states_;
  std::vector<double> rows_;
  std::vector<int> counts_;
  std::vector<double> kernels_;
  std::vector<bool> kinds_ready_;
};

JointFilter run_filter(BlockSpace& space, int block) {
  const std::size_t M = space.size();
  const int T = space.steps();
  JointFilter f;
  f.block = block;
  f.chains = space.members();
  f.joint_states = M;
  f.steps = T;
  f.filtered.assign(static_cast<std::size_t>(T) * M, 0.0);
  f.log_norms.assign(T, kLogZero);

  std::vector<double> prod(M), emit(M);
  space.initial_rows();
  space.kron(space.rows(), prod);
  space.emission_rows(0);
  space.kron(space.rows(), emit);
  for (std::size_t i = 0; i < M; ++i) f.filtered[i] = prod[i] * emit[i];

  for (int t = 0;; ++t) {
    double* cur = f.filtered.data() + t * M;
    const double z = std::accumulate(cur, cur + M, 0.0);
    if (!(z > 0.0)) {
      f.log_likelihood = kLogZero;
      return f;
    }
    for (std::size_t i = 0; i < M; ++i) cur[i] /= z;
    f.log_norms[t] = std::log(z);
    f.log_likelihood += f.log_norms[t];
    if (t + 1 == T) break;

    double* next = cur + M;
    for (std::size_t i = 0; i < M; ++i) {
      const double w = cur[i];
      space.decode(i);
      space.transition_rows(t);
      space.kron(space.rows(), prod);
      for (std::size_t j = 0; j < M; ++j) next[j] += w * prod[j];
    }
    space.emission_rows(t + 1);
    space.kron(space.rows(), emit);
    for (std::size_t j = 0; j < M; ++j) next[j] *= emit[j];
  }
  return f;
}

}  // namespace

std::size_t joint_state_count(const CoupledModel& model, int block) {
  std::size_t n = 1;
  for (std::size_t c = 0; c < model.layout().block_members(block).size(); ++c) n *= model.num_states();
  return n;
}

JointFilter joint_forward_filter(const CoupledModel& model, const ObservationGrid& y, int block,
                                 std::size_t budget) {
  if (block < 0 || block >= model.layout().blocks()) throw std::out_of_range("block index");
  BlockSpace space(model, y, block, budget);
  return run_filter(space, block);
}

double exact_log_likelihood(const CoupledModel& model, const ObservationGrid& y, std::size_t budget) {
  double total = 0.0;
  for (int b = 0; b < model.layout().blocks(); ++b) {
    total += joint_forward_filter(model, y, b, budget).log_likelihood;
    if (total == kLogZero) return kLogZero;
  }
  return total;
}

std::vector<double> exact_smoothing_marginals(const CoupledModel& model, const ObservationGrid& y,
                                              std::size_t budget) {
  const int S = model.num_states();
  const int T = model.steps();
  std::vector<double> out(static_cast<std::size_t>(model.chains()) * T * S, 0.0);
  for (int b = 0; b < model.layout().blocks(); ++b) {
    BlockSpace space(model, y, b, budget);
    const auto f = run_filter(space, b);
    if (f.log_likelihood == kLogZero) throw SupportError("observations have zero likelihood in block " + std::to_string(b));
    const std::size_t M = space.size();

    std::vector<double> beta(M, 1.0), prev(M), prod(M), emit(M), smooth(M);
    for (int t = T - 1; t >= 0; --t) {
      if (t < T - 1) {
        space.emission_rows(t + 1);
        space.kron(space.rows(), emit);
        for (std::size_t j = 0; j < M; ++j) prev[j] = emit[j] * beta[j];
        double z = 0.0;
        for (std::size_t i = 0; i < M; ++i) {
          space.decode(i);
          space.transition_rows(t);
          space.kron(space.rows(), prod);
          double acc = 0.0;
          for (std::size_t j = 0; j < M; ++j) acc += prod[j] * prev[j];
          beta[i] = acc;
          z += acc;
        }
        for (double& v : beta) v /= z;
      }
      const auto row = f.row(t);
      double z = 0.0;
      for (std::size_t i = 0; i < M; ++i) z += smooth[i] = row[i] * beta[i];
      for (std::size_t i = 0; i < M; ++i) {
        if (smooth[i] == 0.0) continue;
        space.decode(i);
        for (int c = 0; c < space.chains(); ++c) {
          const int k = space.members()[c];
          out[(static_cast<std::size_t>(k) * T + t) * S + space.state(c)] += smooth[i] / z;
        }
      }
    }
  }
  return out;
}

JointDraw joint_ffbs_sample(const CoupledModel& model, const ObservationGrid& y, Rng& rng, std::size_t budget) {
  const int T = model.steps();
  JointDraw draw{Trajectories(model.chains(), T), 0.0};
  for (int b = 0; b < model.layout().blocks(); ++b) {
    BlockSpace space(model, y, b, budget);
    const auto f = run_filter(space, b);
    if (f.log_likelihood == kLogZero) throw SupportError("observations have zero likelihood in block " + std::to_string(b));
    const std::size_t M = space.size();

    auto terminal = f.row(T - 1);
    std::size_t j = static_cast<std::size_t>(rng.categorical(terminal, 1.0));
    draw.log_density += std::log(terminal[j]);
    auto write = [&](std::size_t joint, int t) {
      space.decode(joint);
      for (int c = 0; c < space.chains(); ++c) draw.x.set(space.members()[c], t, space.state(c));
    };
    write(j, T - 1);

    std::vector<double> w(M);
    for (int t = T - 2; t >= 0; --t) {
      const auto row = f.row(t);
      double z = 0.0;
      for (std::size_t i = 0; i < M; ++i) {
        if (row[i] == 0.0) {
          w[i] = 0.0;
          continue;
        }
        space.decode(i);
        space.transition_rows(t);
        z += w[i] = row[i] * space.transition_to(j);
      }
      j = static_cast<std::size_t>(rng.categorical(w, z));
      draw.log_density += std::log(w[j] / z);
      write(j, t);
    }
  }
  return draw;
}

}  // namespace chmm
