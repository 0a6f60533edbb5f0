#include "chmm/iffbs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace chmm {

GridState::GridState(const ChainLayout& layout, int num_states, Trajectories x)
    : layout_(&layout), S_(num_states), x_(std::move(x)) {
  if (x_.chains() != layout.chains()) throw DimensionError("trajectory chain count does not match the chain layout");
  x_.validate(S_);
  summary_ = SummaryStatistics(x_.steps(), layout.blocks(), layout.kinds(), S_);
  const int steps = std::max(0, x_.steps() - 1);
  trans_.assign(static_cast<std::size_t>(steps) * layout.blocks() * trans_stride(), 0);
  for (int k = 0; k < x_.chains(); ++k) apply_chain(k, 1);
}

void GridState::apply_chain(int k, int sign) {
  const auto& info = (*layout_)[k];
  const int T = x_.steps();
  for (int t = 0; t < T && layout_->present(k, t); ++t) summary_.add(t, info.block, info.kind, x_(k, t), sign);
  for (int t = 0; t + 1 < T && !layout_->frozen_after(k, t); ++t) {
    trans_[trans_offset(t, info.block) + (info.kind * S_ + x_(k, t)) * S_ + x_(k, t + 1)] += sign;
  }
}

void GridState::set_chain(int k, std::span<const State> path) {
  if (static_cast<int>(path.size()) != x_.steps()) throw DimensionError("path length differs from the grid");
  apply_chain(k, -1);
  std::copy(path.begin(), path.end(), x_.chain(k).begin());
  apply_chain(k, 1);
}

bool GridState::counts_consistent() const {
  GridState fresh(*layout_, S_, x_);
  return fresh.summary_ == summary_ && fresh.trans_ == trans_;
}

namespace {

struct Scratch {
  std::vector<int> base;
  std::vector<int> counts;
  std::vector<int> others;
  std::vector<double> prob;
  std::vector<double> logp;
  std::vector<char> active;
};

}  // namespace

bool try_forward_pass(const CoupledModel& model, const EmissionTable& emissions, const GridState& grid, int k,
                      ChainConditional& out) {
  const auto& layout = grid.layout();
  const int S = grid.states();
  const int T = grid.x().steps();
  const int kinds = layout.kinds();
  const auto& info = layout[k];
  const int b = info.block;
  const int own_kind = info.kind;
  const auto& x = grid.x();

  out.chain = k;
  out.steps = T;
  out.states = S;
  out.filtered.resize(static_cast<std::size_t>(T) * S);
  out.predictive.resize(static_cast<std::size_t>(T) * S);
  out.log_other.assign(static_cast<std::size_t>(T) * S, 0.0);
  out.own.resize(static_cast<std::size_t>(std::max(0, T - 1)) * S * S);

  thread_local Scratch w;
  w.base.resize(static_cast<std::size_t>(kinds) * S);
  w.counts.resize(w.base.size());
  w.others.resize(static_cast<std::size_t>(kinds) * S * S);
  w.prob.resize(static_cast<std::size_t>(S) * S);
  w.logp.resize(w.prob.size());
  w.active.resize(kinds);

  for (int t = 0; t < T; ++t) {
    double* pred = out.predictive.data() + t * S;
    if (t == 0) {
      model.initial_probs(k, {pred, std::size_t(S)});
    } else {
      const double* prev = out.filtered.data() + (t - 1) * S;
      const double* own = out.own.data() + static_cast<std::size_t>(t - 1) * S * S;
      for (int s = 0; s < S; ++s) {
        double acc = 0.0;
        for (int r = 0; r < S; ++r) acc += prev[r] * own[r * S + s];
        pred[s] = acc;
      }
    }

    double* logq = out.log_other.data() + t * S;
    if (t + 1 < T) {
      const bool present = layout.present(k, t);
      const bool frozen = layout.frozen_after(k, t);
      double* own = out.own.data() + static_cast<std::size_t>(t) * S * S;

      auto block_counts = grid.summary().block(t, b);
      std::copy(block_counts.begin(), block_counts.end(), w.base.begin());
      if (present) --w.base[own_kind * S + x(k, t)];
      auto trans = grid.transitions(t, b);
      std::copy(trans.begin(), trans.end(), w.others.begin());
      if (!frozen) --w.others[(own_kind * S + x(k, t)) * S + x(k, t + 1)];
      for (int c = 0; c < kinds; ++c) {
        const int* n = w.others.data() + static_cast<std::size_t>(c) * S * S;
        w.active[c] = std::any_of(n, n + S * S, [](int v) { return v > 0; });
      }

      // Without chain k in the summary the other-chain factor is constant in
      // its state; only its support matters.
      const int distinct = present ? S : 1;
      for (int s = 0; s < distinct; ++s) {
        std::copy(w.base.begin(), w.base.end(), w.counts.begin());
        if (present) ++w.counts[own_kind * S + s];
        double q = 0.0;
        bool own_done = frozen;
        for (int c = 0; c < kinds; ++c) {
          const bool need_own = !own_done && c == own_kind;
          if (!w.active[c] && !need_own) continue;
          model.transition(b, c, t, w.counts, w.prob, w.active[c] ? std::span<double>(w.logp) : std::span<double>());
          if (need_own) {
            std::copy(w.prob.begin() + s * S, w.prob.begin() + (s + 1) * S, own + s * S);
            own_done = true;
          }
          if (!w.active[c]) continue;
          const int* n = w.others.data() + static_cast<std::size_t>(c) * S * S;
          for (int i = 0; i < S * S; ++i) {
            if (n[i] > 0) q += n[i] * w.logp[i];
          }
        }
        logq[s] = q;
      }
      if (!present) {
        if (logq[0] == kLogZero) return false;
        std::fill(logq, logq + S, 0.0);
      }
      if (frozen) {
        std::fill(own, own + S * S, 0.0);
        for (int s = 0; s < S; ++s) own[s * S + s] = 1.0;
      }
    }

    const auto e = emissions.row(k, t);
    double hi = kLogZero;
    for (int s = 0; s < S; ++s) {
      if (e[s] > 0.0 && pred[s] > 0.0) hi = std::max(hi, logq[s]);
    }
    if (hi == kLogZero) return false;
    double* f = out.filtered.data() + t * S;
    double z = 0.0;
    for (int s = 0; s < S; ++s) {
      f[s] = (e[s] > 0.0 && pred[s] > 0.0) ? e[s] * pred[s] * std::exp(logq[s] - hi) : 0.0;
      z += f[s];
    }
    if (!(z > 0.0)) return false;
    for (int s = 0; s < S; ++s) f[s] /= z;
  }
  return true;
}

ChainConditional modified_forward_pass(const CoupledModel& model, const EmissionTable& emissions,
                                       const GridState& grid, int k) {
  ChainConditional cond;
  if (!try_forward_pass(model, emissions, grid, k, cond))
    throw SupportError("chain " + std::to_string(k) + " has no support given the other chains");
  return cond;
}

double backward_sample(const ChainConditional& cond, Rng& rng, std::span<State> path, int clamp_from) {
  const int T = cond.steps;
  const int S = cond.states;
  if (clamp_from < 0 || clamp_from > T) clamp_from = T;
  double log_density = 0.0;
  int t = clamp_from - 1;
  if (clamp_from == T) {
    const auto f = cond.filtered_row(T - 1);
    const int s = rng.categorical(f, 1.0);
    path[T - 1] = static_cast<State>(s);
    log_density += std::log(f[s]);
    t = T - 2;
  }
  double w[256];
  for (; t >= 0; --t) {
    const auto f = cond.filtered_row(t);
    const int next = path[t + 1];
    double z = 0.0;
    for (int s = 0; s < S; ++s) z += w[s] = f[s] * cond.own_transition(t, s, next);
    if (!(z > 0.0)) throw SupportError("backward step has no support at t=" + std::to_string(t));
    const int s = rng.categorical({w, std::size_t(S)}, z);
    path[t] = static_cast<State>(s);
    log_density += std::log(w[s] / z);
  }
  return log_density;
}

double path_log_density(const ChainConditional& cond, std::span<const State> path) {
  const int T = cond.steps;
  const int S = cond.states;
  double log_density = std::log(cond.filtered_row(T - 1)[path[T - 1]]);
  for (int t = T - 2; t >= 0 && log_density != kLogZero; --t) {
    const auto f = cond.filtered_row(t);
    double z = 0.0;
    for (int s = 0; s < S; ++s) z += f[s] * cond.own_transition(t, s, path[t + 1]);
    if (!(z > 0.0)) return kLogZero;
    log_density += std::log(f[path[t]] * cond.own_transition(t, path[t], path[t + 1]) / z);
  }
  return log_density;
}

double iffbs_chain_update(const CoupledModel& model, const EmissionTable& emissions, GridState& grid, int k,
                          Rng& rng, int clamp_from) {
  thread_local ChainConditional cond;
  thread_local std::vector<State> path;
  if (!try_forward_pass(model, emissions, grid, k, cond))
    throw SupportError("chain " + std::to_string(k) + " has no support given the other chains");
  const auto current = grid.x().chain(k);
  path.assign(current.begin(), current.end());
  const double log_density = backward_sample(cond, rng, path, clamp_from);
  grid.set_chain(k, path);
  return log_density;
}

double iffbs_sweep(const CoupledModel& model, const EmissionTable& emissions, GridState& grid, Rng& rng,
                   std::span<const int> chains, bool random_order) {
  std::vector<int> order;
  if (chains.empty()) {
    order.resize(grid.x().chains());
    std::iota(order.begin(), order.end(), 0);
  } else {
    order.assign(chains.begin(), chains.end());
  }
  if (random_order) std::shuffle(order.begin(), order.end(), rng);
  double total = 0.0;
  for (int k : order) total += iffbs_chain_update(model, emissions, grid, k, rng);
  return total;
}

}  // namespace chmm
