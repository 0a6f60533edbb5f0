#ifndef CHMM_TESTS_TOY_MODEL_HPP
#define CHMM_TESTS_TOY_MODEL_HPP

#include <cmath>
#include <vector>

#include "chmm/core.hpp"
#include "chmm/random.hpp"

namespace chmm::testing {

/// Three-state coupled model with noisy emissions. State 2 is absorbing. The
/// pull toward state 1 grows with the number of present chains in state 1 in
/// the same block, weighted by kind.
class ToyModel final : public CoupledModel {
 public:
  ToyModel(std::vector<ChainInfo> chains, int steps, double coupling = 0.7, double noise = 0.1)
      : states_({"a", "b", "c"}), layout_(std::move(chains), 2), steps_(steps), coupling_(coupling), noise_(noise) {}

  const StateSpace& states() const override { return states_; }
  const ChainLayout& layout() const override { return layout_; }
  int steps() const override { return steps_; }

  void initial_probs(int chain, std::span<double> out) const override {
    const bool first_kind = layout_[chain].kind == 0;
    out[0] = first_kind ? 0.6 : 0.3;
    out[1] = first_kind ? 0.3 : 0.5;
    out[2] = 1.0 - out[0] - out[1];
  }

  void transition(int, int kind, int t, std::span<const int> counts, std::span<double> prob,
                  std::span<double> log_prob) const override {
    static constexpr double kBase[2][9] = {{0.7, 0.2, 0.1, 0.2, 0.6, 0.2, 0.0, 0.0, 1.0},
                                           {0.5, 0.4, 0.1, 0.3, 0.5, 0.2, 0.0, 0.0, 1.0}};
    const double pressure = coupling_ * (counts[1] + 0.5 * counts[3 + 1]) + 0.05 * (t % 2);
    for (int f = 0; f < 3; ++f) {
      double row[3], total = 0.0;
      for (int g = 0; g < 3; ++g) {
        row[g] = kBase[kind][f * 3 + g] * (g == 1 ? std::exp(pressure) : 1.0);
        total += row[g];
      }
      for (int g = 0; g < 3; ++g) {
        prob[f * 3 + g] = row[g] / total;
        if (!log_prob.empty()) log_prob[f * 3 + g] = row[g] > 0.0 ? std::log(row[g] / total) : kLogZero;
      }
    }
  }

  double emission_log_prob(int, int, int symbol, int state) const override {
    if (symbol == kMissing) return 0.0;
    return std::log(symbol == state ? 1.0 - 2.0 * noise_ : noise_);
  }

  Trajectories feasible_start(const ObservationGrid&) const override { return Trajectories(layout_.chains(), steps_, 0); }

 private:
  StateSpace states_;
  ChainLayout layout_;
  int steps_;
  double coupling_;
  double noise_;
};

/// Observations drawn from the toy model's own emission law on a simulated path.
inline ObservationGrid toy_observations(const ToyModel& model, std::uint64_t seed, double missing_rate = 0.2) {
  Rng rng(seed);
  const int K = model.chains(), T = model.steps();
  Trajectories x(K, T);
  for (int k = 0; k < K; ++k) {
    double init[3];
    model.initial_probs(k, init);
    x.set(k, 0, static_cast<State>(rng.categorical(init, 1.0)));
  }
  for (int t = 0; t + 1 < T; ++t) {
    const auto summary = compute_summaries(x, model.layout(), 3);
    for (int k = 0; k < K; ++k) {
      if (model.layout().frozen_after(k, t)) {
        x.set(k, t + 1, x(k, t));
        continue;
      }
      const auto row = model.transition_log_row(k, t, x(k, t), summary);
      double p[3];
      for (int s = 0; s < 3; ++s) p[s] = std::exp(row[s]);
      x.set(k, t + 1, static_cast<State>(rng.categorical(p, 1.0)));
    }
  }
  ObservationGrid y(K, T);
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < T; ++t) {
      if (rng.uniform() < missing_rate || !model.layout().present(k, t)) continue;
      const double u = rng.uniform();
      const int s = x(k, t);
      y.set(k, t, u < 0.8 ? s : (u < 0.9 ? (s + 1) % 3 : (s + 2) % 3));
    }
  }
  return y;
}

/// Exhaustive enumeration of all K x T paths: log p(Y) and per-cell marginals.
struct Enumeration {
  double log_likelihood = kLogZero;
  std::vector<double> marginals;  // [k][t][s]
};

inline Enumeration enumerate_paths(const CoupledModel& model, const ObservationGrid& y) {
  const int K = model.chains(), T = model.steps(), S = model.num_states();
  const int cells = K * T;
  std::size_t total = 1;
  for (int i = 0; i < cells; ++i) total *= S;
  Trajectories x(K, T);
  std::vector<double> lps(total);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (int i = 0; i < cells; ++i) {
      x.set(i / T, i % T, static_cast<State>(c % S));
      c /= S;
    }
    lps[code] = log_complete_density(x, y, model);
  }
  Enumeration out;
  out.log_likelihood = log_sum_exp(lps);
  out.marginals.assign(static_cast<std::size_t>(cells) * S, 0.0);
  for (std::size_t code = 0; code < total; ++code) {
    if (lps[code] == kLogZero) continue;
    const double w = std::exp(lps[code] - out.log_likelihood);
    std::size_t c = code;
    for (int i = 0; i < cells; ++i) {
      out.marginals[static_cast<std::size_t>(i) * S + c % S] += w;
      c /= S;
    }
  }
  return out;
}

}  // namespace chmm::testing

#endif  // CHMM_TESTS_TOY_MODEL_HPP
