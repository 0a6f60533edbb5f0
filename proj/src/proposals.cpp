#include "chmm/proposals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace chmm {

double ess(std::span<const double> weights) {
  if (weights.empty()) throw std::invalid_argument("ess of an empty weight vector");
  double sum = 0.0, sq = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("ess requires non-negative weights");
    sum += w;
    sq += w * w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("ess requires normalized weights");
  return 1.0 / sq;
}

void GuidingEnsemble::reset_weights(int block) { weights[block].assign(samples.size(), 1.0 / samples.size()); }

GuidingEnsemble generate_guiding_samples(const CoupledModel& model, const EmissionTable& emissions,
                                         const ObservationGrid& y, int n, int burn_in, Rng& rng) {
  if (n < 1) throw std::invalid_argument("guiding ensemble needs at least one sample");
  if (burn_in < 0) throw std::invalid_argument("burn-in must be non-negative");
  GridState grid(model.layout(), model.num_states(), model.feasible_start(y));
  for (int i = 0; i < burn_in; ++i) iffbs_sweep(model, emissions, grid, rng);
  GuidingEnsemble ensemble;
  ensemble.samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    iffbs_sweep(model, emissions, grid, rng);
    ensemble.samples.push_back(grid);
  }
  ensemble.weights.resize(model.layout().blocks());
  for (int b = 0; b < model.layout().blocks(); ++b) ensemble.reset_weights(b);
  return ensemble;
}

int select_high_posterior(const GuidingEnsemble& ensemble, const ObservationGrid& y, const CoupledModel& model) {
  if (ensemble.samples.empty()) throw std::invalid_argument("empty guiding ensemble");
  int best = 0;
  double best_density = kLogZero;
  for (int n = 0; n < ensemble.size(); ++n) {
    const double d = log_complete_density(ensemble.samples[n].x(), y, model);
    if (d > best_density) {
      best_density = d;
      best = n;
    }
  }
  return best;
}

ProposalDraw diffbs_propose(const Trajectories& x_tilde, const CoupledModel& model, const EmissionTable& emissions,
                            Rng& rng) {
  GridState grid(model.layout(), model.num_states(), x_tilde);
  const double log_q = iffbs_sweep(model, emissions, grid, rng);
  return {grid.x(), log_q};
}

void regenerate(GuidingEnsemble& ensemble, const GridState& base, int block, int from, const CoupledModel& model,
                const EmissionTable& emissions, Rng& rng, int refresh_sweeps, int clamp_chain, int clamp_from) {
  const auto& members = model.layout().block_members(block);
  if (from < 0 || from >= static_cast<int>(members.size())) throw std::out_of_range("regeneration start position");
  const std::vector<int> free(members.begin() + from, members.end());
  GridState work = base;
  auto sweep = [&] {
    for (int c : free) iffbs_chain_update(model, emissions, work, c, rng, c == clamp_chain ? clamp_from : -1);
  };
  for (int r = 0; r < refresh_sweeps; ++r) sweep();
  for (auto& sample : ensemble.samples) {
    sweep();
    for (int c : free) sample.set_chain(c, work.x().chain(c));
  }
  ensemble.reset_weights(block);
}

namespace {

int heaviest(const std::vector<double>& w) {
  return static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
}

/// Multiplies weights by the per-sample probabilities of the drawn state, in
/// the log domain, and renormalizes.
void reweight(std::vector<double>& weights, const std::vector<double>& factor) {
  const std::size_t n = weights.size();
  std::vector<double> logw(n);
  for (std::size_t i = 0; i < n; ++i) {
    logw[i] = (weights[i] > 0.0 && factor[i] > 0.0) ? std::log(weights[i]) + std::log(factor[i]) : kLogZero;
  }
  const double z = log_sum_exp(logw);
  if (z == kLogZero) throw SupportError("all guiding weights vanished");
  for (std::size_t i = 0; i < n; ++i) weights[i] = std::exp(logw[i] - z);
}

}  // namespace

ProposalDraw miffbs_propose(GuidingEnsemble& ensemble, const CoupledModel& model, const EmissionTable& emissions,
                            Rng& rng, const MiffbsOptions& options, MiffbsDiagnostics* diagnostics) {
  const int N = ensemble.size();
  if (N == 0) throw std::invalid_argument("empty guiding ensemble");
  const auto& layout = model.layout();
  const int K = model.chains();
  const int T = model.steps();
  const int S = model.num_states();
  const double threshold = options.regen_threshold < 0.0 ? 0.5 * N : options.regen_threshold;

  ProposalDraw draw{Trajectories(K, T), 0.0};
  std::vector<ChainConditional> conds(N);
  std::vector<char> alive(N);
  std::vector<double> row(S), factor(N);
  std::vector<State> path(T);

  auto forward_all = [&](int k, const std::vector<double>& weights) {
    for (int n = 0; n < N; ++n)
      alive[n] = weights[n] > 0.0 && try_forward_pass(model, emissions, ensemble.samples[n], k, conds[n]);
  };
  auto pick = [&](const char* where) {
    const double z = std::accumulate(row.begin(), row.end(), 0.0);
    if (!(z > 0.0)) throw SupportError(std::string("weighted ") + where + " row has no support");
    const int s = rng.categorical(row, z);
    draw.log_q += std::log(row[s] / z);
    return s;
  };

  for (int k = 0; k < K; ++k) {
    const int b = layout[k].block;
    const auto& members = layout.block_members(b);
    const int pos = static_cast<int>(std::find(members.begin(), members.end(), k) - members.begin());
    const bool last = pos + 1 == static_cast<int>(members.size());
    auto& weights = ensemble.weights[b];

    const double start_ess = ensemble.ess(b);
    if (diagnostics) diagnostics->chain_start_ess.push_back(start_ess);
    if (pos > 0 && start_ess < threshold) {
      regenerate(ensemble, ensemble.samples[heaviest(weights)], b, pos, model, emissions, rng, options.refresh_sweeps);
      if (diagnostics) ++diagnostics->regenerations;
    }

    if (last && options.full_conditional_last) {
      GridState& grid = ensemble.samples[heaviest(weights)];
      const auto cond = modified_forward_pass(model, emissions, grid, k);
      draw.log_q += backward_sample(cond, rng, path, T);
    } else {
      forward_all(k, weights);
      std::fill(row.begin(), row.end(), 0.0);
      for (int n = 0; n < N; ++n) {
        if (!alive[n]) continue;
        const auto f = conds[n].filtered_row(T - 1);
        for (int s = 0; s < S; ++s) row[s] += weights[n] * f[s];
      }
      path[T - 1] = static_cast<State>(pick("terminal"));
      for (int n = 0; n < N; ++n) factor[n] = alive[n] ? conds[n].filtered_row(T - 1)[path[T - 1]] : 0.0;
      reweight(weights, factor);

      for (int t = T - 2; t >= 0; --t) {
        if (options.per_step_regeneration && ensemble.ess(b) < threshold) {
          GridState base = ensemble.samples[heaviest(weights)];
          std::vector<State> seeded(base.x().chain(k).begin(), base.x().chain(k).end());
          std::copy(path.begin() + t + 1, path.end(), seeded.begin() + t + 1);
          base.set_chain(k, seeded);
          regenerate(ensemble, base, b, pos, model, emissions, rng, options.refresh_sweeps, k, t + 1);
          forward_all(k, weights);
          if (diagnostics) ++diagnostics->regenerations;
        }
        const int next = path[t + 1];
        std::fill(row.begin(), row.end(), 0.0);
        for (int n = 0; n < N; ++n) {
          factor[n] = 0.0;
          if (!alive[n] || weights[n] == 0.0) continue;
          const auto& c = conds[n];
          const auto f = c.filtered_row(t);
          double z = 0.0;
          for (int s = 0; s < S; ++s) z += f[s] * c.own_transition(t, s, next);
          if (!(z > 0.0)) continue;
          for (int s = 0; s < S; ++s) row[s] += weights[n] * f[s] * c.own_transition(t, s, next) / z;
        }
        path[t] = static_cast<State>(pick("backward"));
        for (int n = 0; n < N; ++n) {
          if (!alive[n] || weights[n] == 0.0) continue;
          const auto& c = conds[n];
          const auto f = c.filtered_row(t);
          double z = 0.0;
          for (int s = 0; s < S; ++s) z += f[s] * c.own_transition(t, s, next);
          if (z > 0.0) factor[n] = f[path[t]] * c.own_transition(t, path[t], next) / z;
        }
        reweight(weights, factor);
      }
    }

    std::copy(path.begin(), path.end(), draw.x.chain(k).begin());
    if (!last) {
      for (auto& sample : ensemble.samples) sample.set_chain(k, path);
    }
  }
  return draw;
}

}  // namespace chmm
