#include "chmm/pf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace chmm {

namespace {

double filter_block(const CoupledModel& model, const EmissionTable& emissions, int block, int P, Rng& rng) {
  const auto& layout = model.layout();
  const auto& members = layout.block_members(block);
  const int C = static_cast<int>(members.size());
  const int S = model.num_states();
  const int T = model.steps();
  const int kinds = layout.kinds();
  const std::size_t kernel_size = static_cast<std::size_t>(S) * S;

  std::vector<State> cur(static_cast<std::size_t>(P) * C), next(cur.size());
  // Kernels depend on a particle only through its block counts, so each step
  // computes one kernel set per distinct count vector.
  const std::size_t set_size = static_cast<std::size_t>(kinds) * kernel_size;
  std::vector<double> kernels;
  std::vector<int> kernel_of(P);
  std::unordered_map<std::uint64_t, int> kernel_index;
  double key_range = 1.0;
  for (int i = 0; i < kinds * S; ++i) key_range *= C + 1;
  const bool packable = key_range < 9.0e18;
  std::vector<double> weights(P);
  std::vector<int> counts(static_cast<std::size_t>(kinds) * S), ancestors(P);
  std::vector<double> row(S);
  std::vector<char> kind_used(kinds, 0);
  for (int k : members) kind_used[layout[k].kind] = 1;

  double log_lik = 0.0;
  for (int c = 0; c < C; ++c) {
    model.initial_probs(members[c], row);
    const auto e = emissions.row(members[c], 0);
    double z = 0.0;
    for (int s = 0; s < S; ++s) z += row[s] *= e[s];
    if (!(z > 0.0)) return kLogZero;
    log_lik += std::log(z);
    for (int i = 0; i < P; ++i) cur[static_cast<std::size_t>(i) * C + c] = static_cast<State>(rng.categorical(row, z));
  }

  for (int t = 0; t + 1 < T; ++t) {
    double total = 0.0;
    kernels.clear();
    kernel_index.clear();
    for (int i = 0; i < P; ++i) {
      const State* x = cur.data() + static_cast<std::size_t>(i) * C;
      std::fill(counts.begin(), counts.end(), 0);
      for (int c = 0; c < C; ++c) {
        if (layout.present(members[c], t)) ++counts[layout[members[c]].kind * S + x[c]];
      }
      int slot = -1;
      std::uint64_t key = 0;
      if (packable) {
        for (int v : counts) key = key * static_cast<std::uint64_t>(C + 1) + static_cast<std::uint64_t>(v);
        const auto it = kernel_index.find(key);
        if (it != kernel_index.end()) slot = it->second;
      }
      if (slot < 0) {
        slot = static_cast<int>(kernels.size() / set_size);
        kernels.resize(kernels.size() + set_size);
        double* fresh = kernels.data() + static_cast<std::size_t>(slot) * set_size;
        for (int kind = 0; kind < kinds; ++kind) {
          if (kind_used[kind]) model.transition(block, kind, t, counts, {fresh + kind * kernel_size, kernel_size}, {});
        }
        if (packable) kernel_index.emplace(key, slot);
      }
      kernel_of[i] = slot;
      const double* ker = kernels.data() + static_cast<std::size_t>(slot) * set_size;
      double w = 1.0;
      for (int c = 0; c < C && w > 0.0; ++c) {
        const int k = members[c];
        const auto e = emissions.row(k, t + 1);
        if (layout.frozen_after(k, t)) {
          w *= e[x[c]];
          continue;
        }
        const double* r = ker + layout[k].kind * kernel_size + x[c] * S;
        double z = 0.0;
        for (int s = 0; s < S; ++s) z += r[s] * e[s];
        w *= z;
      }
      weights[i] = w;
      total += w;
    }
    if (!(total > 0.0)) return kLogZero;
    log_lik += std::log(total / P);

    // Systematic resampling.
    const double step = total / P;
    double u = rng.uniform() * step;
    double acc = weights[0];
    int j = 0;
    for (int i = 0; i < P; ++i) {
      while (u >= acc && j + 1 < P) acc += weights[++j];
      ancestors[i] = j;
      u += step;
    }

    for (int i = 0; i < P; ++i) {
      const int a = ancestors[i];
      const State* x = cur.data() + static_cast<std::size_t>(a) * C;
      State* out = next.data() + static_cast<std::size_t>(i) * C;
      const double* ker = kernels.data() + static_cast<std::size_t>(kernel_of[a]) * set_size;
      for (int c = 0; c < C; ++c) {
        const int k = members[c];
        if (layout.frozen_after(k, t)) {
          out[c] = x[c];
          continue;
        }
        const auto e = emissions.row(k, t + 1);
        const double* r = ker + layout[k].kind * kernel_size + x[c] * S;
        double z = 0.0;
        for (int s = 0; s < S; ++s) z += row[s] = r[s] * e[s];
        out[c] = static_cast<State>(rng.categorical(row, z));
      }
    }
    cur.swap(next);
  }
  return log_lik;
}

}  // namespace

PfResult pf_loglik(const CoupledModel& model, const ObservationGrid& y, int n_particles, Rng& rng) {
  if (n_particles < 2) throw std::invalid_argument("particle filter needs at least two particles");
  const EmissionTable emissions(model, y);
  PfResult result;
  for (int b = 0; b < model.layout().blocks(); ++b) {
    const double ll = filter_block(model, emissions, b, n_particles, rng);
    result.block_log_likelihood.push_back(ll);
    if (ll == kLogZero) {
      result.log_likelihood = kLogZero;
      if (result.diagnostic.empty())
        result.diagnostic = "all particles have zero weight in block " + std::to_string(b);
    } else if (result.log_likelihood != kLogZero) {
      result.log_likelihood += ll;
    }
  }
  return result;
}

}  // namespace chmm
