#include "chmm/simulate.hpp"

#include <cstdio>
#include <stdexcept>

#include "chmm/random.hpp"

namespace chmm::sir {

void ExperimentDesign::validate() const {
  if (pens.empty()) throw std::invalid_argument("design has no pens");
  if (steps < 1) throw std::invalid_argument("design needs at least one time step");
  if (!(moribund_prob >= 0.0 && moribund_prob <= 1.0)) throw std::invalid_argument("moribund_prob must lie in [0,1]");
  for (const auto& pen : pens) {
    if (pen.size < 1) throw std::invalid_argument("pen size must be positive");
    if (pen.challenge < 0 || pen.challenge > pen.size)
      throw std::invalid_argument("challenge count must lie between 0 and the pen size");
  }
}

namespace {

/// The four transgenic patterns of the cross design, in pen order.
std::vector<PenDesign> cross_pens(int size, int challenge) {
  return {{size, challenge, false, false}, {size, challenge, false, true}, {size, challenge, true, false},
          {size, challenge, true, true}};
}

}  // namespace

ExperimentDesign preset_design(const std::string& name) {
  if (name == "hpai-cross") return {name, cross_pens(17, 5), 20, 0.5};
  const struct {
    const char* name;
    int size;
    int challenge;
  } scaling[] = {{"scaling-4", 4, 1}, {"scaling-8", 8, 2}, {"scaling-16", 16, 5}, {"scaling-32", 32, 10},
                 {"scaling-64", 64, 19}};
  for (const auto& s : scaling) {
    if (name == s.name) return {name, cross_pens(s.size, s.challenge), 20, 0.5};
  }
  throw std::invalid_argument("unknown design preset '" + name + "'");
}

std::vector<std::string> preset_names() {
  return {"hpai-cross", "scaling-4", "scaling-8", "scaling-16", "scaling-32", "scaling-64"};
}

SimulatedExperiment simulate_experiment(const ExperimentDesign& design, const SirParams& params,
                                        const ModelVariant& variant, std::uint64_t seed) {
  design.validate();
  const SirParams theta = params.tied(variant);
  const int T = design.steps;
  int K = 0;
  for (const auto& pen : design.pens) K += pen.size;

  SimulatedExperiment out;
  out.data.observations = ObservationGrid(K, T);
  out.truth = Trajectories(K, T);
  int first = 0;
  for (int p = 0; p < static_cast<int>(design.pens.size()); ++p) {
    const auto& pen = design.pens[p];
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(p));
    std::vector<ChickenMeta> birds(pen.size);
    std::vector<State> state(pen.size), next(pen.size);
    std::vector<bool> active(pen.size, true);
    for (int i = 0; i < pen.size; ++i) {
      auto& c = birds[i];
      c.pen = p + 1;
      c.challenge = i < pen.challenge;
      c.transgenic = c.challenge ? pen.challenge_transgenic : pen.contact_transgenic;
      c.pen_size = pen.size;
      c.last_present = T - 1;
      const auto init = initial_distribution(c, theta);
      state[i] = static_cast<State>(rng.categorical(init, 1.0));
      out.data.observations.set(first + i, 0, kAlive);
      out.truth.set(first + i, 0, state[i]);
    }
    for (int t = 0; t + 1 < T; ++t) {
      int inf_n = 0, inf_t = 0;
      for (int i = 0; i < pen.size; ++i) {
        if (active[i] && state[i] == kInfectious) ++(birds[i].transgenic ? inf_t : inf_n);
      }
      for (int i = 0; i < pen.size; ++i) {
        next[i] = state[i];
        if (!active[i]) continue;
        const double a = force_of_infection(inf_n, inf_t, birds[i].transgenic, pen.size, theta);
        const auto m = half_day_transition_matrix(a, birds[i].transgenic ? theta.gamma_T : theta.gamma_N);
        next[i] = static_cast<State>(rng.categorical({m.data() + state[i] * 3, 3}, 1.0));
      }
      for (int i = 0; i < pen.size; ++i) {
        if (!active[i]) continue;
        const int k = first + i;
        if (next[i] == kRemoved && state[i] != kRemoved) {
          active[i] = false;
          if (state[i] == kInfectious && rng.uniform() < design.moribund_prob) {
            out.data.observations.set(k, t, kMoribundRemoved);
            birds[i].last_present = t + 1;
            birds[i].implied_removal = t + 1;
            state[i] = kRemoved;
            continue;
          }
          out.data.observations.set(k, t + 1, kDead);
          birds[i].last_present = t + 1;
          state[i] = kRemoved;
          continue;
        }
        state[i] = next[i];
        out.data.observations.set(k, t + 1, kAlive);
      }
      for (int i = 0; i < pen.size; ++i) out.truth.set(first + i, t + 1, state[i]);
    }
    for (int i = 0; i < pen.size; ++i) {
      out.data.chickens.push_back(birds[i]);
      char id[32];
      std::snprintf(id, sizeof id, "P%d-%02d", p + 1, i + 1);
      out.data.ids.emplace_back(id);
    }
    first += pen.size;
  }
  return out;
}

}  // namespace chmm::sir
