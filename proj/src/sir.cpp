#include "chmm/sir.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace chmm::sir {

StateSpace sir_states() { return StateSpace({"S", "I", "R"}); }

ModelVariant ModelVariant::from_index(int model) {
  if (model < 1 || model > 16) throw std::invalid_argument("model index must be in 1..16, got " + std::to_string(model));
  const int bits = model - 1;
  return ModelVariant{(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0, (bits & 8) != 0};
}

int ModelVariant::index() const {
  return 1 + (split_p ? 1 : 0) + (split_beta ? 2 : 0) + (has_nu ? 4 : 0) + (split_gamma ? 8 : 0);
}

int ModelVariant::free_parameter_count() const {
  return 3 + (split_p ? 1 : 0) + (split_beta ? 1 : 0) + (has_nu ? 1 : 0) + (split_gamma ? 1 : 0);
}

std::vector<std::string> ModelVariant::parameter_names() const {
  std::vector<std::string> names;
  if (split_p) {
    names.insert(names.end(), {"p_N", "p_T"});
  } else {
    names.push_back("p");
  }
  if (has_nu) names.push_back("nu_N");
  if (split_beta) {
    names.insert(names.end(), {"beta_N", "beta_T"});
  } else {
    names.push_back("beta");
  }
  if (split_gamma) {
    names.insert(names.end(), {"gamma_N", "gamma_T"});
  } else {
    names.push_back("gamma");
  }
  return names;
}

SirParams SirParams::tied(const ModelVariant& variant) const {
  SirParams out = *this;
  if (!variant.split_p) out.p_T = out.p_N;
  if (!variant.split_beta) out.beta_T = out.beta_N;
  if (!variant.has_nu) out.nu_N = 1.0;
  if (!variant.split_gamma) out.gamma_T = out.gamma_N;
  return out;
}

bool SirParams::satisfies(const ModelVariant& variant) const { return tied(variant) == *this; }

SirParams reference_params() { return SirParams{0.9, 0.8, 2.3, 1.4, 1.2, 0.5, 0.3}; }

double force_of_infection(int infectious_N, int infectious_T, bool susceptible_transgenic, int pen_size,
                          const SirParams& params) {
  if (infectious_N == 0 && infectious_T == 0) return 0.0;
  const double nu = susceptible_transgenic ? 1.0 : params.nu_N;
  return nu / pen_size * (params.beta_N * infectious_N + params.beta_T * infectious_T);
}

HalfDayMatrix half_day_transition_matrix(double a, double gamma) {
  if (!(a >= 0.0) || !(gamma >= 0.0)) throw std::invalid_argument("transition rates must be non-negative");
  const double e_si = std::exp(-0.5 * a);
  const double e_ir = std::exp(-0.5 * gamma);
  double s_to_i;
  const double gap = std::abs(a - gamma);
  if (gap < kRateSingularity) {
    s_to_i = 0.5 * a * e_si;
  } else {
    // R_g (E_IR - E_SI) rewritten so the difference of exponentials never cancels.
    s_to_i = a * std::exp(-0.5 * std::min(a, gamma)) * (-std::expm1(-0.5 * gap)) / gap;
  }
  const double s_to_r = std::max(0.0, -std::expm1(-0.5 * a) - s_to_i);
  return {e_si, s_to_i, s_to_r, 0.0, e_ir, -std::expm1(-0.5 * gamma), 0.0, 0.0, 1.0};
}

std::array<double, 3> initial_distribution(const ChickenMeta& chicken, const SirParams& params) {
  if (!chicken.challenge) return {1.0, 0.0, 0.0};
  const double p = chicken.transgenic ? params.p_T : params.p_N;
  return {1.0 - p, p, 0.0};
}

double emission_log_prob(int symbol, int state) {
  switch (symbol) {
    case kMissing:
      return 0.0;
    case kAlive:
      return state == kRemoved ? kLogZero : 0.0;
    case kDead:
      return state == kRemoved ? 0.0 : kLogZero;
    case kMoribundRemoved:
      return state == kInfectious ? 0.0 : kLogZero;
    default:
      throw std::invalid_argument("unknown observation symbol " + std::to_string(symbol));
  }
}

namespace {

struct FreeLayout {
  // Positions of each natural parameter in the transformed vector.
  int p_N, p_T, nu_N, beta_N, beta_T, gamma_N, gamma_T;
};

FreeLayout free_layout(const ModelVariant& v) {
  FreeLayout f{};
  int i = 0;
  f.p_N = i++;
  f.p_T = v.split_p ? i++ : f.p_N;
  f.nu_N = v.has_nu ? i++ : -1;
  f.beta_N = i++;
  f.beta_T = v.split_beta ? i++ : f.beta_N;
  f.gamma_N = i++;
  f.gamma_T = v.split_gamma ? i++ : f.gamma_N;
  return f;
}

bool is_probability_slot(const ModelVariant& v, int i) { return i == 0 || (v.split_p && i == 1); }

double prob_log_density(double p) { return (p > 0.0 && p < 1.0) ? 0.0 : kLogZero; }
double rate_log_density(double r) { return r > 0.0 ? -r : kLogZero; }

}  // namespace

double prior_log_density(const SirParams& params, const ModelVariant& variant) {
  if (!params.satisfies(variant)) throw std::invalid_argument("parameters violate the variant's sharing pattern");
  double lp = prob_log_density(params.p_N) + rate_log_density(params.beta_N) + rate_log_density(params.gamma_N);
  if (variant.split_p) lp += prob_log_density(params.p_T);
  if (variant.split_beta) lp += rate_log_density(params.beta_T);
  if (variant.has_nu) lp += rate_log_density(params.nu_N);
  if (variant.split_gamma) lp += rate_log_density(params.gamma_T);
  return lp;
}

std::vector<double> transform(const SirParams& params, const ModelVariant& variant) {
  if (!params.satisfies(variant)) throw std::invalid_argument("parameters violate the variant's sharing pattern");
  auto prob = [](double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("probability parameter outside (0,1)");
    return std::log(-std::log(p));
  };
  auto rate = [](double r) {
    if (!(r > 0.0)) throw std::domain_error("rate parameter must be positive");
    return std::log(r);
  };
  const auto f = free_layout(variant);
  std::vector<double> u(variant.free_parameter_count());
  u[f.p_N] = prob(params.p_N);
  u[f.p_T] = prob(params.p_T);
  if (f.nu_N >= 0) u[f.nu_N] = rate(params.nu_N);
  u[f.beta_N] = rate(params.beta_N);
  u[f.beta_T] = rate(params.beta_T);
  u[f.gamma_N] = rate(params.gamma_N);
  u[f.gamma_T] = rate(params.gamma_T);
  return u;
}

SirParams untransform(std::span<const double> u, const ModelVariant& variant) {
  if (static_cast<int>(u.size()) != variant.free_parameter_count())
    throw DimensionError("transformed parameter vector has the wrong length");
  const auto f = free_layout(variant);
  auto prob = [](double x) { return std::exp(-std::exp(x)); };
  SirParams p;
  p.p_N = prob(u[f.p_N]);
  p.p_T = prob(u[f.p_T]);
  p.nu_N = f.nu_N >= 0 ? std::exp(u[f.nu_N]) : 1.0;
  p.beta_N = std::exp(u[f.beta_N]);
  p.beta_T = std::exp(u[f.beta_T]);
  p.gamma_N = std::exp(u[f.gamma_N]);
  p.gamma_T = std::exp(u[f.gamma_T]);
  return p;
}

double prior_log_density_transformed(std::span<const double> u, const ModelVariant& variant) {
  if (static_cast<int>(u.size()) != variant.free_parameter_count())
    throw DimensionError("transformed parameter vector has the wrong length");
  // Both maps give the same form: log density + log|Jacobian| = x - exp(x).
  double lp = 0.0;
  for (double x : u) lp += x - std::exp(x);
  return lp;
}

int SirData::pens() const {
  std::set<int> ids_seen;
  for (const auto& c : chickens) ids_seen.insert(c.pen);
  return static_cast<int>(ids_seen.size());
}

void SirData::validate() const {
  const int K = chickens_count();
  if (static_cast<int>(ids.size()) != K) throw std::invalid_argument("chicken id count mismatch");
  if (observations.chains() != K) throw std::invalid_argument("observation rows do not match the chicken list");
  std::map<int, int> pen_counts;
  for (const auto& c : chickens) ++pen_counts[c.pen];
  for (int k = 0; k < K; ++k) {
    const auto& c = chickens[k];
    if (c.pen_size != pen_counts[c.pen])
      throw std::invalid_argument("pen size of chicken " + ids[k] + " does not match its pen");
    if (c.last_present != derive_last_present(observations, k) ||
        c.implied_removal != derive_implied_removal(observations, k))
      throw std::invalid_argument("presence of chicken " + ids[k] + " disagrees with its observations");
    bool dead = false, extracted = false;
    for (int t = 0; t < steps(); ++t) {
      const int y = observations(k, t);
      if (y == kMissing) continue;
      if (y != kAlive && y != kDead && y != kMoribundRemoved)
        throw std::invalid_argument("unknown observation symbol for chicken " + ids[k]);
      if (extracted) throw std::invalid_argument("chicken " + ids[k] + " has observations after moribund removal");
      if (dead && y != kDead) throw std::invalid_argument("chicken " + ids[k] + " observed alive after death");
      if (y == kDead) dead = true;
      if (y == kMoribundRemoved) extracted = true;
    }
  }
}

SirData SirData::pen_subset(int pen_index) const {
  std::set<int> pen_ids;
  for (const auto& c : chickens) pen_ids.insert(c.pen);
  if (pen_index < 0 || pen_index >= static_cast<int>(pen_ids.size())) throw std::out_of_range("pen index");
  const int pen = *std::next(pen_ids.begin(), pen_index);
  SirData out;
  std::vector<int> rows;
  for (int k = 0; k < chickens_count(); ++k) {
    if (chickens[k].pen == pen) rows.push_back(k);
  }
  out.observations = ObservationGrid(static_cast<int>(rows.size()), steps());
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    out.ids.push_back(ids[rows[i]]);
    out.chickens.push_back(chickens[rows[i]]);
    for (int t = 0; t < steps(); ++t) out.observations.set(i, t, observations(rows[i], t));
  }
  return out;
}

int derive_last_present(const ObservationGrid& y, int k) {
  const int removal = derive_implied_removal(y, k);
  if (removal >= 0) return removal;
  for (int t = y.steps() - 1; t > 0; --t) {
    if (!y.missing(k, t)) return t;
  }
  return 0;
}

int derive_implied_removal(const ObservationGrid& y, int k) {
  for (int t = y.steps() - 1; t >= 0; --t) {
    if (y.missing(k, t)) continue;
    return y(k, t) == kMoribundRemoved && t + 1 < y.steps() ? t + 1 : -1;
  }
  return -1;
}

ChainLayout sir_layout(const std::vector<ChickenMeta>& chickens) {
  std::set<int> pens;
  for (const auto& c : chickens) pens.insert(c.pen);
  std::map<int, int> block_of;
  int b = 0;
  for (int pen : pens) block_of[pen] = b++;
  std::vector<ChainInfo> info;
  info.reserve(chickens.size());
  for (const auto& c : chickens) info.push_back({block_of[c.pen], c.transgenic ? kTransgenic : kNonTransgenic, c.last_present});
  return ChainLayout(std::move(info), 2);
}

SirModel::SirModel(std::vector<ChickenMeta> chickens, int steps, const SirParams& params)
    : states_(sir_states()), chickens_(std::move(chickens)), layout_(sir_layout(chickens_)), steps_(steps),
      params_(params) {
  if (steps_ < 1) throw std::invalid_argument("at least one time step required");
  tables_.resize(layout_.blocks());
  for (int b = 0; b < layout_.blocks(); ++b) {
    auto& tab = tables_[b];
    const auto& members = layout_.block_members(b);
    tab.pen_size = chickens_[members.front()].pen_size;
    for (int k : members) {
      if (chickens_[k].pen_size != tab.pen_size) throw std::invalid_argument("inconsistent pen sizes within a pen");
      (chickens_[k].transgenic ? tab.max_t : tab.max_n) += 1;
    }
    const std::size_t cells = static_cast<std::size_t>(tab.max_n + 1) * (tab.max_t + 1) * 2 * 9;
    tab.prob.resize(cells);
    tab.log_prob.resize(cells);
    std::size_t off = 0;
    for (int i_n = 0; i_n <= tab.max_n; ++i_n)
      for (int i_t = 0; i_t <= tab.max_t; ++i_t)
        for (int kind = 0; kind < 2; ++kind, off += 9)
          fill_kernel(tab.pen_size, kind, i_n, i_t, tab.prob.data() + off, tab.log_prob.data() + off);
  }
}

void SirModel::fill_kernel(int pen_size, int kind, int infectious_N, int infectious_T, double* prob,
                           double* log_prob) const {
  const double a = force_of_infection(infectious_N, infectious_T, kind == kTransgenic, pen_size, params_);
  const double gamma = kind == kTransgenic ? params_.gamma_T : params_.gamma_N;
  const auto m = half_day_transition_matrix(a, gamma);
  for (int i = 0; i < 9; ++i) {
    prob[i] = m[i];
    if (log_prob) log_prob[i] = m[i] > 0.0 ? std::log(m[i]) : kLogZero;
  }
}

void SirModel::initial_probs(int chain, std::span<double> out) const {
  const auto row = initial_distribution(chickens_[chain], params_);
  std::copy(row.begin(), row.end(), out.begin());
}

void SirModel::transition(int block, int kind, int /*t*/, std::span<const int> block_counts, std::span<double> prob,
                          std::span<double> log_prob) const {
  const int i_n = block_counts[kNonTransgenic * kNumStates + kInfectious];
  const int i_t = block_counts[kTransgenic * kNumStates + kInfectious];
  const auto& tab = tables_[block];
  if (i_n > tab.max_n || i_t > tab.max_t) {
    fill_kernel(tab.pen_size, kind, i_n, i_t, prob.data(), log_prob.empty() ? nullptr : log_prob.data());
    return;
  }
  const std::size_t off = ((static_cast<std::size_t>(i_n) * (tab.max_t + 1) + i_t) * 2 + kind) * 9;
  std::copy_n(tab.prob.data() + off, 9, prob.data());
  if (!log_prob.empty()) std::copy_n(tab.log_prob.data() + off, 9, log_prob.data());
}

double SirModel::emission_log_prob(int chain, int t, int symbol, int state) const {
  if (t == chickens_[chain].implied_removal) return state == kRemoved ? 0.0 : kLogZero;
  return sir::emission_log_prob(symbol, state);
}

Trajectories SirModel::feasible_start(const ObservationGrid& y) const {
  const int K = static_cast<int>(chickens_.size());
  const int T = steps_;
  if (y.chains() != K || y.steps() != T) throw DimensionError("observations do not match the model");
  Trajectories x(K, T, kSusceptible);
  // onset[k]: first step not susceptible (T if never); death[k]: first R step.
  // Only pinned challenge birds may be infectious at step 0.
  std::vector<int> onset(K, T), death(K, T);
  std::vector<bool> pinned(K, false);

  for (int k = 0; k < K; ++k) {
    const auto& c = chickens_[k];
    int dead_at = -1, moribund_at = -1;
    for (int t = 0; t <= c.last_present && t < T; ++t) {
      if (y(k, t) == kDead && dead_at < 0) dead_at = t;
      if (y(k, t) == kMoribundRemoved) moribund_at = t;
    }
    const double p = c.transgenic ? params_.p_T : params_.p_N;
    if (c.challenge && p > 0.0) {
      onset[k] = 0;
      pinned[k] = true;
    } else if (moribund_at >= 0) {
      onset[k] = std::max(1, moribund_at - 1);
    } else if (dead_at >= 0) {
      onset[k] = std::max(1, dead_at - 1);
    }
    if (dead_at >= 0) death[k] = dead_at;
    if (c.implied_removal >= 0) death[k] = c.implied_removal;
  }

  auto fill = [&](int k) {
    const int last = chickens_[k].last_present;
    for (int t = 0; t < T; ++t) {
      State s = kSusceptible;
      if (t >= death[k]) {
        s = kRemoved;
      } else if (t >= onset[k]) {
        s = kInfectious;
      }
      x.set(k, t, t <= last ? s : x(k, last));
    }
  };
  for (int k = 0; k < K; ++k) fill(k);

  // Move unexplained infections earlier until some present bird in the pen is
  // infectious in the preceding step.
  const int max_rounds = K * T + 1;
  for (int round = 0; round < max_rounds; ++round) {
    bool changed = false;
    for (int k = 0; k < K; ++k) {
      if (pinned[k] || onset[k] >= T || onset[k] == 0) continue;
      const int tau = onset[k];
      int pressure = 0;
      for (int j = 0; j < K; ++j) {
        if (j != k && chickens_[j].pen == chickens_[k].pen && chickens_[j].present(tau - 1) &&
            x(j, tau - 1) == kInfectious)
          ++pressure;
      }
      if (pressure > 0) continue;
      if (tau - 1 < 1) throw SupportError("no infection source can explain the infection of chicken " + std::to_string(k));
      onset[k] = tau - 1;
      fill(k);
      changed = true;
    }
    if (!changed) break;
  }
  if (log_complete_density(x, y, *this) == kLogZero)
    throw SupportError("could not construct a support-consistent initial trajectory");
  return x;
}

SirFamily::SirFamily(std::vector<ChickenMeta> chickens, int steps, ModelVariant variant)
    : chickens_(std::move(chickens)), steps_(steps), variant_(variant) {}

double SirFamily::log_prior(std::span<const double> u) const { return prior_log_density_transformed(u, variant_); }

void SirFamily::sample_prior(Rng& rng, std::span<double> u) const {
  for (int i = 0; i < dimension(); ++i) {
    if (is_probability_slot(variant_, i)) {
      double p = rng.uniform();
      while (p <= 0.0) p = rng.uniform();
      u[i] = std::log(-std::log(p));
    } else {
      u[i] = std::log(-std::log1p(-rng.uniform()));
    }
  }
}

std::unique_ptr<CoupledModel> SirFamily::build(std::span<const double> u) const {
  return std::make_unique<SirModel>(chickens_, steps_, untransform(u, variant_));
}

}  // namespace chmm::sir
