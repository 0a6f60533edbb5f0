#include "chmm/evidence.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "chmm/exact.hpp"
#include "chmm/parallel.hpp"
#include "chmm/pf.hpp"

namespace chmm {

std::string proposal_name(ProposalKind kind) { return kind == ProposalKind::kMiffbs ? "miffbs" : "diffbs"; }

ProposalKind parse_proposal(const std::string& name) {
  if (name == "miffbs") return ProposalKind::kMiffbs;
  if (name == "diffbs") return ProposalKind::kDiffbs;
  throw std::invalid_argument("unknown proposal '" + name + "' (expected miffbs or diffbs)");
}

int StateProposalConfig::inner_draws() const {
  if (l_inner > 0) return l_inner;
  return proposal == ProposalKind::kMiffbs ? 1 : 100;
}

StateWeight estimate_state_weight(const CoupledModel& model, const ObservationGrid& y,
                                  const StateProposalConfig& config, Rng& rng) {
  StateWeight result;
  const EmissionTable emissions(model, y);
  GuidingEnsemble ensemble;
  try {
    ensemble = generate_guiding_samples(model, emissions, y, config.n_guiding, config.guiding_burn_in, rng);
  } catch (const SupportError&) {
    result.support_failures = 1;
    return result;
  }
  const int L = config.inner_draws();
  std::vector<double> log_w(L, kLogZero);
  double ess_sum = 0.0;
  int ess_count = 0;
  const int best = config.proposal == ProposalKind::kDiffbs ? select_high_posterior(ensemble, y, model) : 0;
  for (int l = 0; l < L; ++l) {
    try {
      ProposalDraw draw;
      if (config.proposal == ProposalKind::kDiffbs) {
        const int start = config.diffbs_distinct_starts ? l % ensemble.size() : best;
        draw = diffbs_propose(ensemble.samples[start].x(), model, emissions, rng);
      } else {
        MiffbsDiagnostics diag;
        if (l + 1 == L) {
          draw = miffbs_propose(ensemble, model, emissions, rng, config.miffbs, &diag);
        } else {
          GuidingEnsemble copy = ensemble;
          draw = miffbs_propose(copy, model, emissions, rng, config.miffbs, &diag);
        }
        result.regenerations += diag.regenerations;
        for (double e : diag.chain_start_ess) ess_sum += e;
        ess_count += static_cast<int>(diag.chain_start_ess.size());
      }
      log_w[l] = log_complete_density(draw.x, y, model) - draw.log_q;
    } catch (const SupportError&) {
      ++result.support_failures;
    }
  }
  result.log_weight = log_sum_exp(log_w) - std::log(static_cast<double>(L));
  result.mean_chain_start_ess = ess_count > 0 ? ess_sum / ess_count : 0.0;
  return result;
}

WeightSummary summarize_log_weights(std::span<const double> log_weights) {
  WeightSummary s;
  s.n = static_cast<int>(log_weights.size());
  if (s.n == 0) throw std::invalid_argument("no weights to summarize");
  const double hi = *std::max_element(log_weights.begin(), log_weights.end());
  if (hi == kLogZero) {
    s.se_log = std::numeric_limits<double>::infinity();
    return s;
  }
  double mean = 0.0;
  for (double lw : log_weights) mean += std::exp(lw - hi);
  mean /= s.n;
  double ss = 0.0;
  for (double lw : log_weights) {
    const double d = std::exp(lw - hi) - mean;
    ss += d * d;
  }
  const double sd = s.n > 1 ? std::sqrt(ss / (s.n - 1)) : 0.0;
  s.log_mean = hi + std::log(mean);
  s.se_log = sd / (mean * std::sqrt(static_cast<double>(s.n)));
  s.lo3 = 3.0 * s.se_log < 1.0 ? s.log_mean + std::log1p(-3.0 * s.se_log) : kLogZero;
  s.hi3 = s.log_mean + std::log1p(3.0 * s.se_log);
  return s;
}

EvidenceEstimate estimate_evidence(const ModelFamily& family, const ObservationGrid& y, const DefenseMixture& mixture,
                                   const EvidenceConfig& config, std::uint64_t seed, int model_id) {
  if (config.n_theta < 1) throw std::invalid_argument("n_theta must be positive");
  if (mixture.dimension() != family.dimension()) throw DimensionError("mixture dimension does not match the model");
  const int n = config.n_theta;
  std::vector<StateWeight> units(n);
  std::vector<double> log_w(n, kLogZero);
  parallel_for(n, resolve_threads(config.threads), [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    std::vector<double> u(family.dimension());
    mixture.sample(rng, family, u);
    const double lp = family.log_prior(u);
    const double lq = mixture.log_density(u, family);
    const auto model = family.build(u);
    units[i] = estimate_state_weight(*model, y, config.states, rng);
    if (units[i].log_weight != kLogZero) log_w[i] = lp - lq + units[i].log_weight;
  });

  EvidenceEstimate est;
  est.model = model_id;
  const auto s = summarize_log_weights(log_w);
  est.log_ml = s.log_mean;
  est.se_log = s.se_log;
  est.lo3 = s.lo3;
  est.hi3 = s.hi3;
  est.n_theta = n;
  est.l_inner = config.states.inner_draws();
  est.method = proposal_name(config.states.proposal);
  for (const auto& u : units) {
    est.support_failures += u.support_failures;
    est.regenerations += u.regenerations;
    est.chain_start_ess.push_back(u.mean_chain_start_ess);
  }
  est.log_weights = std::move(log_w);
  return est;
}

namespace {

struct WeightedPath {
  double log_weight = kLogZero;
  Trajectories x;
};

WeightedPath weighted_path(const CoupledModel& model, const ObservationGrid& y, const StateProposalConfig& config,
                           Rng& rng) {
  WeightedPath out;
  const EmissionTable emissions(model, y);
  try {
    auto ensemble = generate_guiding_samples(model, emissions, y, config.n_guiding, config.guiding_burn_in, rng);
    ProposalDraw draw;
    if (config.proposal == ProposalKind::kDiffbs) {
      draw = diffbs_propose(ensemble.samples[select_high_posterior(ensemble, y, model)].x(), model, emissions, rng);
    } else {
      draw = miffbs_propose(ensemble, model, emissions, rng, config.miffbs);
    }
    out.log_weight = log_complete_density(draw.x, y, model) - draw.log_q;
    out.x = std::move(draw.x);
  } catch (const SupportError&) {
    out.log_weight = kLogZero;
  }
  return out;
}

std::vector<double> accumulate_marginals(const std::vector<WeightedPath>& paths, int chains, int steps, int states) {
  std::vector<double> lw;
  for (const auto& p : paths) lw.push_back(p.log_weight);
  const double total = log_sum_exp(lw);
  if (total == kLogZero) throw SupportError("every smoothing draw had zero weight");
  std::vector<double> out(static_cast<std::size_t>(chains) * steps * states, 0.0);
  for (const auto& p : paths) {
    if (p.log_weight == kLogZero) continue;
    const double w = std::exp(p.log_weight - total);
    for (int k = 0; k < chains; ++k) {
      for (int t = 0; t < steps; ++t) out[(static_cast<std::size_t>(k) * steps + t) * states + p.x(k, t)] += w;
    }
  }
  return out;
}

}  // namespace

std::vector<double> importance_smoothing_marginals(const CoupledModel& model, const ObservationGrid& y,
                                                   const StateProposalConfig& config, int draws, std::uint64_t seed,
                                                   int threads) {
  if (draws < 1) throw std::invalid_argument("at least one smoothing draw is required");
  std::vector<WeightedPath> paths(draws);
  parallel_for(draws, resolve_threads(threads), [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    paths[i] = weighted_path(model, y, config, rng);
  });
  return accumulate_marginals(paths, model.chains(), model.steps(), model.num_states());
}

std::vector<double> importance_smoothing_marginals(const ModelFamily& family, const DefenseMixture& mixture,
                                                   const ObservationGrid& y, const StateProposalConfig& config,
                                                   int draws, std::uint64_t seed, int threads) {
  if (draws < 1) throw std::invalid_argument("at least one smoothing draw is required");
  std::vector<WeightedPath> paths(draws);
  parallel_for(draws, resolve_threads(threads), [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    std::vector<double> u(family.dimension());
    mixture.sample(rng, family, u);
    const double lp = family.log_prior(u);
    const double lq = mixture.log_density(u, family);
    const auto model = family.build(u);
    paths[i] = weighted_path(*model, y, config, rng);
    if (paths[i].log_weight != kLogZero) paths[i].log_weight += lp - lq;
  });
  const auto probe = family.build(std::vector<double>(family.dimension(), 0.0));
  return accumulate_marginals(paths, probe->chains(), probe->steps(), probe->num_states());
}

std::string category_name(EvidenceCategory c) {
  switch (c) {
    case EvidenceCategory::kBest:
      return "best";
    case EvidenceCategory::kSubstantialSupport:
      return "substantial-support";
    case EvidenceCategory::kWeakSupport:
      return "weak-support";
    case EvidenceCategory::kRejected:
      return "rejected";
    case EvidenceCategory::kMissing:
      return "missing";
  }
  return "missing";
}

std::vector<RankingRow> bayes_factor_table(std::span<const EvidenceEstimate> estimates, int n_models) {
  std::vector<RankingRow> rows(n_models);
  for (int m = 0; m < n_models; ++m) rows[m].model = m + 1;
  for (const auto& e : estimates) {
    if (e.model < 1 || e.model > n_models) throw std::out_of_range("model id outside 1.." + std::to_string(n_models));
    auto& r = rows[e.model - 1];
    if (r.present) throw std::invalid_argument("duplicate estimate for model " + std::to_string(e.model));
    r.present = true;
    r.log_ml = e.log_ml;
    r.se_log = e.se_log;
    r.lo3 = e.lo3;
    r.hi3 = e.hi3;
  }
  std::vector<int> order;
  for (int m = 0; m < n_models; ++m) {
    if (rows[m].present) order.push_back(m);
  }
  if (order.empty()) return rows;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rows[a].log_ml > rows[b].log_ml; });
  const double best = rows[order.front()].log_ml;
  constexpr double kTol = 1e-9;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& r = rows[order[i]];
    r.rank = static_cast<int>(i) + 1;
    r.log_bf = best == r.log_ml ? 0.0 : best - r.log_ml;
    if (i == 0) {
      r.category = EvidenceCategory::kBest;
    } else if (r.log_bf <= std::log(kSubstantialThreshold) + kTol) {
      r.category = EvidenceCategory::kSubstantialSupport;
    } else if (r.log_bf <= std::log(kStrongThreshold) + kTol) {
      r.category = EvidenceCategory::kWeakSupport;
    } else {
      r.category = EvidenceCategory::kRejected;
    }
  }
  return rows;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kOracle:
      return "oracle";
    case Method::kPf:
      return "pf";
    case Method::kDiffbs:
      return "diffbs";
    case Method::kMiffbs:
      return "miffbs";
  }
  return "oracle";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kOracle, Method::kPf, Method::kDiffbs, Method::kMiffbs}) {
    if (method_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown method '" + name + "' (expected oracle, pf, diffbs or miffbs)");
}

std::vector<MethodReport> compare_methods(const CoupledModel& model, const ObservationGrid& y,
                                          const CompareConfig& config, std::uint64_t seed) {
  if (config.estimates < 1) throw std::invalid_argument("at least one estimate per method is required");
  const int threads = resolve_threads(config.threads);
  std::vector<MethodReport> reports;
  for (Method m : config.methods) {
    MethodReport rep;
    rep.method = m;
    const auto start = std::chrono::steady_clock::now();
    if (m == Method::kOracle) {
      try {
        const double ll = exact_log_likelihood(model, y, config.oracle_budget);
        rep.log_estimates = {ll};
      } catch (const BudgetExceeded& e) {
        rep.available = false;
        rep.note = e.what();
      }
    } else {
      const int n = config.estimates;
      rep.log_estimates.assign(n, kLogZero);
      std::vector<int> failures(n, 0);
      const auto method_stream = static_cast<std::uint64_t>(m) + 1;
      parallel_for(n, threads, [&](std::size_t i) {
        Rng rng = Rng::stream(seed, method_stream, i);
        if (m == Method::kPf) {
          const auto r = pf_loglik(model, y, config.particles, rng);
          rep.log_estimates[i] = r.log_likelihood;
          failures[i] = r.diagnostic.empty() ? 0 : 1;
        } else {
          const auto& cfg = m == Method::kMiffbs ? config.miffbs : config.diffbs;
          const auto w = estimate_state_weight(model, y, cfg, rng);
          rep.log_estimates[i] = w.log_weight;
          failures[i] = w.support_failures;
        }
      });
      rep.support_failures = std::accumulate(failures.begin(), failures.end(), 0);
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (rep.available) rep.summary = summarize_log_weights(rep.log_estimates);
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::string format_compare_report(const std::vector<MethodReport>& reports, const std::string& title) {
  double reference = kLogZero;
  for (const auto& r : reports) {
    if (r.available && std::isfinite(r.summary.log_mean)) {
      reference = r.summary.log_mean;
      if (r.method == Method::kOracle) break;
    }
  }
  const double integer = std::isfinite(reference) ? std::trunc(reference) : 0.0;
  std::ostringstream out;
  char line[256];
  out << title << "\n";
  std::snprintf(line, sizeof line, "integer part: %.0f\n", integer);
  out << line;
  std::snprintf(line, sizeof line, "%-8s %10s %10s %10s %8s %8s %9s\n", "method", "mean", "lo3", "hi3", "n",
                "failed", "seconds");
  out << line;
  auto frac = [&](double v) {
    char buf[32];
    if (!std::isfinite(v)) return std::string(v < 0 ? "-inf" : "inf");
    std::snprintf(buf, sizeof buf, "%.4f", v - integer);
    return std::string(buf);
  };
  for (const auto& r : reports) {
    if (!r.available) {
      std::snprintf(line, sizeof line, "%-8s %10s   (%s)\n", method_name(r.method).c_str(), "absent", r.note.c_str());
    } else {
      std::snprintf(line, sizeof line, "%-8s %10s %10s %10s %8d %8d %9.2f\n", method_name(r.method).c_str(),
                    frac(r.summary.log_mean).c_str(), frac(r.summary.lo3).c_str(), frac(r.summary.hi3).c_str(),
                    r.summary.n, r.support_failures, r.seconds);
    }
    out << line;
  }
  return out.str();
}

}  // namespace chmm
