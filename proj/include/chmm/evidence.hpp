#ifndef CHMM_EVIDENCE_HPP
#define CHMM_EVIDENCE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chmm/core.hpp"
#include "chmm/family.hpp"
#include "chmm/mcmc.hpp"
#include "chmm/proposals.hpp"

namespace chmm {

enum class ProposalKind { kMiffbs, kDiffbs };

std::string proposal_name(ProposalKind kind);
ProposalKind parse_proposal(const std::string& name);

/// Importance-sampling settings for the hidden process at one parameter value.
struct StateProposalConfig {
  ProposalKind proposal = ProposalKind::kMiffbs;
  /// Draws per parameter value; 0 picks 1 for MIFFBS and 100 for DIFFBS.
  int l_inner = 0;
  int n_guiding = 100;
  int guiding_burn_in = 10;
  MiffbsOptions miffbs;
  /// DIFFBS: start draw l from guiding sample l instead of the single
  /// highest-density sample.
  bool diffbs_distinct_starts = false;

  int inner_draws() const;

  static StateProposalConfig of(ProposalKind kind) {
    StateProposalConfig c;
    c.proposal = kind;
    return c;
  }
};

struct StateWeight {
  /// log of (1/L) sum p(Y, X_l | theta) / q(X_l | theta); kLogZero after a support failure.
  double log_weight = kLogZero;
  int support_failures = 0;
  int regenerations = 0;
  /// Mean ESS at chain starts over the MIFFBS draws.
  double mean_chain_start_ess = 0.0;
};

/// Unbiased estimate of p(Y | theta) from one guiding ensemble and L draws.
StateWeight estimate_state_weight(const CoupledModel& model, const ObservationGrid& y,
                                  const StateProposalConfig& config, Rng& rng);

struct WeightSummary {
  double log_mean = kLogZero;
  /// sd(w) / (mean(w) sqrt(n)).
  double se_log = 0.0;
  /// log(mean -/+ 3 SE); lo3 is kLogZero when the band reaches zero.
  double lo3 = kLogZero;
  double hi3 = kLogZero;
  int n = 0;
};

WeightSummary summarize_log_weights(std::span<const double> log_weights);

struct EvidenceConfig {
  int n_theta = 1000;
  StateProposalConfig states;
  int threads = 0;
};

struct EvidenceEstimate {
  int model = 0;
  double log_ml = kLogZero;
  double se_log = 0.0;
  double lo3 = kLogZero;
  double hi3 = kLogZero;
  int n_theta = 0;
  int l_inner = 0;
  std::string method;
  int support_failures = 0;
  int regenerations = 0;
  std::vector<double> log_weights;
  std::vector<double> chain_start_ess;
};

/// log p(Y) by importance sampling: theta from `mixture`, hidden states from
/// the configured proposal. Work unit i draws from Rng::stream(seed, i), so the
/// result does not depend on the thread count.
EvidenceEstimate estimate_evidence(const ModelFamily& family, const ObservationGrid& y, const DefenseMixture& mixture,
                                   const EvidenceConfig& config, std::uint64_t seed, int model_id = 0);

/// Self-normalized importance estimate of P(X^k_t = s | Y), laid out
/// [k][t][s]. Each of `draws` units takes a fresh guiding ensemble and one
/// proposal draw from Rng::stream(seed, i). With a mixture, theta is drawn per
/// unit and the weight includes prior / q(theta); otherwise `model` is fixed.
std::vector<double> importance_smoothing_marginals(const CoupledModel& model, const ObservationGrid& y,
                                                   const StateProposalConfig& config, int draws, std::uint64_t seed,
                                                   int threads = 0);
std::vector<double> importance_smoothing_marginals(const ModelFamily& family, const DefenseMixture& mixture,
                                                   const ObservationGrid& y, const StateProposalConfig& config,
                                                   int draws, std::uint64_t seed, int threads = 0);

enum class EvidenceCategory { kBest, kSubstantialSupport, kWeakSupport, kRejected, kMissing };

std::string category_name(EvidenceCategory c);

struct RankingRow {
  int model = 0;
  bool present = false;
  double log_ml = kLogZero;
  double se_log = 0.0;
  double lo3 = kLogZero;
  double hi3 = kLogZero;
  /// 1 for the best model; 0 when missing.
  int rank = 0;
  /// log Bayes factor of the best model against this one.
  double log_bf = 0.0;
  EvidenceCategory category = EvidenceCategory::kMissing;
};

/// Bayes-factor thresholds; a factor exactly on a threshold falls in the weaker class.
inline constexpr double kSubstantialThreshold = 3.2;
inline constexpr double kStrongThreshold = 10.0;

/// One row per model id 1..n_models in id order. The best model (lowest id on
/// ties) is kBest; others by the Bayes factor of the best against them.
std::vector<RankingRow> bayes_factor_table(std::span<const EvidenceEstimate> estimates, int n_models = 16);

enum class Method { kOracle, kPf, kDiffbs, kMiffbs };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct CompareConfig {
  std::vector<Method> methods = {Method::kOracle, Method::kDiffbs, Method::kMiffbs, Method::kPf};
  /// Independent estimates per sampling method.
  int estimates = 100;
  int particles = 5000;
  StateProposalConfig miffbs = StateProposalConfig::of(ProposalKind::kMiffbs);
  StateProposalConfig diffbs = StateProposalConfig::of(ProposalKind::kDiffbs);
  std::size_t oracle_budget = 59049;
  int threads = 0;
};

struct MethodReport {
  Method method = Method::kOracle;
  bool available = true;
  std::string note;
  WeightSummary summary;
  int support_failures = 0;
  double seconds = 0.0;
  std::vector<double> log_estimates;
};

/// Fixed-parameter comparison of marginal-likelihood estimators.
std::vector<MethodReport> compare_methods(const CoupledModel& model, const ObservationGrid& y,
                                          const CompareConfig& config, std::uint64_t seed);

/// Table layout with the shared integer part of each row factored out.
std::string format_compare_report(const std::vector<MethodReport>& reports, const std::string& title);

}  // namespace chmm

#endif  // CHMM_EVIDENCE_HPP
