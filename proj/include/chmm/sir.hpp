#ifndef CHMM_SIR_HPP
#define CHMM_SIR_HPP

#include <array>
#include <string>
#include <vector>

#include "chmm/core.hpp"
#include "chmm/family.hpp"

/// Discrete-time individual-level SIR models on half-day steps, with the
/// sixteen transgenic/non-transgenic parameter-sharing variants.
namespace chmm::sir {

enum EpiState : State { kSusceptible = 0, kInfectious = 1, kRemoved = 2 };

/// Observation symbols; kMissing (from core) marks censored cells.
enum Symbol : int { kAlive = 0, kDead = 1, kMoribundRemoved = 2 };

inline constexpr int kNumStates = 3;
inline constexpr int kNonTransgenic = 0;
inline constexpr int kTransgenic = 1;

/// Below this separation of infection and removal rates the S->I entry uses
/// its analytic limit.
inline constexpr double kRateSingularity = 1e-9;

StateSpace sir_states();

struct ChickenMeta {
  int pen = 0;
  bool transgenic = false;
  bool challenge = false;
  /// Last half-day step at which the bird is in its pen.
  int last_present = 0;
  /// Fixed initial pen size N.
  int pen_size = 1;
  /// A bird extracted moribund is removed at the step after its M record;
  /// that step's state is R although the cell is missing. -1 otherwise.
  int implied_removal = -1;

  bool present(int t) const { return t <= last_present; }
};

struct ModelVariant {
  bool split_p = false;
  bool split_beta = false;
  bool has_nu = false;
  bool split_gamma = false;

  /// Model number 1..16 in the conventional numbering.
  static ModelVariant from_index(int model);
  int index() const;
  int free_parameter_count() const;
  std::vector<std::string> parameter_names() const;

  bool operator==(const ModelVariant&) const = default;
};

/// Natural-unit parameters. Rates are per day.
struct SirParams {
  double p_N = 0.5;
  double p_T = 0.5;
  double beta_N = 1.0;
  double beta_T = 1.0;
  double nu_N = 1.0;
  double gamma_N = 1.0;
  double gamma_T = 1.0;

  /// Copies tied values so that the parameter set obeys the variant's sharing.
  SirParams tied(const ModelVariant& variant) const;
  bool satisfies(const ModelVariant& variant) const;

  bool operator==(const SirParams&) const = default;
};

/// The simulation-study parameter set (Model 16).
SirParams reference_params();

/// Per-susceptible infection rate (per day) in a pen holding `infectious_N`
/// non-transgenic and `infectious_T` transgenic present infectious birds.
double force_of_infection(int infectious_N, int infectious_T, bool susceptible_transgenic, int pen_size,
                          const SirParams& params);

using HalfDayMatrix = std::array<double, 9>;

/// Closed-form 0.5-day transition matrix for constant infection rate `a` and
/// removal rate `gamma`. Row-major, states S, I, R.
HalfDayMatrix half_day_transition_matrix(double a, double gamma);

std::array<double, 3> initial_distribution(const ChickenMeta& chicken, const SirParams& params);

double emission_log_prob(int symbol, int state);

/// Log prior over the free parameters in natural units (U(0,1) for
/// probabilities, Exp(1) for rates); kLogZero outside the support.
double prior_log_density(const SirParams& params, const ModelVariant& variant);

/// Free parameters mapped to R^d: p -> log(-log p), rate -> log rate.
std::vector<double> transform(const SirParams& params, const ModelVariant& variant);
SirParams untransform(std::span<const double> u, const ModelVariant& variant);
/// Prior density of the transformed vector (includes the Jacobian).
double prior_log_density_transformed(std::span<const double> u, const ModelVariant& variant);

/// Birds, their metadata and observations.
struct SirData {
  std::vector<std::string> ids;
  std::vector<ChickenMeta> chickens;
  ObservationGrid observations;

  int chickens_count() const { return static_cast<int>(chickens.size()); }
  int steps() const { return observations.steps(); }
  int pens() const;

  /// Throws std::invalid_argument on inconsistent records.
  void validate() const;
  /// Restricts to the birds of one pen (pen index in sorted pen order).
  SirData pen_subset(int pen_index) const;
};

/// Presence derived from observations: a bird stays in its pen up to its
/// last non-missing observation, or one step past a final M record.
int derive_last_present(const ObservationGrid& y, int k);
/// The step after a final M record when it lies inside the window, else -1.
int derive_implied_removal(const ObservationGrid& y, int k);

ChainLayout sir_layout(const std::vector<ChickenMeta>& chickens);

class SirModel final : public CoupledModel {
 public:
  SirModel(std::vector<ChickenMeta> chickens, int steps, const SirParams& params);

  const StateSpace& states() const override { return states_; }
  const ChainLayout& layout() const override { return layout_; }
  int steps() const override { return steps_; }

  void initial_probs(int chain, std::span<double> out) const override;
  void transition(int block, int kind, int t, std::span<const int> block_counts, std::span<double> prob,
                  std::span<double> log_prob) const override;
  double emission_log_prob(int chain, int t, int symbol, int state) const override;
  Trajectories feasible_start(const ObservationGrid& y) const override;

  const SirParams& params() const { return params_; }
  const std::vector<ChickenMeta>& chickens() const { return chickens_; }

 private:
  struct BlockTable {
    int pen_size = 1;
    int max_n = 0;
    int max_t = 0;
    std::vector<double> prob;
    std::vector<double> log_prob;
  };

  void fill_kernel(int pen_size, int kind, int infectious_N, int infectious_T, double* prob, double* log_prob) const;

  StateSpace states_;
  std::vector<ChickenMeta> chickens_;
  ChainLayout layout_;
  int steps_;
  SirParams params_;
  std::vector<BlockTable> tables_;
};

/// Family over one variant's transformed free parameters for a fixed data set.
class SirFamily final : public ModelFamily {
 public:
  SirFamily(std::vector<ChickenMeta> chickens, int steps, ModelVariant variant);

  int dimension() const override { return variant_.free_parameter_count(); }
  std::vector<std::string> parameter_names() const override { return variant_.parameter_names(); }
  double log_prior(std::span<const double> u) const override;
  void sample_prior(Rng& rng, std::span<double> u) const override;
  std::unique_ptr<CoupledModel> build(std::span<const double> u) const override;

  const ModelVariant& variant() const { return variant_; }

 private:
  std::vector<ChickenMeta> chickens_;
  int steps_;
  ModelVariant variant_;
};

}  // namespace chmm::sir

#endif  // CHMM_SIR_HPP
