#ifndef CHMM_EXACT_HPP
#define CHMM_EXACT_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "chmm/core.hpp"
#include "chmm/random.hpp"

namespace chmm {

/// Largest joint state space the exact filter accepts per block by default.
inline constexpr std::size_t kDefaultJointBudget = 59049;  // 3^10

class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filtered distributions over the joint state of one block. Joint states are
/// mixed-radix base S over the block's chains in layout order, the first chain
/// least significant.
struct JointFilter {
  int block = 0;
  std::vector<int> chains;
  std::size_t joint_states = 0;
  int steps = 0;
  /// steps x joint_states, each row normalized. Rows after a zero-likelihood
  /// step are left empty.
  std::vector<double> filtered;
  std::vector<double> log_norms;
  double log_likelihood = 0.0;

  std::span<const double> row(int t) const { return {filtered.data() + t * joint_states, joint_states}; }
};

std::size_t joint_state_count(const CoupledModel& model, int block);

/// Exact forward filter for one block. Throws BudgetExceeded above `budget`
/// joint states; zero-likelihood data gives log_likelihood = kLogZero.
JointFilter joint_forward_filter(const CoupledModel& model, const ObservationGrid& y, int block,
                                 std::size_t budget = kDefaultJointBudget);

/// Sum of per-block exact log likelihoods.
double exact_log_likelihood(const CoupledModel& model, const ObservationGrid& y,
                            std::size_t budget = kDefaultJointBudget);

/// P(X^k_t = s | Y) for every chain, laid out [k][t][s].
std::vector<double> exact_smoothing_marginals(const CoupledModel& model, const ObservationGrid& y,
                                              std::size_t budget = kDefaultJointBudget);

struct JointDraw {
  Trajectories x;
  /// Exact log posterior density of the draw.
  double log_density = 0.0;
};

/// Exact draw from p(X | Y) by forward filtering and backward sampling on the
/// joint space of each block. Throws SupportError on zero-likelihood data.
JointDraw joint_ffbs_sample(const CoupledModel& model, const ObservationGrid& y, Rng& rng,
                            std::size_t budget = kDefaultJointBudget);

}  // namespace chmm

#endif  // CHMM_EXACT_HPP
