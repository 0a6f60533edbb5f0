#ifndef CHMM_FAMILY_HPP
#define CHMM_FAMILY_HPP

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "chmm/core.hpp"
#include "chmm/random.hpp"

namespace chmm {

/// A parametric family of coupled models over an unconstrained (transformed)
/// parameter vector. The prior density is expressed in transformed space,
/// Jacobian included.
class ModelFamily {
 public:
  virtual ~ModelFamily() = default;

  virtual int dimension() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual double log_prior(std::span<const double> u) const = 0;
  virtual void sample_prior(Rng& rng, std::span<double> u) const = 0;
  virtual std::unique_ptr<CoupledModel> build(std::span<const double> u) const = 0;
};

}  // namespace chmm

#endif  // CHMM_FAMILY_HPP
