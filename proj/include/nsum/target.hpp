#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace nsum {

// Differentiable unnormalized log density over an unconstrained vector.
// The sampler works purely against this interface; `constrain` maps a point
// into the reporting parameterization (same length, identity by default).
class TargetDensity {
  public:
    virtual ~TargetDensity() = default;

    virtual std::size_t dim() const = 0;

    // Returns log p(x) and writes d log p / dx into grad (length dim()).
    virtual double logp_grad(std::span<const double> x, std::span<double> grad) const = 0;

    virtual void constrain(std::span<const double> x, std::span<double> out) const {
        for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j];
    }

    virtual std::string coord_name(std::size_t j) const { return "theta." + std::to_string(j); }
};

} // namespace nsum
