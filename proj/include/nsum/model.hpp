#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nsum/ard.hpp"
#include "nsum/target.hpp"

namespace nsum {

// Fixed flat layout of the unconstrained parameter vector:
//   [ mu_rho(K) | sigma2_rho(K) | rho(K*M, row-major by group) | w(K) | delta(R) | sigma_delta(1) ]
// Positives are log-transformed; sigma_delta is logit-scaled into (0, upper).
struct ParamLayout {
    std::size_t K = 0, M = 0, R = 0;

    std::size_t dim() const { return 3 * K + K * M + R + 1; }
    std::size_t mu_rho(std::size_t k) const { return k; }
    std::size_t sigma2_rho(std::size_t k) const { return K + k; }
    std::size_t rho(std::size_t k, std::size_t m) const { return 2 * K + k * M + m; }
    std::size_t w(std::size_t k) const { return 2 * K + K * M + k; }
    std::size_t delta(std::size_t i) const { return 2 * K + K * M + K + i; }
    std::size_t sigma_delta() const { return 3 * K + K * M + R; }
    std::string name(std::size_t j) const;

    bool operator==(const ParamLayout&) const = default;
};

// Prior hyperparameters and fixed constants of the pooled model.
struct HyperConfig {
    double sigma_mu_rho = 10.0;      // half-normal sd on mu_rho[k]
    double tau = 1.0;                // half-normal sd on sigma2_rho[k]
    double sigma_w = 10.0;           // half-normal sd on w[k]
    double mu_delta_fixed = 5.5;     // delta prior mean, fixed for identifiability
    double sigma_delta_upper = 1.5;  // uniform prior bound on sigma_delta

    void validate() const;
};

// Sampler-facing shape of the data: everything the posterior needs besides
// the counts themselves.
struct ModelDims {
    std::size_t R = 0, K = 0, M = 0;
    std::vector<int> muni_of_respondent;
};

// Named constrained parameters, the user-facing view of one draw.
struct ConstrainedParams {
    std::vector<double> mu_rho;     // K
    std::vector<double> sigma2_rho; // K
    std::vector<double> rho;        // K*M
    std::vector<double> w;          // K
    std::vector<double> delta;      // R
    double sigma_delta = 0.0;
};

// (alpha, beta) of a Gamma(shape alpha, rate beta) with the given mean and
// variance: alpha = mu^2/var, beta = mu/var.
std::pair<double, double> gamma_from_mean_var(double mu, double var);

// log P(Y = y) for Y ~ NegBin(mean mu, dispersion w):
//   Gamma(y+w) / (Gamma(w) y!) * (w/(w+mu))^w * (mu/(w+mu))^y
double nb_log_pmf(long long y, double mu, double w);

// Unnormalized log posterior of the partially pooled model with analytic
// gradient, over the unconstrained vector described by ParamLayout.
class PooledModel final : public TargetDensity {
  public:
    PooledModel(const ARDataset& data, HyperConfig hyper);
    // Raw constructor; permits R = 0 (prior-only density).
    PooledModel(std::vector<long long> counts, ModelDims dims, HyperConfig hyper);

    std::size_t dim() const override { return layout_.dim(); }
    double logp_grad(std::span<const double> theta, std::span<double> grad) const override;
    double logp(std::span<const double> theta) const;

    void constrain(std::span<const double> theta, std::span<double> out) const override;
    std::vector<double> constrain(std::span<const double> theta) const;
    ConstrainedParams constrain_named(std::span<const double> theta) const;
    std::vector<double> unconstrain(const ConstrainedParams& p) const;

    std::string coord_name(std::size_t j) const override { return layout_.name(j); }
    const ParamLayout& layout() const { return layout_; }
    const HyperConfig& hyper() const { return hyper_; }

  private:
    void build_tables();

    ParamLayout layout_;
    HyperConfig hyper_;
    std::vector<int> muni_;           // R
    std::vector<std::int64_t> y_;     // R*K
    std::vector<double> lgamma_y1_;   // R*K, lgamma(y+1), constant
    std::vector<std::int32_t> yidx_;  // R*K index into the per-group distinct-y table
    std::vector<std::int64_t> uy_;    // distinct y values, concatenated per group
    std::vector<std::size_t> uy_off_; // K+1 offsets into uy_
};

} // namespace nsum
