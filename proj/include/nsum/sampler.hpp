#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nsum/model.hpp"
#include "nsum/target.hpp"

namespace nsum {

struct SamplerConfig {
    int chains = 2;
    int iterations = 5000;
    int warmup = 3000;
    double target_accept = 0.8;
    int leapfrog_max_steps = 1024; // steps per iteration drawn uniform in [1, max]
    std::uint64_t seed = 0;
    double init_jitter = 2.0;
    bool parallel_chains = true;

    void validate() const;
};

struct ChainStats {
    std::vector<double> accept_stat;    // per kept iteration
    std::vector<double> step_size;      // per kept iteration
    std::vector<std::uint8_t> divergent;
    long long warmup_divergences = 0;
    double adapted_step_size = 0.0;
};

// Kept draws in constrained space, one block per chain, plus the sampler
// statistics and a config echo for replay.
struct PosteriorDraws {
    std::size_t dim = 0;
    int chains = 0;
    int kept = 0;
    std::vector<std::string> names;  // per coordinate
    std::vector<double> draws;       // chains * kept * dim
    std::vector<ChainStats> stats;
    SamplerConfig config;
    ParamLayout layout;    // set when the target is the pooled model
    bool has_layout = false;

    double at(int chain, int iter, std::size_t j) const {
        return draws[(static_cast<std::size_t>(chain) * kept + iter) * dim + j];
    }
    std::span<const double> draw(int chain, int iter) const {
        return {draws.data() + (static_cast<std::size_t>(chain) * kept + iter) * dim, dim};
    }
    // Per-chain series of one coordinate, for diagnostics.
    std::vector<std::vector<double>> chains_of(std::size_t j) const;
};

// Uniform(-jitter, jitter) start point on the unconstrained scale; the
// stream is derived from (seed, chain_id) so chains never coincide.
std::vector<double> init_chain(std::size_t dim, std::uint64_t seed, int chain_id, double jitter);

// Static-length HMC with jittered step count, dual-averaging step size and
// a diagonal metric estimated from the second half of warmup.
PosteriorDraws sample(const TargetDensity& target, const SamplerConfig& cfg);

} // namespace nsum
