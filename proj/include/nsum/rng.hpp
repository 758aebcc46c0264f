#pragma once

#include <cmath>
#include <cstdint>

#include "nsum/errors.hpp"
#include "nsum/special.hpp"

namespace nsum {

// Counter-based splittable RNG. A stream is (key, counter); output i is the
// splitmix64 finalizer applied to key + i*golden. fork(i) derives an
// independent child stream, so every chain / study cell / simulation gets
// its own reproducible stream from one root seed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x5851f42d4c957f2dULL)) {}

    Rng fork(std::uint64_t index) const {
        Rng child;
        child.key_ = mix(key_ ^ mix(index + 0x9e3779b97f4a7c15ULL));
        return child;
    }

    std::uint64_t next_u64() {
        const std::uint64_t v = key_ + (++ctr_) * 0x9e3779b97f4a7c15ULL;
        return mix(v);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; never returns zero (safe to take logs).
    double uniform01_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    // Uniform integer in [0, n); n >= 1.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller; consumes exactly two words.
    double normal() {
        const double u1 = uniform01_pos();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mu, double sd) { return mu + sd * normal(); }

    // Gamma(shape, rate) by Marsaglia-Tsang squeeze; shape<1 boosted.
    double gamma(double shape, double rate) {
        if (!(shape > 0.0) || !(rate > 0.0)) throw_domain("gamma: shape and rate must be positive");
        if (shape < 1.0) {
            const double u = uniform01_pos();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / (3.0 * std::sqrt(d));
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01_pos();
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }

    // Poisson: Knuth's product method below 10, Hormann's transformed
    // rejection (PTRS) above.
    std::int64_t poisson(double lambda) {
        if (lambda < 0.0 || !std::isfinite(lambda)) throw_domain("poisson: lambda must be finite and >= 0");
        if (lambda == 0.0) return 0;
        if (lambda < 10.0) {
            const double limit = std::exp(-lambda);
            double prod = 1.0;
            std::int64_t n = 0;
            for (;;) {
                prod *= uniform01_pos();
                if (prod <= limit) return n;
                ++n;
            }
        }
        const double log_lambda = std::log(lambda);
        const double b = 0.931 + 2.53 * std::sqrt(lambda);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform01() - 0.5;
            const double v = uniform01_pos();
            const double us = 0.5 - std::fabs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (kf < 0.0) continue;
            const auto k = static_cast<std::int64_t>(kf);
            if (us >= 0.07 && v <= v_r) return k;
            if (us < 0.013 && v > us) continue;
            const double lhs = std::log(v * inv_alpha / (a / (us * us) + b));
            const double rhs = -lambda + kf * log_lambda - math::lgamma(kf + 1.0);
            if (lhs <= rhs) return k;
        }
    }

  private:
    Rng() = default;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_ = 0;
    std::uint64_t ctr_ = 0;
};

} // namespace nsum
