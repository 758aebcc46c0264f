#include <doctest.h>

#include <cmath>
#include <vector>

#include "nsum/diagnostics.hpp"
#include "nsum/rng.hpp"
#include "nsum/sampler.hpp"
#include "nsum/target.hpp"

using namespace nsum;

namespace {

// Standard normal in `n` dimensions.
class NormalTarget final : public TargetDensity {
  public:
    explicit NormalTarget(std::size_t n) : n_(n) {}
    std::size_t dim() const override { return n_; }
    double logp_grad(std::span<const double> x, std::span<double> grad) const override {
        double lp = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            lp -= 0.5 * x[j] * x[j];
            grad[j] = -x[j];
        }
        return lp;
    }

  private:
    std::size_t n_;
};

// Gamma(shape, rate) through a log transform, so draws live on the real
// line; constrain() maps back to the positive scale.
class LogGammaTarget final : public TargetDensity {
  public:
    LogGammaTarget(double shape, double rate) : shape_(shape), rate_(rate) {}
    std::size_t dim() const override { return 1; }
    double logp_grad(std::span<const double> x, std::span<double> grad) const override {
        const double g = std::exp(x[0]);
        grad[0] = shape_ - rate_ * g;
        return shape_ * x[0] - rate_ * g;
    }
    void constrain(std::span<const double> x, std::span<double> out) const override {
        out[0] = std::exp(x[0]);
    }

  private:
    double shape_, rate_;
};

// Smooth non-quadratic density for integrator checks.
class QuarticTarget final : public TargetDensity {
  public:
    explicit QuarticTarget(std::size_t n) : n_(n) {}
    std::size_t dim() const override { return n_; }
    double logp_grad(std::span<const double> x, std::span<double> grad) const override {
        double lp = 0.0;
        for (std::size_t j = 0; j < n_; ++j) {
            lp -= 0.25 * std::pow(x[j], 4) + 0.5 * x[j] * x[j];
            grad[j] = -std::pow(x[j], 3) - x[j];
        }
        return lp;
    }

  private:
    std::size_t n_;
};

struct MomentSummary {
    double mean, sd;
};

MomentSummary pooled_moments(const PosteriorDraws& d, std::size_t j) {
    double s1 = 0.0, s2 = 0.0;
    const double n = static_cast<double>(d.chains) * d.kept;
    for (int c = 0; c < d.chains; ++c)
        for (int t = 0; t < d.kept; ++t) {
            const double v = d.at(c, t, j);
            s1 += v;
            s2 += v * v;
        }
    const double mean = s1 / n;
    return {mean, std::sqrt(s2 / n - mean * mean)};
}

} // namespace

TEST_CASE("sampler recovers a 10-d standard normal") {
    NormalTarget target(10);
    SamplerConfig cfg;
    cfg.chains = 2;
    cfg.iterations = 3000;
    cfg.warmup = 1000;
    cfg.seed = 1234;
    const PosteriorDraws draws = sample(target, cfg);
    REQUIRE(draws.kept == 2000);

    for (std::size_t j = 0; j < 10; ++j) {
        const auto m = pooled_moments(draws, j);
        CHECK(std::fabs(m.mean) < 0.05);
        CHECK(std::fabs(m.sd - 1.0) < 0.05);
        const auto r = split_rhat(draws.chains_of(j));
        CHECK(r.value < 1.05);
    }

    // acceptance statistic on-target after warmup
    double acc = 0.0;
    for (const auto& s : draws.stats)
        for (double a : s.accept_stat) acc += a;
    acc /= static_cast<double>(draws.chains) * draws.kept;
    CHECK(std::fabs(acc - cfg.target_accept) < 0.1);
}

TEST_CASE("sampler recovers Gamma(3, rate 2) through the log transform") {
    LogGammaTarget target(3.0, 2.0);
    SamplerConfig cfg;
    cfg.chains = 2;
    cfg.iterations = 3000;
    cfg.warmup = 1000;
    cfg.seed = 99;
    const PosteriorDraws draws = sample(target, cfg);
    const auto m = pooled_moments(draws, 0);
    CHECK(std::fabs(m.mean - 1.5) < 0.05);
    for (int c = 0; c < draws.chains; ++c)
        for (int t = 0; t < draws.kept; ++t) CHECK(draws.at(c, t, 0) > 0.0);
}

TEST_CASE("same seed and config give bitwise-identical draws") {
    NormalTarget target(4);
    SamplerConfig cfg;
    cfg.chains = 2;
    cfg.iterations = 400;
    cfg.warmup = 200;
    cfg.seed = 777;
    const PosteriorDraws a = sample(target, cfg);
    const PosteriorDraws b = sample(target, cfg);
    CHECK(a.draws == b.draws);
    cfg.parallel_chains = false; // thread layout must not change results
    const PosteriorDraws c = sample(target, cfg);
    CHECK(a.draws == c.draws);
}

TEST_CASE("init_chain") {
    const auto zero = init_chain(8, 42, 0, 0.0);
    for (double v : zero) CHECK(v == 0.0);

    const auto c0 = init_chain(8, 42, 0, 2.0);
    const auto c1 = init_chain(8, 42, 1, 2.0);
    CHECK(c0 != c1);
    CHECK(c0 == init_chain(8, 42, 0, 2.0));
    for (double v : c0) {
        CHECK(v >= -2.0);
        CHECK(v <= 2.0);
    }
}

TEST_CASE("init points map into the constrained support") {
    ModelDims dims{2, 2, 1, {0, 0}};
    PooledModel model({1, 0, 2, 3}, dims, HyperConfig{});
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto theta = init_chain(model.dim(), seed, 0, 2.0);
        const auto named = model.constrain_named(theta);
        for (double v : named.mu_rho) CHECK(v > 0.0);
        for (double v : named.sigma2_rho) CHECK(v > 0.0);
        for (double v : named.rho) CHECK(v > 0.0);
        for (double v : named.w) CHECK(v > 0.0);
        CHECK(named.sigma_delta > 0.0);
        CHECK(named.sigma_delta < 1.5);
    }
}

TEST_CASE("leapfrog is reversible") {
    QuarticTarget target(5);
    Rng rng(31);
    std::vector<double> x0(5), p(5), x(5), g(5);
    for (auto& v : x0) v = rng.uniform(-1.0, 1.0);
    for (auto& v : p) v = rng.normal();

    const std::vector<double> inv_mass(5, 1.0);
    const double eps = 0.05;
    const int L = 40;
    const auto leapfrog = [&](std::vector<double>& xs, std::vector<double>& ps) {
        (void)target.logp_grad(xs, g);
        for (int l = 0; l < L; ++l) {
            for (std::size_t j = 0; j < 5; ++j) ps[j] += 0.5 * eps * g[j];
            for (std::size_t j = 0; j < 5; ++j) xs[j] += eps * inv_mass[j] * ps[j];
            (void)target.logp_grad(xs, g);
            for (std::size_t j = 0; j < 5; ++j) ps[j] += 0.5 * eps * g[j];
        }
    };
    x = x0;
    auto p_fwd = p;
    leapfrog(x, p_fwd);
    for (auto& v : p_fwd) v = -v; // reverse momentum
    leapfrog(x, p_fwd);
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::fabs(x[j] - x0[j]) < 1e-8);
}

TEST_CASE("energy drift shrinks ~100x when the step size drops 10x") {
    QuarticTarget target(3);
    Rng rng(67);
    const std::vector<double> inv_mass(3, 1.0);

    const auto drift = [&](double eps, int steps, Rng& r) {
        std::vector<double> x(3), p(3), g(3);
        for (auto& v : x) v = r.uniform(-1.0, 1.0);
        for (auto& v : p) v = r.normal();
        double lp = target.logp_grad(x, g);
        double k0 = 0.0;
        for (double v : p) k0 += 0.5 * v * v;
        const double h0 = -lp + k0;
        for (int l = 0; l < steps; ++l) {
            for (std::size_t j = 0; j < 3; ++j) p[j] += 0.5 * eps * g[j];
            for (std::size_t j = 0; j < 3; ++j) x[j] += eps * p[j];
            lp = target.logp_grad(x, g);
            for (std::size_t j = 0; j < 3; ++j) p[j] += 0.5 * eps * g[j];
        }
        double k1 = 0.0;
        for (double v : p) k1 += 0.5 * v * v;
        return std::fabs((-lp + k1) - h0);
    };

    // integrate over the same total time tau = 2 at eps and eps/10
    double coarse = 0.0, fine = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        Rng r1 = rng.fork(rep).fork(0);
        Rng r2 = rng.fork(rep).fork(0); // identical start for both resolutions
        coarse += drift(0.1, 20, r1);
        fine += drift(0.01, 200, r2);
    }
    const double ratio = coarse / fine;
    CHECK(ratio > 30.0);
    CHECK(ratio < 300.0);
}

TEST_CASE("divergences are flagged, not silently dropped") {
    // A target with an extreme scale gap plus a huge forced step size; the
    // sampler must still return the right number of draws and flag the bad
    // trajectories it produced.
    NormalTarget target(2);
    SamplerConfig cfg;
    cfg.chains = 1;
    cfg.iterations = 60;
    cfg.warmup = 0; // no adaptation: keep the initial step size
    cfg.seed = 3;
    const PosteriorDraws draws = sample(target, cfg);
    CHECK(draws.kept == 60);
    CHECK(draws.stats[0].divergent.size() == 60);
}

TEST_CASE("sampler config validation") {
    SamplerConfig cfg;
    cfg.warmup = cfg.iterations; // not allowed
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = SamplerConfig{};
    cfg.chains = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = SamplerConfig{};
    cfg.target_accept = 1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}
