#include "nsum/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "nsum/rng.hpp"

namespace nsum {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDivergenceThreshold = 1e3;
constexpr double kStepSizeFloor = 1e-12;
constexpr double kMassFloor = 1e-6;

// Nesterov dual averaging of log(step size) toward the target acceptance.
struct DualAveraging {
    double mu = 0.0, log_eps = 0.0, log_eps_bar = 0.0, h_bar = 0.0;
    double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    int count = 0;

    void reset(double eps0) {
        mu = std::log(10.0 * eps0);
        log_eps = std::log(eps0);
        log_eps_bar = std::log(eps0);
        h_bar = 0.0;
        count = 0;
    }
    void update(double accept_prob, double target) {
        ++count;
        const double frac = 1.0 / (count + t0);
        h_bar = (1.0 - frac) * h_bar + frac * (target - accept_prob);
        log_eps = mu - std::sqrt(static_cast<double>(count)) / gamma * h_bar;
        const double decay = std::pow(static_cast<double>(count), -kappa);
        log_eps_bar = decay * log_eps + (1.0 - decay) * log_eps_bar;
    }
};

struct ChainResult {
    std::vector<double> kept; // kept * dim, constrained
    ChainStats stats;
};

double kinetic(std::span<const double> p, std::span<const double> inv_mass) {
    double k = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) k += inv_mass[j] * p[j] * p[j];
    return 0.5 * k;
}

// One HMC transition; returns the acceptance statistic and mutates the
// state in place on acceptance.
struct StepOutcome {
    double accept_stat = 0.0;
    bool divergent = false;
};

StepOutcome hmc_step(const TargetDensity& target, std::vector<double>& theta, double& logp,
                     std::vector<double>& grad, double eps, int n_steps,
                     std::span<const double> inv_mass, Rng& rng, std::vector<double>& x,
                     std::vector<double>& g, std::vector<double>& p) {
    const std::size_t dim = theta.size();
    for (std::size_t j = 0; j < dim; ++j) p[j] = rng.normal() / std::sqrt(inv_mass[j]);

    const double h0 = -logp + kinetic(p, inv_mass);
    x = theta;
    g = grad;
    double lp = logp;
    for (int l = 0; l < n_steps; ++l) {
        for (std::size_t j = 0; j < dim; ++j) p[j] += 0.5 * eps * g[j];
        for (std::size_t j = 0; j < dim; ++j) x[j] += eps * inv_mass[j] * p[j];
        lp = target.logp_grad(x, g);
        if (!std::isfinite(lp)) break; // trajectory left the support; reject
        for (std::size_t j = 0; j < dim; ++j) p[j] += 0.5 * eps * g[j];
    }

    StepOutcome out;
    const double h1 = std::isfinite(lp) ? -lp + kinetic(p, inv_mass) : kInf;
    const double log_ratio = h0 - h1;
    out.accept_stat = std::isnan(log_ratio) ? 0.0 : std::min(1.0, std::exp(log_ratio));
    out.divergent = !(h1 - h0 < kDivergenceThreshold);
    if (rng.uniform01() < out.accept_stat) {
        theta.swap(x);
        grad.swap(g);
        logp = lp;
    }
    return out;
}

// Doubling/halving search for a step size whose one-step acceptance
// straddles 1/2 (Hoffman & Gelman's heuristic).
double find_reasonable_epsilon(const TargetDensity& target, std::span<const double> theta,
                               double logp, std::span<const double> grad,
                               std::span<const double> inv_mass, Rng& rng) {
    const std::size_t dim = theta.size();
    std::vector<double> p(dim), x(dim), g(dim), p1(dim);
    for (std::size_t j = 0; j < dim; ++j) p[j] = rng.normal() / std::sqrt(inv_mass[j]);
    const double h0 = -logp + kinetic(p, inv_mass);

    const auto log_ratio_at = [&](double eps) {
        for (std::size_t j = 0; j < dim; ++j) p1[j] = p[j] + 0.5 * eps * grad[j];
        for (std::size_t j = 0; j < dim; ++j) x[j] = theta[j] + eps * inv_mass[j] * p1[j];
        const double lp = target.logp_grad(x, g);
        if (!std::isfinite(lp)) return -kInf;
        for (std::size_t j = 0; j < dim; ++j) p1[j] += 0.5 * eps * g[j];
        const double h1 = -lp + kinetic(p1, inv_mass);
        const double lr = h0 - h1;
        return std::isnan(lr) ? -kInf : lr;
    };

    double eps = 1.0;
    double lr = log_ratio_at(eps);
    const double dir = (lr > std::log(0.5)) ? 1.0 : -1.0;
    for (int it = 0; it < 100; ++it) {
        if (dir * lr <= -dir * std::log(2.0)) break; // ratio^dir fell below 2^-dir
        eps *= std::pow(2.0, dir);
        if (eps > 1e6 || eps < 1e-10) break;
        lr = log_ratio_at(eps);
    }
    return std::clamp(eps, 1e-10, 1e6);
}

// Sample variance per coordinate, shrunk toward a small constant scale so a
// short or still-moving window cannot blow the metric up.
std::vector<double> diag_variance(const std::vector<std::vector<double>>& draws, std::size_t dim) {
    std::vector<double> var(dim, 1.0);
    const std::size_t n = draws.size();
    if (n < 4) return var; // too few draws to trust; keep unit scale
    const double shrink = static_cast<double>(n) / (static_cast<double>(n) + 5.0);
    for (std::size_t j = 0; j < dim; ++j) {
        double mean = 0.0;
        for (const auto& d : draws) mean += d[j];
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (const auto& d : draws) ss += (d[j] - mean) * (d[j] - mean);
        const double raw = ss / static_cast<double>(n - 1);
        var[j] = std::max(shrink * raw + (1.0 - shrink) * 1e-3, kMassFloor);
    }
    return var;
}

// Warmup schedule: step-size-only buffers at both ends, doubling metric
// windows in between. Each window end re-estimates the diagonal metric and
// re-anchors dual averaging; the last (largest) window covers the second
// half of warmup and supplies the sampling metric.
struct AdaptationSchedule {
    int init_end = 0;      // [0, init_end): epsilon only
    int term_begin = 0;    // [term_begin, warmup): epsilon only, final metric
    std::vector<int> window_ends;

    explicit AdaptationSchedule(int warmup) {
        if (warmup < 40) {
            init_end = warmup;
            term_begin = warmup;
            return; // too short for metric adaptation
        }
        init_end = std::max(20, static_cast<int>(0.15 * warmup));
        term_begin = warmup - std::max(10, static_cast<int>(0.1 * warmup));
        int begin = init_end;
        int len = 50;
        while (begin + len < term_begin) {
            // the final window absorbs the remainder when doubling again
            // would not fit
            if (begin + 3 * len >= term_begin) {
                window_ends.push_back(term_begin);
                return;
            }
            window_ends.push_back(begin + len);
            begin += len;
            len *= 2;
        }
        if (window_ends.empty() && term_begin - init_end >= 8) window_ends.push_back(term_begin);
    }
};

ChainResult run_chain(const TargetDensity& target, const SamplerConfig& cfg, int chain_id) {
    const std::size_t dim = target.dim();
    Rng rng_dyn = Rng(cfg.seed).fork(static_cast<std::uint64_t>(chain_id)).fork(1);

    std::vector<double> theta = init_chain(dim, cfg.seed, chain_id, cfg.init_jitter);
    std::vector<double> grad(dim);
    double logp = target.logp_grad(theta, grad);
    {
        // Re-jitter (continuing the init stream) if the start is outside the
        // support of the target.
        Rng rng_init = Rng(cfg.seed).fork(static_cast<std::uint64_t>(chain_id)).fork(0);
        for (std::size_t j = 0; j < dim; ++j) rng_init.uniform01(); // skip the draws init_chain used
        int attempts = 0;
        while (!std::isfinite(logp)) {
            if (++attempts > 1000)
                throw Error(Errc::adaptation_failure,
                            "chain " + std::to_string(chain_id) + ": no finite initial point found");
            for (std::size_t j = 0; j < dim; ++j)
                theta[j] = rng_init.uniform(-cfg.init_jitter, cfg.init_jitter);
            logp = target.logp_grad(theta, grad);
        }
    }

    std::vector<double> inv_mass(dim, 1.0);
    const int warmup = cfg.warmup;
    const AdaptationSchedule schedule(warmup);

    DualAveraging da;
    da.reset(find_reasonable_epsilon(target, theta, logp, grad, inv_mass, rng_dyn));

    const int kept_n = cfg.iterations - warmup;
    ChainResult result;
    result.kept.reserve(static_cast<std::size_t>(kept_n) * dim);
    result.stats.accept_stat.reserve(kept_n);
    result.stats.step_size.reserve(kept_n);
    result.stats.divergent.reserve(kept_n);

    std::vector<std::vector<double>> window; // unconstrained draws of the current metric window
    std::size_t next_window = 0;
    std::vector<double> x(dim), g(dim), p(dim), constrained(dim);
    double eps_final = std::exp(da.log_eps_bar);

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const bool in_warmup = iter < warmup;
        const double eps = in_warmup ? std::exp(da.log_eps) : eps_final;
        if (eps < kStepSizeFloor)
            throw Error(Errc::adaptation_failure,
                        "chain " + std::to_string(chain_id) + ": step size underflow during adaptation");
        const int n_steps = 1 + static_cast<int>(rng_dyn.uniform_int(
                                    static_cast<std::uint64_t>(cfg.leapfrog_max_steps)));
        const StepOutcome outcome =
            hmc_step(target, theta, logp, grad, eps, n_steps, inv_mass, rng_dyn, x, g, p);

        if (in_warmup) {
            da.update(outcome.accept_stat, cfg.target_accept);
            if (outcome.divergent) ++result.stats.warmup_divergences;
            if (iter >= schedule.init_end && iter < schedule.term_begin) {
                window.push_back(theta);
                if (next_window < schedule.window_ends.size() &&
                    iter + 1 == schedule.window_ends[next_window]) {
                    // variance from the window's second half; the first half
                    // may still be in transit after a metric change
                    const std::vector<std::vector<double>> tail(window.begin() + window.size() / 2,
                                                                window.end());
                    inv_mass = diag_variance(tail, dim);
                    window.clear();
                    ++next_window;
                    da.reset(find_reasonable_epsilon(target, theta, logp, grad, inv_mass, rng_dyn));
                }
            }
            if (iter == warmup - 1) {
                window.clear();
                window.shrink_to_fit();
                eps_final = std::exp(da.log_eps_bar);
                if (eps_final < kStepSizeFloor)
                    throw Error(Errc::adaptation_failure,
                                "chain " + std::to_string(chain_id) + ": adapted step size underflow");
            }
        } else {
            target.constrain(theta, constrained);
            result.kept.insert(result.kept.end(), constrained.begin(), constrained.end());
            result.stats.accept_stat.push_back(outcome.accept_stat);
            result.stats.step_size.push_back(eps_final);
            result.stats.divergent.push_back(outcome.divergent ? 1 : 0);
        }
    }
    result.stats.adapted_step_size = eps_final;
    return result;
}

} // namespace

void SamplerConfig::validate() const {
    if (chains < 1) throw_domain("chains must be >= 1");
    if (iterations < 1) throw_domain("iterations must be >= 1");
    if (warmup < 0 || warmup >= iterations) throw_domain("warmup must satisfy 0 <= warmup < iterations");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw_domain("target_accept must lie in (0,1)");
    if (leapfrog_max_steps < 1) throw_domain("leapfrog_max_steps must be >= 1");
    if (init_jitter < 0.0) throw_domain("init_jitter must be >= 0");
}

std::vector<double> init_chain(std::size_t dim, std::uint64_t seed, int chain_id, double jitter) {
    Rng rng = Rng(seed).fork(static_cast<std::uint64_t>(chain_id)).fork(0);
    std::vector<double> theta(dim);
    for (std::size_t j = 0; j < dim; ++j) theta[j] = rng.uniform(-jitter, jitter);
    return theta;
}

std::vector<std::vector<double>> PosteriorDraws::chains_of(std::size_t j) const {
    std::vector<std::vector<double>> out(chains);
    for (int c = 0; c < chains; ++c) {
        out[c].resize(kept);
        for (int t = 0; t < kept; ++t) out[c][t] = at(c, t, j);
    }
    return out;
}

PosteriorDraws sample(const TargetDensity& target, const SamplerConfig& cfg) {
    cfg.validate();
    const std::size_t dim = target.dim();

    std::vector<ChainResult> results(cfg.chains);
    std::vector<std::exception_ptr> errors(cfg.chains);
    const auto worker = [&](int c) {
        try {
            results[c] = run_chain(target, cfg, c);
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };
    if (cfg.parallel_chains && cfg.chains > 1) {
        std::vector<std::thread> threads;
        threads.reserve(cfg.chains);
        for (int c = 0; c < cfg.chains; ++c) threads.emplace_back(worker, c);
        for (auto& t : threads) t.join();
    } else {
        for (int c = 0; c < cfg.chains; ++c) worker(c);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    PosteriorDraws draws;
    draws.dim = dim;
    draws.chains = cfg.chains;
    draws.kept = cfg.iterations - cfg.warmup;
    draws.config = cfg;
    draws.names.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) draws.names[j] = target.coord_name(j);
    draws.draws.reserve(static_cast<std::size_t>(cfg.chains) * draws.kept * dim);
    for (auto& r : results) {
        draws.draws.insert(draws.draws.end(), r.kept.begin(), r.kept.end());
        draws.stats.push_back(std::move(r.stats));
    }
    if (const auto* model = dynamic_cast<const PooledModel*>(&target)) {
        draws.layout = model->layout();
        draws.has_layout = true;
    }
    return draws;
}

} // namespace nsum
