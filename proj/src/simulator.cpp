#include "nsum/simulator.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "nsum/diagnostics.hpp"
#include "nsum/estimator.hpp"

namespace nsum {

namespace {

// Sub-stream indices under a simulation seed.
constexpr std::uint64_t kStreamParams = 0;
constexpr std::uint64_t kStreamCounts = 1;

} // namespace

TrueParams draw_true_params(const TrueParams& tmpl, std::size_t M, std::size_t R, Rng& rng) {
    const std::size_t K = tmpl.K();
    if (K == 0) throw_domain("draw_true_params: empty template");
    if (tmpl.sigma_rho.size() != K || tmpl.w.size() != K)
        throw_domain("draw_true_params: mu_rho, sigma_rho and w must have equal length");
    if (M < 1 || R < 1) throw_domain("draw_true_params: M and R must be >= 1");
    for (std::size_t k = 0; k < K; ++k) {
        if (!(tmpl.sigma_rho[k] > 0.0)) throw_domain("draw_true_params: sigma_rho must be positive");
        if (!(tmpl.w[k] > 0.0)) throw_domain("draw_true_params: w must be positive");
    }
    if (!(tmpl.sigma_delta > 0.0)) throw_domain("draw_true_params: sigma_delta must be positive");

    TrueParams out = tmpl;
    out.rho.resize(K * M);
    out.delta.resize(R);
    for (std::size_t k = 0; k < K; ++k) {
        const auto [alpha, beta] = gamma_from_mean_var(tmpl.mu_rho[k], tmpl.sigma_rho[k] * tmpl.sigma_rho[k]);
        for (std::size_t m = 0; m < M; ++m) out.rho[k * M + m] = rng.gamma(alpha, beta);
    }
    for (std::size_t i = 0; i < R; ++i) out.delta[i] = rng.normal(tmpl.mu_delta, tmpl.sigma_delta);
    return out;
}

TrueParams draw_true_params(const TrueParams& tmpl, std::size_t M, std::size_t R, std::uint64_t seed) {
    Rng rng = Rng(seed).fork(kStreamParams);
    return draw_true_params(tmpl, M, R, rng);
}

ARDataset simulate_ard(const TrueParams& params, const std::vector<int>& muni_of_respondent,
                       long long population, Rng& rng) {
    const std::size_t K = params.K();
    const std::size_t R = muni_of_respondent.size();
    if (params.delta.size() != R) throw_domain("simulate_ard: delta length != respondent count");
    if (K == 0 || params.rho.size() % K != 0) throw_domain("simulate_ard: bad rho shape");
    const std::size_t M = params.rho.size() / K;
    std::vector<bool> seen(M, false);
    for (int m : muni_of_respondent) {
        if (m < 0 || m >= static_cast<int>(M)) throw_domain("simulate_ard: assignment references unknown municipality");
        seen[static_cast<std::size_t>(m)] = true;
    }
    for (std::size_t m = 0; m < M; ++m)
        if (!seen[m]) throw_domain("simulate_ard: assignment must cover all municipalities");

    ARDataset data;
    for (std::size_t m = 0; m < M; ++m)
        data.municipalities.push_back({static_cast<int>(m), "muni" + std::to_string(m), population});
    for (std::size_t k = 0; k < K; ++k)
        data.groups.push_back({static_cast<int>(k), "group" + std::to_string(k), false, {}});
    data.muni_of_respondent = muni_of_respondent;
    data.counts.resize(R * K);

    for (std::size_t i = 0; i < R; ++i) {
        const std::size_t m = static_cast<std::size_t>(muni_of_respondent[i]);
        for (std::size_t k = 0; k < K; ++k) {
            const double mu = std::exp(params.delta[i] - params.rho[k * M + m]);
            // lambda ~ Gamma(w, w/mu) then Poisson(lambda) gives the
            // NegBin(mu, w) marginal.
            const double lambda = rng.gamma(params.w[k], params.w[k] / mu);
            data.counts[i * K + k] = rng.poisson(lambda);
        }
    }
    return data;
}

ARDataset simulate_ard(const TrueParams& params, const std::vector<int>& muni_of_respondent,
                       long long population, std::uint64_t seed) {
    Rng rng = Rng(seed).fork(kStreamCounts);
    return simulate_ard(params, muni_of_respondent, population, rng);
}

TrueParams SimConfig::to_template() const {
    TrueParams t;
    t.mu_rho = mu_rho;
    t.sigma_rho = sigma_rho;
    t.w = w;
    t.mu_delta = mu_delta;
    t.sigma_delta = sigma_delta;
    return t;
}

void SimConfig::validate() const {
    const std::size_t K = mu_rho.size();
    if (K < 2) throw_domain("simulation needs at least 2 groups");
    if (sigma_rho.size() != K || w.size() != K) throw_domain("mu_rho, sigma_rho, w must have equal length");
    if (n_known < 1 || n_known >= K) throw_domain("n_known must leave at least one hidden group");
    if (population < 1) throw_domain("population must be >= 1");
    if (!group_names.empty() && group_names.size() != K) throw_domain("group_names length mismatch");
    for (std::size_t k = 0; k < K; ++k) {
        if (!(mu_rho[k] > 0.0)) throw_domain("mu_rho must be positive");
        if (!(sigma_rho[k] > 0.0)) throw_domain("sigma_rho must be positive");
        if (!(w[k] > 0.0)) throw_domain("w must be positive");
    }
    if (!(sigma_delta > 0.0)) throw_domain("sigma_delta must be positive");
}

SurveyDraw simulate_survey(const SimConfig& cfg, std::size_t M, std::size_t respondents_per_muni,
                           std::uint64_t seed) {
    cfg.validate();
    if (M < 1 || respondents_per_muni < 1) throw_domain("simulate_survey: M and respondents must be >= 1");
    const std::size_t K = cfg.mu_rho.size();
    const std::size_t R = M * respondents_per_muni;

    std::vector<int> muni_of(R);
    for (std::size_t m = 0; m < M; ++m)
        for (std::size_t i = 0; i < respondents_per_muni; ++i)
            muni_of[m * respondents_per_muni + i] = static_cast<int>(m);

    SurveyDraw out;
    out.truth = draw_true_params(cfg.to_template(), M, R, seed);
    out.data = simulate_ard(out.truth, muni_of, cfg.population, seed);

    for (std::size_t k = 0; k < K; ++k) {
        auto& g = out.data.groups[k];
        g.name = !cfg.group_names.empty()
                     ? cfg.group_names[k]
                     : (k < cfg.n_known ? "known" + std::to_string(k)
                                        : "hidden" + std::to_string(k - cfg.n_known));
        if (k < cfg.n_known) {
            g.known = true;
            g.known_prevalence.resize(M);
            // The realized prevalences are the simulation's ground truth for
            // the known groups.
            for (std::size_t m = 0; m < M; ++m)
                g.known_prevalence[m] = std::exp(-out.truth.rho[k * M + m]);
        }
    }
    out.data.meta = "synthetic survey";
    out.data.validate();
    return out;
}

SamplerConfig StudyConfig::study_sampler_defaults() {
    SamplerConfig cfg;
    cfg.chains = 2;
    cfg.iterations = 1500;
    cfg.warmup = 900;
    cfg.leapfrog_max_steps = 256;
    cfg.parallel_chains = false; // study cells already run in parallel
    return cfg;
}

unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("NSUM_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

namespace {

// Point estimates (posterior medians of N_km) from a pooled fit.
std::vector<double> pooled_point_estimates(const ScaledDraws& scaled,
                                           const std::vector<Municipality>& munis) {
    std::vector<double> est(scaled.K * scaled.M);
    std::vector<double> buf(scaled.n_draws());
    for (std::size_t k = 0; k < scaled.K; ++k) {
        for (std::size_t m = 0; m < scaled.M; ++m) {
            std::size_t d = 0;
            for (int c = 0; c < scaled.chains; ++c)
                for (int t = 0; t < scaled.kept; ++t) buf[d++] = scaled.at(c, t, k, m);
            const double med_rho = quantile_type7(buf, 0.5);
            est[k * scaled.M + m] =
                static_cast<double>(munis[m].population) * std::min(1.0, std::exp(-med_rho));
        }
    }
    return est;
}

void run_study_cell(const StudyConfig& cfg, StudyCell& cell) {
    const std::size_t M = cfg.municipalities;
    const SurveyDraw sim = simulate_survey(cfg.sim, M, static_cast<std::size_t>(cell.size), cell.seed);
    const std::size_t K = sim.data.K();

    std::vector<double> truth(K * M);
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t m = 0; m < M; ++m)
            truth[k * M + m] = static_cast<double>(cfg.sim.population) * std::exp(-sim.truth.rho[k * M + m]);

    std::vector<std::uint8_t> hidden_mask(K, 1);
    for (std::size_t k = 0; k < cfg.sim.n_known; ++k) hidden_mask[k] = 0;

    try {
        PooledModel model(sim.data, cfg.hyper);
        SamplerConfig scfg = cfg.sampler;
        scfg.seed = cell.seed;
        const PosteriorDraws draws = sample(model, scfg);
        const ScaledDraws scaled = scale_draws(draws, known_cells_from_dataset(sim.data));
        const auto est = pooled_point_estimates(scaled, sim.data.municipalities);
        cell.pooled_mare = mare(est, truth, K, M, hidden_mask).overall;
        cell.pooled_mare_all = mare(est, truth, K, M).overall;
        cell.pooled_ok = true;
    } catch (const std::exception& e) {
        cell.error += std::string("pooled: ") + e.what() + "; ";
    }
    try {
        // The unpooled baseline calibrates degrees against national-level
        // known sizes (the information a single survey actually has); the
        // pooled arm's scaling constant only ever uses the aggregate of the
        // log prevalences, so the comparison is on equal footing.
        ARDataset national = sim.data;
        for (std::size_t k = 0; k < cfg.sim.n_known; ++k) {
            double mean_prev = 0.0;
            for (std::size_t m = 0; m < M; ++m) mean_prev += std::exp(-sim.truth.rho[k * M + m]);
            mean_prev /= static_cast<double>(M);
            for (std::size_t m = 0; m < M; ++m) national.groups[k].known_prevalence[m] = mean_prev;
        }
        const StandardNsumResult std_res = standard_nsum(national);
        cell.standard_mare = mare(std_res.estimates, truth, K, M, hidden_mask).overall;
        cell.standard_mare_all = mare(std_res.estimates, truth, K, M).overall;
        cell.standard_ok = true;
    } catch (const std::exception& e) {
        cell.error += std::string("standard: ") + e.what() + "; ";
    }
}

} // namespace

StudyResult run_simulation_study(const StudyConfig& cfg) {
    if (cfg.sizes.empty()) throw_domain("study: sizes must be non-empty");
    if (cfg.replicates < 1) throw_domain("study: replicates must be >= 1");
    cfg.sim.validate();
    cfg.sampler.validate();

    StudyResult result;
    result.config = cfg;
    const Rng root(cfg.seed);
    for (int size : cfg.sizes) {
        if (size < 1) throw_domain("study: sizes must be >= 1");
        for (int rep = 0; rep < cfg.replicates; ++rep) {
            StudyCell cell;
            cell.size = size;
            cell.replicate = rep;
            cell.seed = root.fork(static_cast<std::uint64_t>(size)).fork(static_cast<std::uint64_t>(rep)).next_u64();
            result.cells.push_back(cell);
        }
    }

    const unsigned workers =
        std::min<unsigned>(resolve_threads(cfg.threads), static_cast<unsigned>(result.cells.size()));
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= result.cells.size()) return;
            run_study_cell(cfg, result.cells[idx]);
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return result;
}

} // namespace nsum
