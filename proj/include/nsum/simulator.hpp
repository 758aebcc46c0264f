#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nsum/ard.hpp"
#include "nsum/model.hpp"
#include "nsum/rng.hpp"
#include "nsum/sampler.hpp"

namespace nsum {

// Generative parameters. As a template (rho/delta empty) it describes the
// national model; draw_true_params fills in the realized municipality rates
// and respondent degrees.
struct TrueParams {
    std::vector<double> mu_rho;    // K, national mean of rho per group
    std::vector<double> sigma_rho; // K, national sd of rho per group
    std::vector<double> w;         // K, overdispersion
    double mu_delta = 5.5;
    double sigma_delta = 1.0;
    std::vector<double> rho;   // K*M realized, row-major by group
    std::vector<double> delta; // R realized

    std::size_t K() const { return mu_rho.size(); }
};

// rho[k][m] ~ Gamma(alpha_k, beta_k) with (alpha, beta) matched to the
// group's mean/sd; delta[i] ~ Normal(mu_delta, sigma_delta^2).
TrueParams draw_true_params(const TrueParams& tmpl, std::size_t M, std::size_t R, std::uint64_t seed);
TrueParams draw_true_params(const TrueParams& tmpl, std::size_t M, std::size_t R, Rng& rng);

// Counts y[i][k] ~ NegBin(exp(delta_i - rho_{k,m(i)}), w_k), sampled by
// Gamma-Poisson composition. Groups come out unnamed and unknown-flagged.
ARDataset simulate_ard(const TrueParams& params, const std::vector<int>& muni_of_respondent,
                       long long population, std::uint64_t seed);
ARDataset simulate_ard(const TrueParams& params, const std::vector<int>& muni_of_respondent,
                       long long population, Rng& rng);

// Benchmark-study generative design; defaults mirror the six-group setup
// used throughout the tests.
struct SimConfig {
    std::vector<double> mu_rho = {2.5, 3.5, 4.5, 5.0, 5.5, 6.5};
    std::vector<double> sigma_rho = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    std::vector<double> w = {35.0, 35.0, 35.0, 35.0, 2.0, 0.3};
    double mu_delta = 5.5;
    double sigma_delta = 1.0;
    std::size_t n_known = 4; // leading groups get known prevalences
    long long population = 50000;
    std::vector<std::string> group_names; // optional; defaults known<i>/hidden<i>

    TrueParams to_template() const;
    void validate() const;
};

struct SurveyDraw {
    ARDataset data;     // known groups carry the realized prevalences
    TrueParams truth;
};

// Full synthetic survey: realized parameters plus counts, respondents
// assigned in blocks of `respondents_per_muni` per municipality.
SurveyDraw simulate_survey(const SimConfig& cfg, std::size_t M, std::size_t respondents_per_muni,
                           std::uint64_t seed);

// One (size, replicate) cell of the benchmark study.
struct StudyCell {
    int size = 0;
    int replicate = 0;
    std::uint64_t seed = 0;
    bool pooled_ok = false, standard_ok = false;
    double pooled_mare = 0.0, pooled_mare_all = 0.0;
    double standard_mare = 0.0, standard_mare_all = 0.0;
    std::string error;
};

struct StudyConfig {
    std::vector<int> sizes = {5, 10, 15, 20, 30, 50, 100};
    int replicates = 20;
    std::size_t municipalities = 150;
    SimConfig sim;
    HyperConfig hyper;
    SamplerConfig sampler = study_sampler_defaults();
    std::uint64_t seed = 0;
    unsigned threads = 0; // 0 = NSUM_THREADS env or hardware concurrency

    static SamplerConfig study_sampler_defaults();
};

struct StudyResult {
    StudyConfig config;
    std::vector<StudyCell> cells; // ordered by (size, replicate)
};

// Simulates, fits both estimators and records the per-municipality mean
// absolute relative error for every cell. Cells run in parallel, each on
// its own RNG stream; failures are recorded and the rest continue.
StudyResult run_simulation_study(const StudyConfig& cfg);

// Worker count shared by the study runner and the CLI.
unsigned resolve_threads(unsigned requested);

} // namespace nsum
