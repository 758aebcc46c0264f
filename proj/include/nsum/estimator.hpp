#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nsum/ard.hpp"
#include "nsum/sampler.hpp"

namespace nsum {

struct KnownCell {
    std::size_t group = 0;
    std::size_t muni = 0;
    double prevalence = 0.0; // true proportion, in (0,1]
};

// Calibrated rho draws: per draw, the mean of (rho + log p_true) over the
// known cells is subtracted from every rho, so the per-draw geometric mean
// of estimated/true prevalence over known cells is exactly 1. Values are
// stored unclamped; prevalences are capped at 1 when materialized.
struct ScaledDraws {
    std::size_t K = 0, M = 0;
    int chains = 0, kept = 0;
    std::vector<double> rho_tilde; // chains * kept * (K*M)

    double at(int chain, int iter, std::size_t k, std::size_t m) const {
        return rho_tilde[(static_cast<std::size_t>(chain) * kept + iter) * (K * M) + k * M + m];
    }
    std::size_t n_draws() const { return static_cast<std::size_t>(chains) * kept; }
};

ScaledDraws scale_draws(const PosteriorDraws& draws, const std::vector<KnownCell>& known);

// Known cells implied by a dataset's group metadata.
std::vector<KnownCell> known_cells_from_dataset(const ARDataset& data);

struct CellSummary {
    double mean = 0.0, median = 0.0, q025 = 0.0, q975 = 0.0;
};

// Posterior summaries of N_km = N_m * min(1, exp(-rho_tilde)) for every
// (group, municipality) cell plus the per-group national totals.
struct EstimateTable {
    std::size_t K = 0, M = 0;
    std::vector<CellSummary> cells;  // K*M row-major by group
    std::vector<CellSummary> totals; // K
    long long clamp_count = 0;       // draws whose prevalence was capped at 1
};

EstimateTable estimates_from_draws(const ScaledDraws& scaled,
                                   const std::vector<Municipality>& municipalities);

// Type-7 quantile of a sample (interpolated order statistic).
double quantile_type7(std::vector<double> values, double p);

// Killworth MLE baseline, each municipality fit separately: degrees from
// the known-group ratio, then N_hat = N_m * sum(y) / sum(d_hat).
struct StandardNsumResult {
    std::size_t K = 0, M = 0;
    std::vector<double> estimates;        // K*M; NaN where undefined
    std::vector<std::uint8_t> muni_defined; // per municipality
};

StandardNsumResult standard_nsum(const ARDataset& data);

} // namespace nsum
