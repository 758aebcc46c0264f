#pragma once

#include <cstdint>
#include <vector>

namespace nsum {

struct RhatResult {
    double value = 0.0;   // +inf sentinel when degenerate
    bool degenerate = false;
};

struct EssResult {
    double value = 0.0;
    bool degenerate = false;
};

// Split potential scale reduction: each chain is halved, then
// sqrt(((n-1)/n W + B/n) / W) over the resulting splits.
RhatResult split_rhat(const std::vector<std::vector<double>>& chains);

// Effective sample size of one series via Geyer's initial positive
// sequence, capped at 1.5x the number of draws.
EssResult ess(const std::vector<double>& draws);

struct MareResult {
    std::vector<double> per_municipality;
    double overall = 0.0;
};

// Mean absolute relative error: averaged over groups within each
// municipality, then across municipalities. `est` and `truth` are K*M
// row-major by group; `group_mask` (optional, length K) selects groups.
// Municipalities with no finite estimate in the selected groups are skipped.
MareResult mare(const std::vector<double>& est, const std::vector<double>& truth,
                std::size_t K, std::size_t M,
                const std::vector<std::uint8_t>& group_mask = {});

} // namespace nsum
