#include "nsum/diagnostics.hpp"

#include <cmath>
#include <limits>

#include "nsum/errors.hpp"

namespace nsum {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

RhatResult split_rhat(const std::vector<std::vector<double>>& chains) {
    // Halve every chain; all splits are trimmed to a common length.
    std::size_t min_len = std::numeric_limits<std::size_t>::max();
    for (const auto& c : chains) min_len = std::min(min_len, c.size());
    if (chains.empty() || min_len < 8) throw_domain("split_rhat needs >= 4 draws per split");
    const std::size_t n = min_len / 2;

    std::vector<std::vector<double>> splits;
    for (const auto& c : chains) {
        splits.emplace_back(c.begin(), c.begin() + n);
        splits.emplace_back(c.begin() + n, c.begin() + 2 * n);
    }
    const std::size_t m = splits.size();

    std::vector<double> means(m);
    double w = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
        means[s] = mean_of(splits[s]);
        double ss = 0.0;
        for (double x : splits[s]) ss += (x - means[s]) * (x - means[s]);
        if (ss <= 0.0) return {kInf, true}; // zero-variance split
        w += ss / static_cast<double>(n - 1);
    }
    w /= static_cast<double>(m);

    double grand = 0.0;
    for (double mu : means) grand += mu;
    grand /= static_cast<double>(m);
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= static_cast<double>(n) / static_cast<double>(m - 1);

    const double nd = static_cast<double>(n);
    return {std::sqrt((w * (nd - 1.0) / nd + b / nd) / w), false};
}

EssResult ess(const std::vector<double>& draws) {
    const std::size_t n = draws.size();
    if (n < 2) return {0.0, true};
    const double mean = mean_of(draws);
    double c0 = 0.0;
    for (double x : draws) c0 += (x - mean) * (x - mean);
    c0 /= static_cast<double>(n);
    if (c0 <= 0.0) return {0.0, true};

    // Sum autocorrelations over consecutive pairs while the pair sum stays
    // positive (Geyer's initial positive sequence).
    const std::size_t max_lag = std::min<std::size_t>(n - 1, 1000);
    const auto acorr = [&](std::size_t lag) {
        double c = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t) c += (draws[t] - mean) * (draws[t + lag] - mean);
        return c / (static_cast<double>(n) * c0);
    };
    double sum = 0.0;
    for (std::size_t lag = 1; lag + 1 <= max_lag; lag += 2) {
        const double pair = acorr(lag) + acorr(lag + 1);
        if (pair <= 0.0) break;
        sum += pair;
    }
    const double denom = 1.0 + 2.0 * sum;
    double value = static_cast<double>(n) / std::max(denom, 1e-12);
    value = std::min(value, 1.5 * static_cast<double>(n));
    return {value, false};
}

MareResult mare(const std::vector<double>& est, const std::vector<double>& truth,
                std::size_t K, std::size_t M, const std::vector<std::uint8_t>& group_mask) {
    if (est.size() != K * M || truth.size() != K * M) throw_domain("mare: est/truth must be K*M");
    if (!group_mask.empty() && group_mask.size() != K) throw_domain("mare: bad group mask length");

    MareResult out;
    double total = 0.0;
    std::size_t n_munis = 0;
    for (std::size_t m = 0; m < M; ++m) {
        double acc = 0.0;
        std::size_t n_groups = 0;
        for (std::size_t k = 0; k < K; ++k) {
            if (!group_mask.empty() && !group_mask[k]) continue;
            const double tr = truth[k * M + m];
            if (!(tr > 0.0)) throw_domain("mare: truth must be positive for included cells");
            const double e = est[k * M + m];
            if (!std::isfinite(e)) continue; // estimator reported this cell missing
            acc += std::fabs(e - tr) / tr;
            ++n_groups;
        }
        if (n_groups == 0) {
            out.per_municipality.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        const double muni_mare = acc / static_cast<double>(n_groups);
        out.per_municipality.push_back(muni_mare);
        total += muni_mare;
        ++n_munis;
    }
    if (n_munis == 0) throw_domain("mare: no municipality has a defined estimate");
    out.overall = total / static_cast<double>(n_munis);
    return out;
}

} // namespace nsum
