#include "nsum/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nsum {

std::vector<KnownCell> known_cells_from_dataset(const ARDataset& data) {
    std::vector<KnownCell> cells;
    for (std::size_t k = 0; k < data.K(); ++k) {
        if (!data.groups[k].known) continue;
        for (std::size_t m = 0; m < data.M(); ++m)
            cells.push_back({k, m, data.groups[k].known_prevalence[m]});
    }
    return cells;
}

ScaledDraws scale_draws(const PosteriorDraws& draws, const std::vector<KnownCell>& known) {
    if (!draws.has_layout) throw_domain("scale_draws: draws carry no parameter layout");
    if (known.empty()) throw Error(Errc::no_known_groups, "scale_draws: no known (group, municipality) cells");
    const ParamLayout& L = draws.layout;
    for (const auto& c : known) {
        if (c.group >= L.K || c.muni >= L.M) throw_domain("scale_draws: known cell out of range");
        if (!(c.prevalence > 0.0) || c.prevalence > 1.0)
            throw_domain("scale_draws: known prevalence must lie in (0,1]");
    }

    ScaledDraws out;
    out.K = L.K;
    out.M = L.M;
    out.chains = draws.chains;
    out.kept = draws.kept;
    out.rho_tilde.resize(out.n_draws() * L.K * L.M);

    std::vector<double> log_p(known.size());
    for (std::size_t c = 0; c < known.size(); ++c) log_p[c] = std::log(known[c].prevalence);

    std::size_t pos = 0;
    for (int chain = 0; chain < draws.chains; ++chain) {
        for (int t = 0; t < draws.kept; ++t) {
            const auto draw = draws.draw(chain, t);
            double corr = 0.0;
            for (std::size_t c = 0; c < known.size(); ++c)
                corr += draw[L.rho(known[c].group, known[c].muni)] + log_p[c];
            corr /= static_cast<double>(known.size());
            for (std::size_t j = 0; j < L.K * L.M; ++j)
                out.rho_tilde[pos + j] = draw[2 * L.K + j] - corr;
            pos += L.K * L.M;
        }
    }
    return out;
}

double quantile_type7(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 1) return values[0];
    const double h = p * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= n) return values[n - 1];
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

namespace {

CellSummary summarize(std::vector<double>& draws) {
    CellSummary s;
    double sum = 0.0;
    for (double d : draws) sum += d;
    s.mean = sum / static_cast<double>(draws.size());
    s.median = quantile_type7(draws, 0.5);
    s.q025 = quantile_type7(draws, 0.025);
    s.q975 = quantile_type7(draws, 0.975);
    return s;
}

} // namespace

EstimateTable estimates_from_draws(const ScaledDraws& scaled,
                                   const std::vector<Municipality>& municipalities) {
    if (municipalities.size() != scaled.M) throw_domain("estimates_from_draws: municipality count mismatch");
    const std::size_t n = scaled.n_draws();
    if (n == 0) throw_domain("estimates_from_draws: no draws");

    EstimateTable table;
    table.K = scaled.K;
    table.M = scaled.M;
    table.cells.resize(scaled.K * scaled.M);
    table.totals.resize(scaled.K);

    std::vector<double> cell_draws(n), total_draws(n);
    for (std::size_t k = 0; k < scaled.K; ++k) {
        std::fill(total_draws.begin(), total_draws.end(), 0.0);
        for (std::size_t m = 0; m < scaled.M; ++m) {
            const double pop = static_cast<double>(municipalities[m].population);
            std::size_t d = 0;
            for (int chain = 0; chain < scaled.chains; ++chain) {
                for (int t = 0; t < scaled.kept; ++t, ++d) {
                    double prev = std::exp(-scaled.at(chain, t, k, m));
                    if (prev > 1.0) {
                        prev = 1.0;
                        ++table.clamp_count;
                    }
                    cell_draws[d] = pop * prev;
                    total_draws[d] += cell_draws[d];
                }
            }
            table.cells[k * scaled.M + m] = summarize(cell_draws);
        }
        table.totals[k] = summarize(total_draws);
    }
    return table;
}

StandardNsumResult standard_nsum(const ARDataset& data) {
    data.validate();
    const std::size_t K = data.K(), M = data.M(), R = data.R();

    std::vector<std::size_t> known_groups;
    for (std::size_t k = 0; k < K; ++k)
        if (data.groups[k].known) known_groups.push_back(k);
    if (known_groups.empty())
        throw Error(Errc::no_known_groups, "standard_nsum: dataset has no known groups");

    StandardNsumResult res;
    res.K = K;
    res.M = M;
    res.estimates.assign(K * M, std::numeric_limits<double>::quiet_NaN());
    res.muni_defined.assign(M, 0);

    for (std::size_t m = 0; m < M; ++m) {
        const double pop = static_cast<double>(data.municipalities[m].population);
        double known_total = 0.0; // sum of known-group sizes in this municipality
        for (std::size_t k : known_groups) known_total += data.groups[k].known_prevalence[m] * pop;
        if (!(known_total > 0.0)) continue;

        // d_hat_i = N_m * (sum of known-group reports) / (sum of known sizes);
        // only the municipality total of degrees is needed.
        double degree_sum = 0.0;
        std::vector<double> y_sum(K, 0.0);
        bool any_respondent = false;
        for (std::size_t i = 0; i < R; ++i) {
            if (data.muni_of_respondent[i] != static_cast<int>(m)) continue;
            any_respondent = true;
            double known_reports = 0.0;
            for (std::size_t k : known_groups) known_reports += static_cast<double>(data.y(i, k));
            degree_sum += pop * known_reports / known_total;
            for (std::size_t k = 0; k < K; ++k) y_sum[k] += static_cast<double>(data.y(i, k));
        }
        if (!any_respondent || degree_sum <= 0.0) continue; // ZeroDegree: reported as missing

        res.muni_defined[m] = 1;
        for (std::size_t k = 0; k < K; ++k)
            res.estimates[k * M + m] = pop * y_sum[k] / degree_sum;
    }
    return res;
}

} // namespace nsum
