#pragma once

#include <string>
#include <vector>

#include "nsum/estimator.hpp"
#include "nsum/sampler.hpp"
#include "nsum/simulator.hpp"

namespace nsum {

// Columnar draws: chain, iter, then one column per parameter.
void save_draws_csv(const PosteriorDraws& draws, const std::string& path);

// Compact binary draws. Little-endian; header: magic "NSUM", u32 version,
// layout dims, chains/kept/dim, config echo, names, then the draw matrix
// and per-iteration sampler statistics as 64-bit floats.
void save_draws_binary(const PosteriorDraws& draws, const std::string& path);
PosteriorDraws load_draws_binary(const std::string& path);

// chain, iter, accept_stat, step_size, divergent
void save_sampler_stats_csv(const PosteriorDraws& draws, const std::string& path);

// parameter, rhat, ess (split R-hat over chains; ESS summed over chains).
void save_diagnostics_csv(const PosteriorDraws& draws, const std::string& path);

void save_estimates_csv(const EstimateTable& table, const std::vector<std::string>& group_names,
                        const std::vector<std::string>& muni_names, const std::string& path);
void save_totals_csv(const EstimateTable& table, const std::vector<std::string>& group_names,
                     const std::string& path);

// size, replicate, model, mare, seed. `all_groups` selects the MARE variant
// that averages over every group instead of the hidden ones only.
void save_study_csv(const StudyResult& result, const std::string& path, bool all_groups = false);

std::string format_double(double v); // shortest round-trip decimal

} // namespace nsum
