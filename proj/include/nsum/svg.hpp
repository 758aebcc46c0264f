#pragma once

#include <string>
#include <vector>

#include "nsum/estimator.hpp"
#include "nsum/simulator.hpp"

namespace nsum {

// Caterpillar plot of one group's per-municipality estimates: posterior
// means with 95% interval whiskers, municipalities sorted ascending,
// log10 y-axis (declared in the SVG <desc> metadata).
std::string render_caterpillar_svg(const std::string& group_name,
                                   const std::vector<CellSummary>& cells,
                                   const std::vector<std::string>& muni_names);

// Grouped box plot of study errors per sample size, pooled vs standard.
std::string render_study_boxplot_svg(const StudyResult& result, bool all_groups = false);

// Dot-and-interval summary of per-group posterior hyperparameters.
struct HyperSummaryRow {
    std::string group;
    double mean = 0.0, q025 = 0.0, q975 = 0.0;
};
std::string render_hyper_summary_svg(const std::string& title,
                                     const std::vector<HyperSummaryRow>& rows);

} // namespace nsum
