#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nsum/errors.hpp"

namespace nsum {

// One "how many X do you know" survey column.
struct GroupSpec {
    int id = 0;
    std::string name;
    bool known = false;
    // Proportion of each municipality's population in this group, in (0,1].
    // Indexed by municipality id; sized M iff known, empty otherwise.
    std::vector<double> known_prevalence;
};

struct Municipality {
    int id = 0;
    std::string name;
    long long population = 0;
};

// Fill rule for definitionally linked group pairs where respondents report
// one side only (e.g. traffickers without victims).
struct PairRule {
    int group_a = -1;
    int group_b = -1;
    double b_per_a = 0.0; // fill for missing b when a > 0
    double a_per_b = 0.0; // fill for missing a when b > 0
};

struct ImputationReport {
    long long filled_b_from_a = 0;
    long long filled_a_from_b = 0;
};

// Aggregated relational data: an R x K count matrix plus the municipality
// of each respondent and the group/municipality metadata. Immutable in
// practice: operations return modified copies.
struct ARDataset {
    std::vector<GroupSpec> groups;            // K entries, ids 0..K-1
    std::vector<Municipality> municipalities; // M entries, ids 0..M-1
    std::vector<int> muni_of_respondent;      // length R
    std::vector<long long> counts;            // R*K row-major
    std::string meta;

    std::size_t R() const { return muni_of_respondent.size(); }
    std::size_t K() const { return groups.size(); }
    std::size_t M() const { return municipalities.size(); }

    long long y(std::size_t i, std::size_t k) const { return counts[i * K() + k]; }
    long long& y(std::size_t i, std::size_t k) { return counts[i * K() + k]; }

    // Enforces the structural invariants (dense ids, count domain, known
    // prevalences in (0,1] for every municipality). Throws Error.
    void validate() const;

    bool operator==(const ARDataset&) const = default;
};

struct LoadedArd {
    ARDataset data;
    std::optional<PairRule> pair_rule;
};

// CSV of counts (header: respondent_id,municipality_id,g_<name>...) plus a
// JSON sidecar carrying groups, municipalities and an optional pair rule.
LoadedArd load_ard(const std::string& csv_path, const std::string& meta_path);
void save_ard(const ARDataset& data, const std::string& csv_path, const std::string& meta_path,
              const std::optional<PairRule>& pair_rule = std::nullopt);

// Applies the paired fill rule to every respondent reporting exactly one of
// the two groups. Fills are round-half-up, at least 1. Idempotent.
std::pair<ARDataset, ImputationReport> impute_paired_counts(const ARDataset& data, const PairRule& rule);

} // namespace nsum
