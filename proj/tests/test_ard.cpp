#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "nsum/ard.hpp"
#include "nsum/rng.hpp"

using namespace nsum;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
    const auto dir = fs::temp_directory_path() / "nsum_test_ard";
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

ARDataset tiny_dataset() {
    ARDataset d;
    d.municipalities = {{0, "m0", 1000}};
    d.groups = {{0, "a", true, {0.1}}, {1, "b", false, {}}};
    d.muni_of_respondent = {0, 0, 0};
    d.counts = {2, 0, 1, 1, 0, 5};
    return d;
}

std::string tiny_meta_json() {
    return R"({
  "municipalities": [{"id": 0, "name": "m0", "population": 1000}],
  "groups": [
    {"id": 0, "name": "a", "known": true, "known_prevalence": {"0": 0.1}},
    {"id": 1, "name": "b", "known": false}
  ]
})";
}

ARDataset random_dataset(Rng& rng) {
    ARDataset d;
    const std::size_t M = 1 + rng.uniform_int(3);
    const std::size_t K = 2 + rng.uniform_int(3);
    const std::size_t R = 1 + rng.uniform_int(12);
    for (std::size_t m = 0; m < M; ++m)
        d.municipalities.push_back({static_cast<int>(m), "m" + std::to_string(m),
                                    static_cast<long long>(100 + rng.uniform_int(100000))});
    for (std::size_t k = 0; k < K; ++k) {
        GroupSpec g{static_cast<int>(k), "g" + std::to_string(k), rng.uniform01() < 0.5, {}};
        if (g.known) {
            g.known_prevalence.resize(M);
            for (auto& p : g.known_prevalence) p = 0.001 + 0.9 * rng.uniform01();
        }
        d.groups.push_back(std::move(g));
    }
    for (std::size_t i = 0; i < R; ++i) {
        d.muni_of_respondent.push_back(static_cast<int>(rng.uniform_int(M)));
        for (std::size_t k = 0; k < K; ++k)
            d.counts.push_back(static_cast<long long>(rng.uniform_int(30)));
    }
    d.validate();
    return d;
}

} // namespace

TEST_CASE("load_ard parses a small file") {
    const auto dir = tmp_dir();
    write_file(dir / "t.csv",
               "respondent_id,municipality_id,g_a,g_b\n"
               "0,0,2,0\n"
               "1,0,1,1\n"
               "2,0,0,5\n");
    write_file(dir / "t.json", tiny_meta_json());
    const auto loaded = load_ard((dir / "t.csv").string(), (dir / "t.json").string());
    const ARDataset& d = loaded.data;
    CHECK(d.R() == 3);
    CHECK(d.K() == 2);
    CHECK(d.M() == 1);
    CHECK(d.y(0, 0) == 2);
    CHECK(d.y(2, 1) == 5);
    CHECK(d.groups[0].known);
    CHECK(d.groups[0].known_prevalence[0] == doctest::Approx(0.1));
    CHECK_FALSE(loaded.pair_rule.has_value());
}

TEST_CASE("load_ard rejects a negative count, naming the row") {
    const auto dir = tmp_dir();
    write_file(dir / "neg.csv",
               "respondent_id,municipality_id,g_a,g_b\n"
               "0,0,2,0\n"
               "1,0,-1,1\n");
    write_file(dir / "neg.json", tiny_meta_json());
    try {
        (void)load_ard((dir / "neg.csv").string(), (dir / "neg.json").string());
        FAIL("expected NonIntegerCount");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::non_integer_count);
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
}

TEST_CASE("load_ard flags missing columns, unknown municipalities, empty files") {
    const auto dir = tmp_dir();
    write_file(dir / "m.json", tiny_meta_json());

    write_file(dir / "bad_header.csv", "respondent_id,municipality_id,g_a\n0,0,1\n");
    CHECK_THROWS_WITH_AS((void)load_ard((dir / "bad_header.csv").string(), (dir / "m.json").string()),
                         doctest::Contains("group columns"), Error);

    write_file(dir / "bad_muni.csv", "respondent_id,municipality_id,g_a,g_b\n0,7,1,0\n");
    try {
        (void)load_ard((dir / "bad_muni.csv").string(), (dir / "m.json").string());
        FAIL("expected UnknownMunicipality");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unknown_municipality);
    }

    write_file(dir / "empty.csv", "respondent_id,municipality_id,g_a,g_b\n");
    try {
        (void)load_ard((dir / "empty.csv").string(), (dir / "m.json").string());
        FAIL("expected EmptyDataset");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::empty_dataset);
    }
}

TEST_CASE("save/load round-trip preserves randomized datasets") {
    const auto dir = tmp_dir();
    Rng rng(314159);
    for (int trial = 0; trial < 25; ++trial) {
        const ARDataset d = random_dataset(rng);
        const auto csv = dir / ("rt" + std::to_string(trial) + ".csv");
        const auto meta = dir / ("rt" + std::to_string(trial) + ".json");
        save_ard(d, csv.string(), meta.string());
        const auto back = load_ard(csv.string(), meta.string());
        CHECK(back.data.groups.size() == d.groups.size());
        CHECK(back.data.muni_of_respondent == d.muni_of_respondent);
        CHECK(back.data.counts == d.counts);
        for (std::size_t k = 0; k < d.K(); ++k) {
            CHECK(back.data.groups[k].name == d.groups[k].name);
            CHECK(back.data.groups[k].known == d.groups[k].known);
            for (std::size_t m = 0; m < d.groups[k].known_prevalence.size(); ++m)
                CHECK(back.data.groups[k].known_prevalence[m] ==
                      doctest::Approx(d.groups[k].known_prevalence[m]).epsilon(1e-12));
        }
        for (std::size_t m = 0; m < d.M(); ++m) {
            CHECK(back.data.municipalities[m].name == d.municipalities[m].name);
            CHECK(back.data.municipalities[m].population == d.municipalities[m].population);
        }
    }
}

TEST_CASE("pair rule round-trips through metadata") {
    const auto dir = tmp_dir();
    const ARDataset d = tiny_dataset();
    const PairRule rule{0, 1, 1.5, 2.25};
    save_ard(d, (dir / "p.csv").string(), (dir / "p.json").string(), rule);
    const auto back = load_ard((dir / "p.csv").string(), (dir / "p.json").string());
    REQUIRE(back.pair_rule.has_value());
    CHECK(back.pair_rule->group_a == 0);
    CHECK(back.pair_rule->group_b == 1);
    CHECK(back.pair_rule->b_per_a == doctest::Approx(1.5));
    CHECK(back.pair_rule->a_per_b == doctest::Approx(2.25));
}

TEST_CASE("impute_paired_counts applies the fill rule literally") {
    ARDataset d = tiny_dataset();
    d.counts = {2, 0, 0, 0, 0, 5};
    const PairRule rule{0, 1, 1.5, 0.4};
    const auto [out, report] = impute_paired_counts(d, rule);

    CHECK(out.y(0, 0) == 2);
    CHECK(out.y(0, 1) == 3); // round(2 * 1.5)
    CHECK(out.y(1, 0) == 0); // no trigger
    CHECK(out.y(1, 1) == 0);
    CHECK(out.y(2, 0) == 2); // round(5 * 0.4)
    CHECK(out.y(2, 1) == 5);
    CHECK(report.filled_b_from_a == 1);
    CHECK(report.filled_a_from_b == 1);
}

TEST_CASE("triggered fills are at least 1") {
    ARDataset d = tiny_dataset();
    d.muni_of_respondent = {0};
    d.counts = {1, 0};
    const auto [out, report] = impute_paired_counts(d, PairRule{0, 1, 0.1, 0.1});
    CHECK(out.y(0, 1) == 1); // round(0.1) would be 0; floor at 1
    CHECK(report.filled_b_from_a == 1);
}

TEST_CASE("imputation properties: closure, idempotence, monotonicity") {
    Rng rng(2718);
    for (int trial = 0; trial < 30; ++trial) {
        ARDataset d = random_dataset(rng);
        const PairRule rule{0, 1, 0.25 + 3.0 * rng.uniform01(), 0.25 + 3.0 * rng.uniform01()};
        const auto [once, report1] = impute_paired_counts(d, rule);

        // brute-force scan: nobody reports exactly one of the pair
        for (std::size_t i = 0; i < once.R(); ++i) {
            const bool a = once.y(i, 0) > 0, b = once.y(i, 1) > 0;
            CHECK(a == b);
        }
        // idempotent
        const auto [twice, report2] = impute_paired_counts(once, rule);
        CHECK(twice.counts == once.counts);
        CHECK(report2.filled_b_from_a == 0);
        CHECK(report2.filled_a_from_b == 0);
        // never decreases, never touches other groups
        for (std::size_t i = 0; i < d.R(); ++i)
            for (std::size_t k = 0; k < d.K(); ++k) {
                CHECK(once.y(i, k) >= d.y(i, k));
                if (k != 0 && k != 1) CHECK(once.y(i, k) == d.y(i, k));
            }
    }
}

TEST_CASE("impute rejects bad rules") {
    const ARDataset d = tiny_dataset();
    CHECK_THROWS_AS((void)impute_paired_counts(d, PairRule{0, 0, 1.0, 1.0}), Error);
    CHECK_THROWS_AS((void)impute_paired_counts(d, PairRule{0, 5, 1.0, 1.0}), Error);
    CHECK_THROWS_AS((void)impute_paired_counts(d, PairRule{0, 1, -1.0, 1.0}), Error);
}
