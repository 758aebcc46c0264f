#include "nsum/ard.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace nsum {

using json = nlohmann::ordered_json;

void ARDataset::validate() const {
    if (R() < 1 || counts.empty()) throw Error(Errc::empty_dataset, "dataset has no respondents");
    if (K() < 2) throw Error(Errc::empty_dataset, "dataset needs at least 2 groups");
    if (M() < 1) throw Error(Errc::empty_dataset, "dataset needs at least 1 municipality");
    if (counts.size() != R() * K()) throw Error(Errc::empty_dataset, "count matrix shape mismatch");

    for (std::size_t k = 0; k < K(); ++k) {
        const auto& g = groups[k];
        if (g.id != static_cast<int>(k))
            throw Error(Errc::domain, "group ids must be dense 0..K-1; got " + std::to_string(g.id) + " at position " + std::to_string(k));
        if (g.known) {
            if (g.known_prevalence.size() != M())
                throw Error(Errc::domain, "known group '" + g.name + "' must carry a prevalence for every municipality");
            for (std::size_t m = 0; m < M(); ++m) {
                const double p = g.known_prevalence[m];
                if (!(p > 0.0) || p > 1.0)
                    throw Error(Errc::domain, "known prevalence for group '" + g.name + "', municipality " + std::to_string(m) + " must lie in (0,1]");
            }
        } else if (!g.known_prevalence.empty()) {
            throw Error(Errc::domain, "unknown group '" + g.name + "' must not carry prevalences");
        }
    }
    for (std::size_t m = 0; m < M(); ++m) {
        if (municipalities[m].id != static_cast<int>(m))
            throw Error(Errc::domain, "municipality ids must be dense 0..M-1");
        if (municipalities[m].population < 1)
            throw Error(Errc::domain, "municipality '" + municipalities[m].name + "' population must be >= 1");
    }
    for (std::size_t i = 0; i < R(); ++i) {
        const int m = muni_of_respondent[i];
        if (m < 0 || m >= static_cast<int>(M()))
            throw Error(Errc::unknown_municipality, "respondent row " + std::to_string(i) + " references unknown municipality " + std::to_string(m));
    }
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] < 0)
            throw Error(Errc::non_integer_count, "count at row " + std::to_string(i / K()) + ", column " + groups[i % K()].name + " is negative");
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

long long parse_count(const std::string& tok, std::size_t row, const std::string& col) {
    if (tok.empty())
        throw Error(Errc::non_integer_count, "row " + std::to_string(row) + ", column " + col + ": empty count");
    for (char c : tok) {
        if (c < '0' || c > '9')
            throw Error(Errc::non_integer_count,
                        "row " + std::to_string(row) + ", column " + col + ": '" + tok + "' is not a non-negative integer");
    }
    if (tok.size() > 15)
        throw Error(Errc::non_integer_count, "row " + std::to_string(row) + ", column " + col + ": count out of range");
    return std::stoll(tok);
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error(Errc::io, path + ": " + e.what());
    }
    return j;
}

} // namespace

LoadedArd load_ard(const std::string& csv_path, const std::string& meta_path) {
    const json meta = load_json_file(meta_path);

    LoadedArd result;
    ARDataset& d = result.data;
    if (!meta.contains("municipalities") || !meta.contains("groups"))
        throw Error(Errc::missing_column, meta_path + ": metadata needs 'municipalities' and 'groups' arrays");

    for (const auto& jm : meta.at("municipalities")) {
        Municipality m;
        m.id = jm.at("id").get<int>();
        m.name = jm.at("name").get<std::string>();
        m.population = jm.at("population").get<long long>();
        d.municipalities.push_back(std::move(m));
    }
    for (const auto& jg : meta.at("groups")) {
        GroupSpec g;
        g.id = jg.at("id").get<int>();
        g.name = jg.at("name").get<std::string>();
        g.known = jg.at("known").get<bool>();
        if (g.known) {
            g.known_prevalence.assign(d.municipalities.size(), 0.0);
            for (const auto& [key, val] : jg.at("known_prevalence").items()) {
                const int mid = std::stoi(key);
                if (mid < 0 || mid >= static_cast<int>(d.municipalities.size()))
                    throw Error(Errc::unknown_municipality, "group '" + g.name + "' prevalence references municipality " + key);
                g.known_prevalence[mid] = val.get<double>();
            }
        }
        d.groups.push_back(std::move(g));
    }
    if (meta.contains("meta")) d.meta = meta.at("meta").get<std::string>();
    if (meta.contains("pair_rule")) {
        const auto& jp = meta.at("pair_rule");
        PairRule r;
        r.group_a = jp.at("group_a").get<int>();
        r.group_b = jp.at("group_b").get<int>();
        r.b_per_a = jp.at("b_per_a").get<double>();
        r.a_per_b = jp.at("a_per_b").get<double>();
        result.pair_rule = r;
    }

    std::ifstream in(csv_path);
    if (!in) throw Error(Errc::io, "cannot open " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw Error(Errc::empty_dataset, csv_path + ": empty file");

    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "respondent_id" || header[1] != "municipality_id")
        throw Error(Errc::missing_column, csv_path + ": header must start with respondent_id,municipality_id");
    const std::size_t K = d.groups.size();
    if (header.size() != 2 + K)
        throw Error(Errc::missing_column, csv_path + ": expected " + std::to_string(K) + " group columns, found " + std::to_string(header.size() - 2));
    for (std::size_t k = 0; k < K; ++k) {
        const std::string want = "g_" + d.groups[k].name;
        if (header[2 + k] != want)
            throw Error(Errc::missing_column, csv_path + ": column " + std::to_string(2 + k) + " should be " + want + ", found " + header[2 + k]);
    }

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto toks = split_csv_line(line);
        if (toks.size() != 2 + K)
            throw Error(Errc::missing_column, csv_path + ": row " + std::to_string(row) + " has " + std::to_string(toks.size()) + " fields, expected " + std::to_string(2 + K));
        int muni = -1;
        try {
            muni = std::stoi(toks[1]);
        } catch (const std::exception&) {
            throw Error(Errc::unknown_municipality, csv_path + ": row " + std::to_string(row) + ": bad municipality_id '" + toks[1] + "'");
        }
        if (muni < 0 || muni >= static_cast<int>(d.municipalities.size()))
            throw Error(Errc::unknown_municipality, csv_path + ": row " + std::to_string(row) + ": unknown municipality " + toks[1]);
        d.muni_of_respondent.push_back(muni);
        for (std::size_t k = 0; k < K; ++k)
            d.counts.push_back(parse_count(toks[2 + k], row, header[2 + k]));
        ++row;
    }
    if (row == 0) throw Error(Errc::empty_dataset, csv_path + ": no data rows");

    d.validate();
    return result;
}

void save_ard(const ARDataset& data, const std::string& csv_path, const std::string& meta_path,
              const std::optional<PairRule>& pair_rule) {
    {
        std::ofstream out(csv_path, std::ios::binary);
        if (!out) throw Error(Errc::io, "cannot write " + csv_path);
        out << "respondent_id,municipality_id";
        for (const auto& g : data.groups) out << ",g_" << g.name;
        out << "\n";
        for (std::size_t i = 0; i < data.R(); ++i) {
            out << i << ',' << data.muni_of_respondent[i];
            for (std::size_t k = 0; k < data.K(); ++k) out << ',' << data.y(i, k);
            out << "\n";
        }
        if (!out) throw Error(Errc::io, "write failed on " + csv_path);
    }

    json j;
    j["municipalities"] = json::array();
    for (const auto& m : data.municipalities)
        j["municipalities"].push_back({{"id", m.id}, {"name", m.name}, {"population", m.population}});
    j["groups"] = json::array();
    for (const auto& g : data.groups) {
        json jg = {{"id", g.id}, {"name", g.name}, {"known", g.known}};
        if (g.known) {
            json prev = json::object();
            for (std::size_t m = 0; m < g.known_prevalence.size(); ++m)
                prev[std::to_string(m)] = g.known_prevalence[m];
            jg["known_prevalence"] = std::move(prev);
        }
        j["groups"].push_back(std::move(jg));
    }
    if (!data.meta.empty()) j["meta"] = data.meta;
    if (pair_rule) {
        j["pair_rule"] = {{"group_a", pair_rule->group_a},
                          {"group_b", pair_rule->group_b},
                          {"b_per_a", pair_rule->b_per_a},
                          {"a_per_b", pair_rule->a_per_b}};
    }
    std::ofstream out(meta_path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + meta_path);
    out << j.dump(2) << "\n";
    if (!out) throw Error(Errc::io, "write failed on " + meta_path);
}

std::pair<ARDataset, ImputationReport> impute_paired_counts(const ARDataset& data, const PairRule& rule) {
    const int K = static_cast<int>(data.K());
    if (rule.group_a < 0 || rule.group_a >= K || rule.group_b < 0 || rule.group_b >= K)
        throw_domain("pair rule references a group outside 0..K-1");
    if (rule.group_a == rule.group_b) throw_domain("pair rule groups must differ");
    if (!(rule.b_per_a > 0.0) || !(rule.a_per_b > 0.0)) throw_domain("pair rule fills must be positive");

    ARDataset out = data;
    ImputationReport report;
    const auto fill = [](long long trigger, double ratio) {
        const double v = std::floor(static_cast<double>(trigger) * ratio + 0.5);
        return std::max<long long>(1, static_cast<long long>(v));
    };
    for (std::size_t i = 0; i < out.R(); ++i) {
        const long long ya = out.y(i, rule.group_a);
        const long long yb = out.y(i, rule.group_b);
        if (ya > 0 && yb == 0) {
            out.y(i, rule.group_b) = fill(ya, rule.b_per_a);
            ++report.filled_b_from_a;
        } else if (yb > 0 && ya == 0) {
            out.y(i, rule.group_a) = fill(yb, rule.a_per_b);
            ++report.filled_a_from_b;
        }
    }
    return {std::move(out), report};
}

} // namespace nsum
