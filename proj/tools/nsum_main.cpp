// nsum: hidden-population size estimation from aggregated relational data.
//
// Subcommands:
//   simulate  synthetic multi-municipality ARD from the generative model
//   fit       HMC fit of the partially pooled model to an ARD CSV
//   estimate  known-group scaling, estimate tables and figures from draws
//   study     simulation benchmark of pooled vs standard estimators
//
// Exit codes: 0 ok, 1 I/O failure, 2 usage, 3 data/model error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nsum/ard.hpp"
#include "nsum/diagnostics.hpp"
#include "nsum/estimator.hpp"
#include "nsum/io.hpp"
#include "nsum/model.hpp"
#include "nsum/sampler.hpp"
#include "nsum/simulator.hpp"
#include "nsum/svg.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace nsum;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitModel = 3;

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case Errc::io:
            return kExitIo;
        default:
            return kExitModel;
    }
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path.string());
    out << content;
    if (!out) throw Error(Errc::io, "write failed on " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw Error(Errc::io, path.string() + ": " + e.what());
    }
    return j;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            out.push_back(std::stod(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::stod(cur));
    return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::size_t municipalities = 150;
    std::size_t respondents = 24;
    std::uint64_t seed = 0;
    std::string out_dir;
    long long population = 50000;
    std::string mu_rho = "2.5,3.5,4.5,5,5.5,6.5";
    std::string sigma_rho = "1,1,1,1,1,1";
    std::string w = "35,35,35,35,2,0.3";
    double mu_delta = 5.5;
    double sigma_delta = 1.0;
    std::size_t n_known = 4;
};

json simulate_manifest(const SimulateArgs& a) {
    json j;
    j["command"] = "simulate";
    j["municipalities"] = a.municipalities;
    j["respondents"] = a.respondents;
    j["seed"] = a.seed;
    j["population"] = a.population;
    j["mu_rho"] = a.mu_rho;
    j["sigma_rho"] = a.sigma_rho;
    j["w"] = a.w;
    j["mu_delta"] = a.mu_delta;
    j["sigma_delta"] = a.sigma_delta;
    j["n_known"] = a.n_known;
    return j;
}

SimulateArgs simulate_args_from_manifest(const json& j) {
    SimulateArgs a;
    a.municipalities = j.at("municipalities").get<std::size_t>();
    a.respondents = j.at("respondents").get<std::size_t>();
    a.seed = j.at("seed").get<std::uint64_t>();
    a.population = j.at("population").get<long long>();
    a.mu_rho = j.at("mu_rho").get<std::string>();
    a.sigma_rho = j.at("sigma_rho").get<std::string>();
    a.w = j.at("w").get<std::string>();
    a.mu_delta = j.at("mu_delta").get<double>();
    a.sigma_delta = j.at("sigma_delta").get<double>();
    a.n_known = j.at("n_known").get<std::size_t>();
    return a;
}

int run_simulate(const SimulateArgs& a) {
    SimConfig cfg;
    cfg.mu_rho = parse_double_list(a.mu_rho);
    cfg.sigma_rho = parse_double_list(a.sigma_rho);
    cfg.w = parse_double_list(a.w);
    cfg.mu_delta = a.mu_delta;
    cfg.sigma_delta = a.sigma_delta;
    cfg.n_known = a.n_known;
    cfg.population = a.population;

    const SurveyDraw survey = simulate_survey(cfg, a.municipalities, a.respondents, a.seed);

    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    save_ard(survey.data, (dir / "ard.csv").string(), (dir / "meta.json").string());

    json truth;
    truth["mu_rho"] = cfg.mu_rho;
    truth["sigma_rho"] = cfg.sigma_rho;
    truth["w"] = cfg.w;
    truth["mu_delta"] = cfg.mu_delta;
    truth["sigma_delta"] = cfg.sigma_delta;
    truth["rho"] = survey.truth.rho;
    truth["delta"] = survey.truth.delta;
    write_json(dir / "truth.json", truth);
    write_json(dir / "manifest.json", simulate_manifest(a));

    std::fprintf(stdout, "simulate: wrote %zu respondents x %zu groups across %zu municipalities to %s\n",
                 survey.data.R(), survey.data.K(), survey.data.M(), a.out_dir.c_str());
    return kExitOk;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
    std::string ard_path, meta_path, out_dir;
    SamplerConfig sampler;
    HyperConfig hyper;
    bool impute_pairs = false;
    // optional pair-rule override of the metadata
    int pair_a = -1, pair_b = -1;
    double b_per_a = 0.0, a_per_b = 0.0;
};

json fit_manifest(const FitArgs& a) {
    json j;
    j["command"] = "fit";
    j["ard"] = a.ard_path;
    j["meta"] = a.meta_path;
    j["chains"] = a.sampler.chains;
    j["iterations"] = a.sampler.iterations;
    j["warmup"] = a.sampler.warmup;
    j["target_accept"] = a.sampler.target_accept;
    j["leapfrog_max_steps"] = a.sampler.leapfrog_max_steps;
    j["seed"] = a.sampler.seed;
    j["init_jitter"] = a.sampler.init_jitter;
    j["sigma_mu_rho"] = a.hyper.sigma_mu_rho;
    j["tau"] = a.hyper.tau;
    j["sigma_w"] = a.hyper.sigma_w;
    j["mu_delta_fixed"] = a.hyper.mu_delta_fixed;
    j["sigma_delta_upper"] = a.hyper.sigma_delta_upper;
    j["impute_pairs"] = a.impute_pairs;
    j["pair_a"] = a.pair_a;
    j["pair_b"] = a.pair_b;
    j["b_per_a"] = a.b_per_a;
    j["a_per_b"] = a.a_per_b;
    return j;
}

FitArgs fit_args_from_manifest(const json& j) {
    FitArgs a;
    a.ard_path = j.at("ard").get<std::string>();
    a.meta_path = j.at("meta").get<std::string>();
    a.sampler.chains = j.at("chains").get<int>();
    a.sampler.iterations = j.at("iterations").get<int>();
    a.sampler.warmup = j.at("warmup").get<int>();
    a.sampler.target_accept = j.at("target_accept").get<double>();
    a.sampler.leapfrog_max_steps = j.at("leapfrog_max_steps").get<int>();
    a.sampler.seed = j.at("seed").get<std::uint64_t>();
    a.sampler.init_jitter = j.at("init_jitter").get<double>();
    a.hyper.sigma_mu_rho = j.at("sigma_mu_rho").get<double>();
    a.hyper.tau = j.at("tau").get<double>();
    a.hyper.sigma_w = j.at("sigma_w").get<double>();
    a.hyper.mu_delta_fixed = j.at("mu_delta_fixed").get<double>();
    a.hyper.sigma_delta_upper = j.at("sigma_delta_upper").get<double>();
    a.impute_pairs = j.at("impute_pairs").get<bool>();
    a.pair_a = j.at("pair_a").get<int>();
    a.pair_b = j.at("pair_b").get<int>();
    a.b_per_a = j.at("b_per_a").get<double>();
    a.a_per_b = j.at("a_per_b").get<double>();
    return a;
}

int run_fit(const FitArgs& a) {
    LoadedArd loaded = load_ard(a.ard_path, a.meta_path);
    ARDataset data = std::move(loaded.data);

    json imputation = json::object();
    if (a.impute_pairs) {
        std::optional<PairRule> rule = loaded.pair_rule;
        if (a.pair_a >= 0 || a.pair_b >= 0 || a.b_per_a > 0.0 || a.a_per_b > 0.0) {
            if (a.pair_a < 0 || a.pair_b < 0 || !(a.b_per_a > 0.0) || !(a.a_per_b > 0.0)) {
                std::fprintf(stderr, "fit: --impute-pairs override needs --pair-a, --pair-b, --b-per-a and --a-per-b\n");
                return kExitUsage;
            }
            rule = PairRule{a.pair_a, a.pair_b, a.b_per_a, a.a_per_b};
        }
        if (!rule) {
            std::fprintf(stderr,
                         "fit: --impute-pairs requires a pair_rule in the metadata or the full flag set; "
                         "no default fills exist\n");
            return kExitUsage;
        }
        auto [imputed, report] = impute_paired_counts(data, *rule);
        data = std::move(imputed);
        imputation["filled_b_from_a"] = report.filled_b_from_a;
        imputation["filled_a_from_b"] = report.filled_a_from_b;
    }

    PooledModel model(data, a.hyper);
    const PosteriorDraws draws = sample(model, a.sampler); // throws on adaptation failure

    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    save_draws_binary(draws, (dir / "draws.bin").string());
    save_draws_csv(draws, (dir / "draws.csv").string());
    save_sampler_stats_csv(draws, (dir / "sampler_stats.csv").string());
    save_diagnostics_csv(draws, (dir / "diagnostics.csv").string());

    json manifest = fit_manifest(a);
    if (!imputation.empty()) manifest["imputation"] = imputation;
    long long divergences = 0;
    for (const auto& s : draws.stats)
        for (auto flag : s.divergent) divergences += flag;
    manifest["divergent_draws"] = divergences;
    write_json(dir / "manifest.json", manifest);

    std::fprintf(stdout, "fit: %d chains x %d kept draws over %zu parameters -> %s\n", draws.chains,
                 draws.kept, draws.dim, a.out_dir.c_str());
    return kExitOk;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
    std::string draws_path, meta_path, out_dir;
};

json estimate_manifest(const EstimateArgs& a) {
    json j;
    j["command"] = "estimate";
    j["draws"] = a.draws_path;
    j["meta"] = a.meta_path;
    return j;
}

EstimateArgs estimate_args_from_manifest(const json& j) {
    EstimateArgs a;
    a.draws_path = j.at("draws").get<std::string>();
    a.meta_path = j.at("meta").get<std::string>();
    return a;
}

int run_estimate(const EstimateArgs& a) {
    const json meta = read_json(a.meta_path);
    // municipalities and groups from the sidecar; counts are not needed here
    std::vector<Municipality> munis;
    for (const auto& jm : meta.at("municipalities"))
        munis.push_back({jm.at("id").get<int>(), jm.at("name").get<std::string>(),
                         jm.at("population").get<long long>()});
    std::vector<std::string> group_names;
    std::vector<KnownCell> known;
    std::size_t k_idx = 0;
    for (const auto& jg : meta.at("groups")) {
        group_names.push_back(jg.at("name").get<std::string>());
        if (jg.at("known").get<bool>()) {
            for (const auto& [mid, val] : jg.at("known_prevalence").items())
                known.push_back({k_idx, static_cast<std::size_t>(std::stoul(mid)), val.get<double>()});
        }
        ++k_idx;
    }

    const PosteriorDraws draws = load_draws_binary(a.draws_path);
    if (!draws.has_layout || draws.layout.K != group_names.size() || draws.layout.M != munis.size())
        throw Error(Errc::domain, "estimate: draws layout does not match the metadata");
    if (known.empty()) throw Error(Errc::no_known_groups, "estimate: metadata declares no known groups");

    const ScaledDraws scaled = scale_draws(draws, known);
    const EstimateTable table = estimates_from_draws(scaled, munis);

    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    std::vector<std::string> muni_names;
    for (const auto& m : munis) muni_names.push_back(m.name);
    save_estimates_csv(table, group_names, muni_names, (dir / "estimates.csv").string());
    save_totals_csv(table, group_names, (dir / "totals.csv").string());

    // per-group caterpillar figures
    for (std::size_t k = 0; k < table.K; ++k) {
        std::vector<CellSummary> cells(table.cells.begin() + k * table.M,
                                       table.cells.begin() + (k + 1) * table.M);
        write_text(dir / ("caterpillar_" + group_names[k] + ".svg"),
                   render_caterpillar_svg(group_names[k], cells, muni_names));
    }

    // hyperparameter summary: posterior mu_rho/w per group plus the implied
    // mean count exp(mean(delta) - mean(rho_k.))
    const std::size_t n_draws = static_cast<std::size_t>(draws.chains) * draws.kept;
    std::vector<HyperSummaryRow> rows(table.K);
    std::vector<double> buf(n_draws);
    json hyper_table = json::array();
    double delta_bar = 0.0;
    for (int c = 0; c < draws.chains; ++c)
        for (int t = 0; t < draws.kept; ++t)
            for (std::size_t i = 0; i < draws.layout.R; ++i)
                delta_bar += draws.at(c, t, draws.layout.delta(i));
    delta_bar /= static_cast<double>(n_draws) * static_cast<double>(std::max<std::size_t>(draws.layout.R, 1));
    for (std::size_t k = 0; k < table.K; ++k) {
        std::size_t idx = 0;
        double w_mean = 0.0;
        for (int c = 0; c < draws.chains; ++c)
            for (int t = 0; t < draws.kept; ++t, ++idx) {
                buf[idx] = draws.at(c, t, draws.layout.mu_rho(k));
                w_mean += draws.at(c, t, draws.layout.w(k));
            }
        w_mean /= static_cast<double>(n_draws);
        double mean = 0.0;
        for (double v : buf) mean += v;
        mean /= static_cast<double>(n_draws);
        rows[k].group = group_names[k];
        rows[k].mean = mean;
        rows[k].q025 = quantile_type7(buf, 0.025);
        rows[k].q975 = quantile_type7(buf, 0.975);

        double rho_bar = 0.0;
        for (int c = 0; c < draws.chains; ++c)
            for (int t = 0; t < draws.kept; ++t)
                for (std::size_t m = 0; m < table.M; ++m)
                    rho_bar += draws.at(c, t, draws.layout.rho(k, m));
        rho_bar /= static_cast<double>(n_draws) * static_cast<double>(table.M);

        json row;
        row["group"] = group_names[k];
        row["mu_rho_mean"] = rows[k].mean;
        row["mu_rho_q025"] = rows[k].q025;
        row["mu_rho_q975"] = rows[k].q975;
        row["w_mean"] = w_mean;
        row["implied_mean_count"] = std::exp(delta_bar - rho_bar);
        hyper_table.push_back(row);
    }
    write_text(dir / "hyperparams.svg",
               render_hyper_summary_svg("posterior mu_rho by group", rows));
    {
        std::ostringstream csv;
        csv << "group,mu_rho_mean,mu_rho_q025,mu_rho_q975,w_mean,implied_mean_count\n";
        for (const auto& row : hyper_table) {
            char buf2[160];
            std::snprintf(buf2, sizeof(buf2), ",%.6g,%.6g,%.6g,%.6g,%.6g\n",
                          row.at("mu_rho_mean").get<double>(), row.at("mu_rho_q025").get<double>(),
                          row.at("mu_rho_q975").get<double>(), row.at("w_mean").get<double>(),
                          row.at("implied_mean_count").get<double>());
            csv << row.at("group").get<std::string>() << buf2;
        }
        write_text(dir / "hyperparams.csv", csv.str());
    }

    long long divergences = 0;
    for (const auto& s : draws.stats)
        for (auto flag : s.divergent) divergences += flag;

    json summary = estimate_manifest(a);
    summary["clamped_prevalence_draws"] = table.clamp_count;
    summary["divergent_draws"] = divergences;
    summary["chains"] = draws.chains;
    summary["kept_iterations"] = draws.kept;
    summary["seed"] = draws.config.seed;
    json totals = json::array();
    for (std::size_t k = 0; k < table.K; ++k) {
        json t;
        t["group"] = group_names[k];
        t["median"] = table.totals[k].median;
        t["q025"] = table.totals[k].q025;
        t["q975"] = table.totals[k].q975;
        totals.push_back(t);
    }
    summary["national_totals"] = totals;
    write_json(dir / "summary.json", summary);
    write_json(dir / "manifest.json", estimate_manifest(a));

    std::fprintf(stdout, "estimate: %zu groups x %zu municipalities -> %s\n", table.K, table.M,
                 a.out_dir.c_str());
    return kExitOk;
}

// ------------------------------------------------------------------- study

struct StudyArgs {
    std::string sizes = "5,10,15,20,30,50,100";
    int replicates = 20;
    std::size_t municipalities = 150;
    std::uint64_t seed = 0;
    std::string out_dir;
    int iterations = 1500;
    int warmup = 900;
    int leapfrog_max_steps = 256;
    unsigned threads = 0;
    long long population = 50000;
};

json study_manifest(const StudyArgs& a) {
    json j;
    j["command"] = "study";
    j["sizes"] = a.sizes;
    j["replicates"] = a.replicates;
    j["municipalities"] = a.municipalities;
    j["seed"] = a.seed;
    j["iterations"] = a.iterations;
    j["warmup"] = a.warmup;
    j["leapfrog_max_steps"] = a.leapfrog_max_steps;
    j["population"] = a.population;
    return j;
}

StudyArgs study_args_from_manifest(const json& j) {
    StudyArgs a;
    a.sizes = j.at("sizes").get<std::string>();
    a.replicates = j.at("replicates").get<int>();
    a.municipalities = j.at("municipalities").get<std::size_t>();
    a.seed = j.at("seed").get<std::uint64_t>();
    a.iterations = j.at("iterations").get<int>();
    a.warmup = j.at("warmup").get<int>();
    a.leapfrog_max_steps = j.at("leapfrog_max_steps").get<int>();
    a.population = j.at("population").get<long long>();
    return a;
}

int run_study(const StudyArgs& a) {
    StudyConfig cfg;
    cfg.sizes.clear();
    for (double v : parse_double_list(a.sizes)) cfg.sizes.push_back(static_cast<int>(v));
    cfg.replicates = a.replicates;
    cfg.municipalities = a.municipalities;
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    cfg.sim.population = a.population;
    cfg.sampler.iterations = a.iterations;
    cfg.sampler.warmup = a.warmup;
    cfg.sampler.leapfrog_max_steps = a.leapfrog_max_steps;

    const StudyResult result = run_simulation_study(cfg);

    fs::create_directories(a.out_dir);
    const fs::path dir(a.out_dir);
    save_study_csv(result, (dir / "study.csv").string(), false);
    save_study_csv(result, (dir / "study_mare_all_groups.csv").string(), true);
    write_text(dir / "study_boxplot.svg", render_study_boxplot_svg(result));

    json manifest = study_manifest(a);
    json failures = json::array();
    for (const auto& cell : result.cells) {
        if (!cell.pooled_ok || !cell.standard_ok) {
            json f;
            f["size"] = cell.size;
            f["replicate"] = cell.replicate;
            f["error"] = cell.error;
            failures.push_back(f);
        }
    }
    manifest["failed_cells"] = failures;
    write_json(dir / "manifest.json", manifest);

    std::fprintf(stdout, "study: %zu cells (%zu failed) -> %s\n", result.cells.size(),
                 failures.size(), a.out_dir.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hidden-population size estimation from aggregated relational data"};
    app.require_subcommand(1);

    SimulateArgs sim;
    std::string sim_manifest_path;
    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic survey");
    sim_cmd->add_option("--municipalities,-M", sim.municipalities, "number of municipalities");
    sim_cmd->add_option("--respondents,-n", sim.respondents, "respondents per municipality");
    sim_cmd->add_option("--seed,-s", sim.seed, "RNG seed");
    sim_cmd->add_option("--out,-o", sim.out_dir, "output directory")->required();
    sim_cmd->add_option("--population", sim.population, "population per municipality");
    sim_cmd->add_option("--mu-rho", sim.mu_rho, "group means of rho (comma list)");
    sim_cmd->add_option("--sigma-rho", sim.sigma_rho, "group sds of rho (comma list)");
    sim_cmd->add_option("--w", sim.w, "group overdispersions (comma list)");
    sim_cmd->add_option("--mu-delta", sim.mu_delta, "log-degree mean");
    sim_cmd->add_option("--sigma-delta", sim.sigma_delta, "log-degree sd");
    sim_cmd->add_option("--known", sim.n_known, "number of leading known groups");
    sim_cmd->add_option("--from-manifest", sim_manifest_path, "replay a recorded manifest");

    FitArgs fit;
    std::string fit_manifest_path;
    auto* fit_cmd = app.add_subcommand("fit", "sample the pooled posterior");
    auto* ard_opt = fit_cmd->add_option("--ard", fit.ard_path, "ARD counts CSV");
    auto* meta_opt = fit_cmd->add_option("--meta", fit.meta_path, "metadata JSON");
    fit_cmd->add_option("--out,-o", fit.out_dir, "output directory")->required();
    fit_cmd->add_option("--chains", fit.sampler.chains, "number of chains");
    fit_cmd->add_option("--iters", fit.sampler.iterations, "total iterations per chain");
    fit_cmd->add_option("--warmup", fit.sampler.warmup, "warmup iterations (discarded)");
    fit_cmd->add_option("--seed,-s", fit.sampler.seed, "RNG seed");
    fit_cmd->add_option("--target-accept", fit.sampler.target_accept, "dual-averaging target");
    fit_cmd->add_option("--leapfrog-max", fit.sampler.leapfrog_max_steps, "max leapfrog steps");
    fit_cmd->add_option("--init-jitter", fit.sampler.init_jitter, "init range on unconstrained scale");
    fit_cmd->add_option("--sigma-mu-rho", fit.hyper.sigma_mu_rho, "half-normal sd on mu_rho");
    fit_cmd->add_option("--tau", fit.hyper.tau, "half-normal sd on sigma2_rho");
    fit_cmd->add_option("--sigma-w", fit.hyper.sigma_w, "half-normal sd on w");
    fit_cmd->add_option("--mu-delta", fit.hyper.mu_delta_fixed, "fixed delta prior mean");
    fit_cmd->add_option("--sigma-delta-upper", fit.hyper.sigma_delta_upper, "uniform bound on sigma_delta");
    fit_cmd->add_flag("--impute-pairs", fit.impute_pairs, "apply the paired-count fill rule");
    fit_cmd->add_option("--pair-a", fit.pair_a, "pair rule group a (overrides metadata)");
    fit_cmd->add_option("--pair-b", fit.pair_b, "pair rule group b (overrides metadata)");
    fit_cmd->add_option("--b-per-a", fit.b_per_a, "fill of b per unit a");
    fit_cmd->add_option("--a-per-b", fit.a_per_b, "fill of a per unit b");
    fit_cmd->add_option("--from-manifest", fit_manifest_path, "replay a recorded manifest");

    EstimateArgs est;
    std::string est_manifest_path;
    auto* est_cmd = app.add_subcommand("estimate", "scale draws and summarize estimates");
    auto* draws_opt = est_cmd->add_option("--draws", est.draws_path, "draws.bin from fit");
    auto* emeta_opt = est_cmd->add_option("--meta", est.meta_path, "metadata JSON with known prevalences");
    est_cmd->add_option("--out,-o", est.out_dir, "output directory")->required();
    est_cmd->add_option("--from-manifest", est_manifest_path, "replay a recorded manifest");

    StudyArgs study;
    std::string study_manifest_path;
    auto* study_cmd = app.add_subcommand("study", "pooled vs standard benchmark study");
    study_cmd->add_option("--sizes", study.sizes, "respondents-per-municipality grid (comma list)");
    study_cmd->add_option("--replicates", study.replicates, "surveys per size");
    study_cmd->add_option("--municipalities,-M", study.municipalities, "municipalities per survey");
    study_cmd->add_option("--seed,-s", study.seed, "RNG seed");
    study_cmd->add_option("--out,-o", study.out_dir, "output directory")->required();
    study_cmd->add_option("--iters", study.iterations, "sampler iterations per fit");
    study_cmd->add_option("--warmup", study.warmup, "sampler warmup per fit");
    study_cmd->add_option("--leapfrog-max", study.leapfrog_max_steps, "max leapfrog steps");
    study_cmd->add_option("--threads", study.threads, "worker cap (0 = NSUM_THREADS or cores)");
    study_cmd->add_option("--population", study.population, "population per municipality");
    study_cmd->add_option("--from-manifest", study_manifest_path, "replay a recorded manifest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        (void)app.exit(e);
        return kExitUsage;
    }

    try {
        if (sim_cmd->parsed()) {
            if (!sim_manifest_path.empty()) {
                const auto out = sim.out_dir;
                sim = simulate_args_from_manifest(read_json(sim_manifest_path));
                sim.out_dir = out;
            }
            return run_simulate(sim);
        }
        if (fit_cmd->parsed()) {
            if (!fit_manifest_path.empty()) {
                const auto out = fit.out_dir;
                fit = fit_args_from_manifest(read_json(fit_manifest_path));
                fit.out_dir = out;
            } else if (ard_opt->count() == 0 || meta_opt->count() == 0) {
                std::fprintf(stderr, "fit: --ard and --meta are required (or --from-manifest)\n");
                return kExitUsage;
            }
            return run_fit(fit);
        }
        if (est_cmd->parsed()) {
            if (!est_manifest_path.empty()) {
                const auto out = est.out_dir;
                est = estimate_args_from_manifest(read_json(est_manifest_path));
                est.out_dir = out;
            } else if (draws_opt->count() == 0 || emeta_opt->count() == 0) {
                std::fprintf(stderr, "estimate: --draws and --meta are required (or --from-manifest)\n");
                return kExitUsage;
            }
            return run_estimate(est);
        }
        if (study_cmd->parsed()) {
            if (!study_manifest_path.empty()) {
                const auto out = study.out_dir;
                study = study_args_from_manifest(read_json(study_manifest_path));
                study.out_dir = out;
            }
            return run_study(study);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "nsum: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "nsum: %s\n", e.what());
        return kExitModel;
    }
    return kExitUsage;
}
