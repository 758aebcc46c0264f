#include "nsum/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "nsum/diagnostics.hpp"

static_assert(std::endian::native == std::endian::little, "binary draws format assumes little-endian");

namespace nsum {

namespace {

constexpr char kMagic[4] = {'N', 'S', 'U', 'M'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw Error(Errc::io, "truncated draws file");
    return v;
}

void put_string(std::ofstream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in) {
    const auto n = get<std::uint32_t>(in);
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw Error(Errc::io, "truncated draws file");
    return s;
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // Trim to the shortest representation that round-trips.
    for (int prec = 1; prec < 17; ++prec) {
        char probe[40];
        std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(probe, "%lf", &back);
        if (back == v) return probe;
    }
    return buf;
}

void save_draws_csv(const PosteriorDraws& draws, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    out << "chain,iter";
    for (const auto& n : draws.names) out << ',' << n;
    out << "\n";
    char buf[40];
    for (int c = 0; c < draws.chains; ++c) {
        for (int t = 0; t < draws.kept; ++t) {
            out << c << ',' << t;
            const auto row = draws.draw(c, t);
            for (double v : row) {
                std::snprintf(buf, sizeof(buf), "%.9g", v);
                out << ',' << buf;
            }
            out << "\n";
        }
    }
    if (!out) throw Error(Errc::io, "write failed on " + path);
}

void save_draws_binary(const PosteriorDraws& draws, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, draws.has_layout ? 1u : 0u);
    put<std::uint64_t>(out, draws.layout.K);
    put<std::uint64_t>(out, draws.layout.M);
    put<std::uint64_t>(out, draws.layout.R);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(draws.chains));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(draws.kept));
    put<std::uint64_t>(out, draws.dim);
    // config echo
    put<std::int32_t>(out, draws.config.chains);
    put<std::int32_t>(out, draws.config.iterations);
    put<std::int32_t>(out, draws.config.warmup);
    put<double>(out, draws.config.target_accept);
    put<std::int32_t>(out, draws.config.leapfrog_max_steps);
    put<std::uint64_t>(out, draws.config.seed);
    put<double>(out, draws.config.init_jitter);
    for (const auto& n : draws.names) put_string(out, n);
    out.write(reinterpret_cast<const char*>(draws.draws.data()),
              static_cast<std::streamsize>(draws.draws.size() * sizeof(double)));
    for (const auto& s : draws.stats) {
        out.write(reinterpret_cast<const char*>(s.accept_stat.data()),
                  static_cast<std::streamsize>(s.accept_stat.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(s.step_size.data()),
                  static_cast<std::streamsize>(s.step_size.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(s.divergent.data()),
                  static_cast<std::streamsize>(s.divergent.size()));
        put<std::int64_t>(out, s.warmup_divergences);
        put<double>(out, s.adapted_step_size);
    }
    if (!out) throw Error(Errc::io, "write failed on " + path);
}

PosteriorDraws load_draws_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error(Errc::io, path + ": not a draws file");
    if (get<std::uint32_t>(in) != kVersion) throw Error(Errc::io, path + ": unsupported draws version");

    PosteriorDraws d;
    d.has_layout = get<std::uint32_t>(in) != 0;
    d.layout.K = get<std::uint64_t>(in);
    d.layout.M = get<std::uint64_t>(in);
    d.layout.R = get<std::uint64_t>(in);
    d.chains = static_cast<int>(get<std::uint32_t>(in));
    d.kept = static_cast<int>(get<std::uint32_t>(in));
    d.dim = get<std::uint64_t>(in);
    d.config.chains = get<std::int32_t>(in);
    d.config.iterations = get<std::int32_t>(in);
    d.config.warmup = get<std::int32_t>(in);
    d.config.target_accept = get<double>(in);
    d.config.leapfrog_max_steps = get<std::int32_t>(in);
    d.config.seed = get<std::uint64_t>(in);
    d.config.init_jitter = get<double>(in);
    d.names.resize(d.dim);
    for (auto& n : d.names) n = get_string(in);
    d.draws.resize(static_cast<std::size_t>(d.chains) * d.kept * d.dim);
    in.read(reinterpret_cast<char*>(d.draws.data()),
            static_cast<std::streamsize>(d.draws.size() * sizeof(double)));
    if (!in) throw Error(Errc::io, "truncated draws file");
    d.stats.resize(d.chains);
    for (auto& s : d.stats) {
        s.accept_stat.resize(d.kept);
        s.step_size.resize(d.kept);
        s.divergent.resize(d.kept);
        in.read(reinterpret_cast<char*>(s.accept_stat.data()),
                static_cast<std::streamsize>(s.accept_stat.size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(s.step_size.data()),
                static_cast<std::streamsize>(s.step_size.size() * sizeof(double)));
        in.read(reinterpret_cast<char*>(s.divergent.data()),
                static_cast<std::streamsize>(s.divergent.size()));
        s.warmup_divergences = get<std::int64_t>(in);
        s.adapted_step_size = get<double>(in);
    }
    if (!in) throw Error(Errc::io, "truncated draws file");
    return d;
}

void save_sampler_stats_csv(const PosteriorDraws& draws, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    out << "chain,iter,accept_stat,step_size,divergent\n";
    char buf[96];
    for (int c = 0; c < draws.chains; ++c) {
        const auto& s = draws.stats[c];
        for (int t = 0; t < draws.kept; ++t) {
            std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%d\n", c, t, s.accept_stat[t],
                          s.step_size[t], static_cast<int>(s.divergent[t]));
            out << buf;
        }
    }
    if (!out) throw Error(Errc::io, "write failed on " + path);
}

void save_diagnostics_csv(const PosteriorDraws& draws, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    out << "parameter,rhat,ess\n";
    char buf[64];
    for (std::size_t j = 0; j < draws.dim; ++j) {
        const auto series = draws.chains_of(j);
        double rhat_v;
        try {
            const auto r = split_rhat(series);
            rhat_v = r.value;
        } catch (const Error&) {
            rhat_v = std::numeric_limits<double>::quiet_NaN();
        }
        double ess_total = 0.0;
        bool ess_ok = false;
        for (const auto& chain : series) {
            const auto e = ess(chain);
            if (!e.degenerate) {
                ess_total += e.value;
                ess_ok = true;
            }
        }
        out << draws.names[j] << ',';
        std::snprintf(buf, sizeof(buf), "%.6g,%.6g\n", rhat_v,
                      ess_ok ? ess_total : std::numeric_limits<double>::quiet_NaN());
        out << buf;
    }
    if (!out) throw Error(Errc::io, "write failed on " + path);
}

void save_estimates_csv(const EstimateTable& table, const std::vector<std::string>& group_names,
                        const std::vector<std::string>& muni_names, const std::string& path) {
    if (group_names.size() != table.K || muni_names.size() != table.M)
        throw_domain("save_estimates_csv: name lengths do not match table");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    out << "group,municipality,mean,median,q025,q975\n";
    char buf[128];
    for (std::size_t k = 0; k < table.K; ++k) {
        for (std::size_t m = 0; m < table.M; ++m) {
            const auto& c = table.cells[k * table.M + m];
            std::snprintf(buf, sizeof(buf), ",%.4f,%.4f,%.4f,%.4f\n", c.mean, c.median, c.q025, c.q975);
            out << group_names[k] << ',' << muni_names[m] << buf;
        }
    }
    if (!out) throw Error(Errc::io, "write failed on " + path);
}

void save_totals_csv(const EstimateTable& table, const std::vector<std::string>& group_names,
                     const std::string& path) {
    if (group_names.size() != table.K) throw_domain("save_totals_csv: name length mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    out << "group,mean,median,q025,q975\n";
    char buf[128];
    for (std::size_t k = 0; k < table.K; ++k) {
        const auto& c = table.totals[k];
        std::snprintf(buf, sizeof(buf), ",%.4f,%.4f,%.4f,%.4f\n", c.mean, c.median, c.q025, c.q975);
        out << group_names[k] << buf;
    }
    if (!out) throw Error(Errc::io, "write failed on " + path);
}

void save_study_csv(const StudyResult& result, const std::string& path, bool all_groups) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    out << "size,replicate,model,mare,seed\n";
    char buf[96];
    for (const auto& cell : result.cells) {
        if (cell.pooled_ok) {
            std::snprintf(buf, sizeof(buf), "%d,%d,pooled,%.9g,%llu\n", cell.size, cell.replicate,
                          all_groups ? cell.pooled_mare_all : cell.pooled_mare,
                          static_cast<unsigned long long>(cell.seed));
            out << buf;
        }
        if (cell.standard_ok) {
            std::snprintf(buf, sizeof(buf), "%d,%d,standard,%.9g,%llu\n", cell.size, cell.replicate,
                          all_groups ? cell.standard_mare_all : cell.standard_mare,
                          static_cast<unsigned long long>(cell.seed));
            out << buf;
        }
    }
    if (!out) throw Error(Errc::io, "write failed on " + path);
}

} // namespace nsum
