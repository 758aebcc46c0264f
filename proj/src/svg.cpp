#include "nsum/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include "nsum/estimator.hpp"

namespace nsum {

namespace {

// Deterministic fixed-precision formatting keeps figures byte-stable.
std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void svg_open(std::ostringstream& s, double w, double h, const std::string& desc) {
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n";
    s << "<desc>" << desc << "</desc>\n";
    s << "<rect x=\"0\" y=\"0\" width=\"" << num(w) << "\" height=\"" << num(h) << "\" fill=\"white\"/>\n";
}

void line(std::ostringstream& s, double x1, double y1, double x2, double y2,
          const std::string& color, double width = 1.0) {
    s << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\""
      << num(y2) << "\" stroke=\"" << color << "\" stroke-width=\"" << num(width) << "\"/>\n";
}

void circle(std::ostringstream& s, double cx, double cy, double r, const std::string& color) {
    s << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(r) << "\" fill=\""
      << color << "\"/>\n";
}

void rect(std::ostringstream& s, double x, double y, double w, double h, const std::string& fill,
          const std::string& stroke) {
    s << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\""
      << num(h) << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
}

void text(std::ostringstream& s, double x, double y, const std::string& t, int size = 11,
          const std::string& anchor = "middle") {
    s << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\""
      << size << "\" text-anchor=\"" << anchor << "\">" << t << "</text>\n";
}

} // namespace

std::string render_caterpillar_svg(const std::string& group_name,
                                   const std::vector<CellSummary>& cells,
                                   const std::vector<std::string>& muni_names) {
    const std::size_t M = cells.size();
    const double left = 70.0, right = 20.0, top = 40.0, bottom = 50.0;
    const double plot_w = std::max<double>(480.0, 9.0 * static_cast<double>(M));
    const double width = left + plot_w + right, height = 420.0;
    const double plot_h = height - top - bottom;

    std::vector<std::size_t> order(M);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cells[a].mean < cells[b].mean; });

    const double floor_v = 1e-3;
    double lo = 1e300, hi = -1e300;
    for (const auto& c : cells) {
        lo = std::min(lo, std::max(c.q025, floor_v));
        hi = std::max(hi, std::max(c.q975, floor_v));
    }
    const double log_lo = std::floor(std::log10(lo));
    const double log_hi = std::ceil(std::log10(hi * 1.0001));
    const auto y_of = [&](double v) {
        const double lv = std::log10(std::max(v, floor_v));
        return top + plot_h * (1.0 - (lv - log_lo) / std::max(log_hi - log_lo, 1e-9));
    };

    std::ostringstream s;
    svg_open(s, width, height, "caterpillar; y-axis: log10; municipalities sorted by posterior mean");
    text(s, width / 2.0, 22.0, group_name + " — estimated group size per municipality", 14);

    for (double e = log_lo; e <= log_hi + 1e-9; e += 1.0) {
        const double y = y_of(std::pow(10.0, e));
        line(s, left, y, left + plot_w, y, "#dddddd");
        char lab[32];
        std::snprintf(lab, sizeof(lab), "1e%d", static_cast<int>(e));
        text(s, left - 8.0, y + 4.0, lab, 10, "end");
    }
    line(s, left, top, left, top + plot_h, "#333333");
    line(s, left, top + plot_h, left + plot_w, top + plot_h, "#333333");

    const double step = plot_w / static_cast<double>(M);
    for (std::size_t pos = 0; pos < M; ++pos) {
        const auto& c = cells[order[pos]];
        const double x = left + step * (static_cast<double>(pos) + 0.5);
        line(s, x, y_of(c.q025), x, y_of(c.q975), "#9e9e9e", 1.4);
        circle(s, x, y_of(c.mean), 2.2, "#1f5fa8");
    }
    if (M <= 40) {
        for (std::size_t pos = 0; pos < M; ++pos) {
            const double x = left + step * (static_cast<double>(pos) + 0.5);
            s << "<text x=\"" << num(x) << "\" y=\"" << num(top + plot_h + 12.0)
              << "\" font-family=\"sans-serif\" font-size=\"8\" text-anchor=\"end\" transform=\"rotate(-45 "
              << num(x) << ' ' << num(top + plot_h + 12.0) << ")\">" << muni_names[order[pos]]
              << "</text>\n";
        }
    }
    text(s, left + plot_w / 2.0, height - 10.0, "municipalities (sorted)", 11);
    s << "</svg>\n";
    return s.str();
}

std::string render_study_boxplot_svg(const StudyResult& result, bool all_groups) {
    // Collect replicate errors per (size, model).
    std::map<int, std::vector<double>> pooled, standard;
    for (const auto& c : result.cells) {
        if (c.pooled_ok) pooled[c.size].push_back(all_groups ? c.pooled_mare_all : c.pooled_mare);
        if (c.standard_ok) standard[c.size].push_back(all_groups ? c.standard_mare_all : c.standard_mare);
    }
    std::vector<int> sizes;
    for (const auto& [size, _] : pooled) sizes.push_back(size);
    for (const auto& [size, _] : standard)
        if (!std::count(sizes.begin(), sizes.end(), size)) sizes.push_back(size);
    std::sort(sizes.begin(), sizes.end());

    const double left = 60.0, right = 20.0, top = 40.0, bottom = 46.0;
    const double width = std::max<double>(520.0, left + right + 90.0 * static_cast<double>(sizes.size()));
    const double height = 380.0;
    const double plot_w = width - left - right, plot_h = height - top - bottom;

    double hi = 0.0;
    for (const auto& [_, v] : pooled)
        for (double e : v) hi = std::max(hi, e);
    for (const auto& [_, v] : standard)
        for (double e : v) hi = std::max(hi, e);
    hi = std::max(hi * 1.1, 0.1);
    const auto y_of = [&](double v) { return top + plot_h * (1.0 - v / hi); };

    std::ostringstream s;
    svg_open(s, width, height, "study error boxplot; pooled vs standard per sample size");
    text(s, width / 2.0, 22.0, "mean absolute relative error by respondents per municipality", 13);
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = hi * tick / 4.0;
        line(s, left, y_of(v), left + plot_w, y_of(v), "#dddddd");
        char lab[32];
        std::snprintf(lab, sizeof(lab), "%.2f", v);
        text(s, left - 6.0, y_of(v) + 4.0, lab, 10, "end");
    }
    line(s, left, top, left, top + plot_h, "#333333");
    line(s, left, top + plot_h, left + plot_w, top + plot_h, "#333333");

    const auto draw_box = [&](std::vector<double> v, double xc, const std::string& color) {
        if (v.empty()) return;
        std::sort(v.begin(), v.end());
        const double q1 = quantile_type7(v, 0.25), q2 = quantile_type7(v, 0.5), q3 = quantile_type7(v, 0.75);
        const double lo = v.front(), hi_v = v.back();
        const double bw = 22.0;
        line(s, xc, y_of(lo), xc, y_of(q1), color, 1.2);
        line(s, xc, y_of(q3), xc, y_of(hi_v), color, 1.2);
        rect(s, xc - bw / 2.0, y_of(q3), bw, std::max(y_of(q1) - y_of(q3), 0.5), "none", color);
        line(s, xc - bw / 2.0, y_of(q2), xc + bw / 2.0, y_of(q2), color, 2.0);
    };

    const double group_w = plot_w / std::max<double>(1.0, static_cast<double>(sizes.size()));
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double xc = left + group_w * (static_cast<double>(i) + 0.5);
        draw_box(pooled[sizes[i]], xc - 15.0, "#1f5fa8");
        draw_box(standard[sizes[i]], xc + 15.0, "#d2691e");
        text(s, xc, top + plot_h + 16.0, std::to_string(sizes[i]), 11);
    }
    text(s, left + 60.0, top - 6.0, "pooled", 11, "start");
    circle(s, left + 50.0, top - 10.0, 4.0, "#1f5fa8");
    text(s, left + 140.0, top - 6.0, "standard", 11, "start");
    circle(s, left + 130.0, top - 10.0, 4.0, "#d2691e");
    text(s, left + plot_w / 2.0, height - 8.0, "respondents per municipality", 11);
    s << "</svg>\n";
    return s.str();
}

std::string render_hyper_summary_svg(const std::string& title,
                                     const std::vector<HyperSummaryRow>& rows) {
    const double left = 60.0, right = 20.0, top = 40.0, bottom = 50.0;
    const double width = std::max<double>(420.0, left + right + 70.0 * static_cast<double>(rows.size()));
    const double height = 340.0;
    const double plot_w = width - left - right, plot_h = height - top - bottom;

    double lo = 1e300, hi = -1e300;
    for (const auto& r : rows) {
        lo = std::min(lo, r.q025);
        hi = std::max(hi, r.q975);
    }
    if (!(hi > lo)) {
        hi = lo + 1.0;
        lo -= 1.0;
    }
    const double pad = 0.08 * (hi - lo);
    lo -= pad;
    hi += pad;
    const auto y_of = [&](double v) { return top + plot_h * (1.0 - (v - lo) / (hi - lo)); };

    std::ostringstream s;
    svg_open(s, width, height, "posterior means with 95% intervals");
    text(s, width / 2.0, 22.0, title, 13);
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = lo + (hi - lo) * tick / 4.0;
        line(s, left, y_of(v), left + plot_w, y_of(v), "#dddddd");
        char lab[32];
        std::snprintf(lab, sizeof(lab), "%.3g", v);
        text(s, left - 6.0, y_of(v) + 4.0, lab, 10, "end");
    }
    line(s, left, top, left, top + plot_h, "#333333");
    line(s, left, top + plot_h, left + plot_w, top + plot_h, "#333333");

    const double step = plot_w / std::max<double>(1.0, static_cast<double>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double x = left + step * (static_cast<double>(i) + 0.5);
        line(s, x, y_of(rows[i].q025), x, y_of(rows[i].q975), "#9e9e9e", 1.6);
        circle(s, x, y_of(rows[i].mean), 3.2, "#1f5fa8");
        text(s, x, top + plot_h + 16.0, rows[i].group, 10);
    }
    s << "</svg>\n";
    return s.str();
}

} // namespace nsum
