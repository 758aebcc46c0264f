#include "nsum/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsum/special.hpp"

namespace nsum {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Coordinates beyond this magnitude map to parameter values far outside any
// representable posterior region; the density is treated as a rejection.
constexpr double kCoordLimit = 300.0;

double finish_rejected(std::span<double> grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return kNegInf;
}

} // namespace

std::string ParamLayout::name(std::size_t j) const {
    if (j < K) return "mu_rho." + std::to_string(j);
    if (j < 2 * K) return "sigma2_rho." + std::to_string(j - K);
    if (j < 2 * K + K * M) {
        const std::size_t off = j - 2 * K;
        return "rho." + std::to_string(off / M) + "." + std::to_string(off % M);
    }
    if (j < 3 * K + K * M) return "w." + std::to_string(j - 2 * K - K * M);
    if (j < 3 * K + K * M + R) return "delta." + std::to_string(j - 3 * K - K * M);
    return "sigma_delta";
}

void HyperConfig::validate() const {
    if (!(sigma_mu_rho > 0.0)) throw_domain("sigma_mu_rho must be positive");
    if (!(tau > 0.0)) throw_domain("tau must be positive");
    if (!(sigma_w > 0.0)) throw_domain("sigma_w must be positive");
    if (!(sigma_delta_upper > 0.0)) throw_domain("sigma_delta_upper must be positive");
    if (!std::isfinite(mu_delta_fixed)) throw_domain("mu_delta_fixed must be finite");
}

std::pair<double, double> gamma_from_mean_var(double mu, double var) {
    if (!(mu > 0.0) || !(var > 0.0)) throw_domain("gamma_from_mean_var: mu and var must be positive");
    return {mu * mu / var, mu / var};
}

double nb_log_pmf(long long y, double mu, double w) {
    if (y < 0) throw_domain("nb_log_pmf: y must be >= 0");
    if (!(mu > 0.0) || !(w > 0.0)) throw_domain("nb_log_pmf: mu and w must be positive");
    const double d = std::log(mu) - std::log(w);
    const double s = math::log1pexp(d); // log(1 + mu/w)
    double lp = math::lgamma(static_cast<double>(y) + w) - math::lgamma(w) -
                math::lgamma(static_cast<double>(y) + 1.0) - w * s;
    if (y > 0) lp += static_cast<double>(y) * (d - s);
    return lp;
}

PooledModel::PooledModel(const ARDataset& data, HyperConfig hyper)
    : PooledModel(std::vector<long long>(data.counts),
                  ModelDims{data.R(), data.K(), data.M(), data.muni_of_respondent}, hyper) {
    data.validate();
}

PooledModel::PooledModel(std::vector<long long> counts, ModelDims dims, HyperConfig hyper)
    : hyper_(hyper) {
    hyper_.validate();
    if (dims.K < 1 || dims.M < 1) throw_domain("model needs K >= 1 and M >= 1");
    if (dims.muni_of_respondent.size() != dims.R) throw_domain("muni_of_respondent length != R");
    if (counts.size() != dims.R * dims.K) throw_domain("counts length != R*K");
    for (int m : dims.muni_of_respondent)
        if (m < 0 || m >= static_cast<int>(dims.M)) throw_domain("respondent bound to invalid municipality");
    for (long long c : counts)
        if (c < 0) throw_domain("counts must be non-negative");

    layout_ = ParamLayout{dims.K, dims.M, dims.R};
    muni_ = std::move(dims.muni_of_respondent);
    y_.assign(counts.begin(), counts.end());
    build_tables();
}

void PooledModel::build_tables() {
    const std::size_t R = layout_.R, K = layout_.K;
    lgamma_y1_.resize(R * K);
    yidx_.resize(R * K);
    uy_off_.assign(K + 1, 0);
    uy_.clear();
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<std::int64_t> vals;
        vals.reserve(R);
        for (std::size_t i = 0; i < R; ++i) vals.push_back(y_[i * K + k]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        uy_off_[k + 1] = uy_off_[k] + vals.size();
        uy_.insert(uy_.end(), vals.begin(), vals.end());
        for (std::size_t i = 0; i < R; ++i) {
            const auto it = std::lower_bound(vals.begin(), vals.end(), y_[i * K + k]);
            yidx_[i * K + k] = static_cast<std::int32_t>(uy_off_[k] + (it - vals.begin()));
        }
    }
    for (std::size_t c = 0; c < R * K; ++c)
        lgamma_y1_[c] = math::lgamma(static_cast<double>(y_[c]) + 1.0);
}

double PooledModel::logp(std::span<const double> theta) const {
    thread_local std::vector<double> grad;
    grad.resize(theta.size());
    return logp_grad(theta, grad);
}

double PooledModel::logp_grad(std::span<const double> theta, std::span<double> grad) const {
    const std::size_t K = layout_.K, M = layout_.M, R = layout_.R, D = layout_.dim();
    if (theta.size() != D || grad.size() != D) throw_domain("theta/grad length != model dim");

    for (std::size_t j = 0; j < D; ++j)
        if (!std::isfinite(theta[j]) || std::fabs(theta[j]) > kCoordLimit) return finish_rejected(grad);
    std::fill(grad.begin(), grad.end(), 0.0);

    thread_local std::vector<double> w_c, inv_w, rho_c, gw_acc, tab_lg, tab_dg;
    w_c.resize(K);
    inv_w.resize(K);
    gw_acc.assign(K, 0.0);
    rho_c.resize(K * M);
    tab_lg.resize(uy_.size());
    tab_dg.resize(uy_.size());

    const double* th = theta.data();
    for (std::size_t k = 0; k < K; ++k) {
        w_c[k] = std::exp(th[layout_.w(k)]);
        inv_w[k] = 1.0 / w_c[k];
    }
    for (std::size_t j = 0; j < K * M; ++j) rho_c[j] = std::exp(th[2 * K + j]);

    // Per-group tables over the distinct observed counts:
    //   tab_lg = lgamma(y+w) - lgamma(w),  tab_dg = digamma(y+w) - digamma(w)
    for (std::size_t k = 0; k < K; ++k) {
        const double lgw = math::lgamma(w_c[k]);
        const double dgw = math::digamma(w_c[k]);
        for (std::size_t u = uy_off_[k]; u < uy_off_[k + 1]; ++u) {
            const double yw = static_cast<double>(uy_[u]) + w_c[k];
            tab_lg[u] = math::lgamma(yw) - lgw;
            tab_dg[u] = math::digamma(yw) - dgw;
        }
    }

    double lp = 0.0;

    // Negative Binomial likelihood; everything stays in log space so large
    // |delta - rho| never overflows.
    const double* delta = th + (3 * K + K * M);
    for (std::size_t i = 0; i < R; ++i) {
        const double di = delta[i];
        const std::size_t m = static_cast<std::size_t>(muni_[i]);
        const std::int64_t* yrow = y_.data() + i * K;
        const double* lg1row = lgamma_y1_.data() + i * K;
        const std::int32_t* idxrow = yidx_.data() + i * K;
        double gdelta = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double wk = w_c[k];
            const double d = di - rho_c[k * M + m] - th[layout_.w(k)]; // log(mu/w)
            const double s = math::log1pexp(d);                       // log(1 + mu/w)
            const double q = std::exp(-s);                            // w/(w+mu)
            const double p = 1.0 - q;                                 // mu/(w+mu)
            const double yv = static_cast<double>(yrow[k]);
            lp += tab_lg[idxrow[k]] - lg1row[k] - wk * s;
            if (yrow[k] != 0) lp += yv * (d - s);
            const double gd = yv - (wk + yv) * p;
            gdelta += gd;
            grad[2 * K + k * M + m] -= gd; // likelihood part of d/d rho, times rho later
            gw_acc[k] += tab_dg[idxrow[k]] + 1.0 - s - (wk + yv) * q * inv_w[k];
        }
        grad[layout_.delta(i)] = gdelta;
    }

    // Hierarchical Gamma prior on rho plus the hyperpriors, with the exp
    // transform Jacobians folded in.
    const double s_mu2 = hyper_.sigma_mu_rho * hyper_.sigma_mu_rho;
    const double tau2 = hyper_.tau * hyper_.tau;
    const double s_w2 = hyper_.sigma_w * hyper_.sigma_w;
    for (std::size_t k = 0; k < K; ++k) {
        const double mu_rho = std::exp(th[layout_.mu_rho(k)]);
        const double var_rho = std::exp(th[layout_.sigma2_rho(k)]);
        const double alpha = mu_rho * mu_rho / var_rho;
        const double beta = mu_rho / var_rho;
        const double log_beta = th[layout_.mu_rho(k)] - th[layout_.sigma2_rho(k)];
        const double lg_alpha = math::lgamma(alpha);
        const double psi_alpha = math::digamma(alpha);

        double sum_r = 0.0, sum_rho = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            const std::size_t j = 2 * K + k * M + m;
            const double r = th[j], rc = rho_c[k * M + m];
            lp += alpha * log_beta + (alpha - 1.0) * r - beta * rc - lg_alpha + r;
            sum_r += r;
            sum_rho += rc;
            grad[j] = grad[j] * rc + alpha - beta * rc;
        }
        const double Md = static_cast<double>(M);
        const double T = Md * log_beta + sum_r - Md * psi_alpha;
        const double P = Md * mu_rho - sum_rho; // M*alpha/beta - sum(rho)

        lp += math::half_normal_lpdf(mu_rho, hyper_.sigma_mu_rho) + th[layout_.mu_rho(k)];
        lp += math::half_normal_lpdf(var_rho, hyper_.tau) + th[layout_.sigma2_rho(k)];
        lp += math::half_normal_lpdf(w_c[k], hyper_.sigma_w) + th[layout_.w(k)];

        grad[layout_.mu_rho(k)] = 2.0 * alpha * T + beta * P - mu_rho * mu_rho / s_mu2 + 1.0;
        grad[layout_.sigma2_rho(k)] = -alpha * T - beta * P - var_rho * var_rho / tau2 + 1.0;
        grad[layout_.w(k)] = w_c[k] * (gw_acc[k] - w_c[k] / s_w2) + 1.0;
    }

    // delta prior and the bounded sigma_delta. The uniform prior's -log(U)
    // cancels the +log(U) in the logistic Jacobian; both written for clarity.
    const double t = th[layout_.sigma_delta()];
    const double log_s = -math::log1pexp(-t);
    const double log_1ms = -math::log1pexp(t);
    const double log_u = std::log(hyper_.sigma_delta_upper);
    const double log_sd = log_u + log_s;
    const double inv_sd2 = std::exp(-2.0 * log_sd);
    if (!std::isfinite(inv_sd2)) return finish_rejected(grad); // sigma_delta underflow

    double ss = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
        const double z = delta[i] - hyper_.mu_delta_fixed;
        ss += z * z;
        grad[layout_.delta(i)] -= z * inv_sd2;
    }
    lp += static_cast<double>(R) * (-0.5 * math::log_2pi - log_sd) - 0.5 * ss * inv_sd2;
    lp += -log_u;                     // Uniform(0, U) prior density
    lp += log_u + log_s + log_1ms;    // Jacobian of t -> U*logistic(t)
    const double s_t = std::exp(log_s);
    const double one_minus_s = std::exp(log_1ms);
    grad[layout_.sigma_delta()] = (ss * inv_sd2 - static_cast<double>(R)) * one_minus_s + (1.0 - 2.0 * s_t);

    if (!std::isfinite(lp)) return finish_rejected(grad);
    for (std::size_t j = 0; j < D; ++j)
        if (std::isnan(grad[j])) return finish_rejected(grad);
    return lp;
}

void PooledModel::constrain(std::span<const double> theta, std::span<double> out) const {
    const std::size_t K = layout_.K, M = layout_.M, R = layout_.R;
    if (theta.size() != layout_.dim() || out.size() != layout_.dim()) throw_domain("constrain: bad length");
    const std::size_t n_pos = 2 * K + K * M;
    for (std::size_t j = 0; j < n_pos; ++j) out[j] = std::exp(theta[j]);
    for (std::size_t k = 0; k < K; ++k) out[layout_.w(k)] = std::exp(theta[layout_.w(k)]);
    for (std::size_t i = 0; i < R; ++i) out[layout_.delta(i)] = theta[layout_.delta(i)];
    const double t = theta[layout_.sigma_delta()];
    out[layout_.sigma_delta()] = hyper_.sigma_delta_upper * std::exp(-math::log1pexp(-t));
}

std::vector<double> PooledModel::constrain(std::span<const double> theta) const {
    std::vector<double> out(layout_.dim());
    constrain(theta, out);
    return out;
}

ConstrainedParams PooledModel::constrain_named(std::span<const double> theta) const {
    const auto flat = constrain(theta);
    ConstrainedParams p;
    const std::size_t K = layout_.K, M = layout_.M, R = layout_.R;
    p.mu_rho.assign(flat.begin(), flat.begin() + K);
    p.sigma2_rho.assign(flat.begin() + K, flat.begin() + 2 * K);
    p.rho.assign(flat.begin() + 2 * K, flat.begin() + 2 * K + K * M);
    p.w.assign(flat.begin() + 2 * K + K * M, flat.begin() + 3 * K + K * M);
    p.delta.assign(flat.begin() + 3 * K + K * M, flat.begin() + 3 * K + K * M + R);
    p.sigma_delta = flat[layout_.sigma_delta()];
    return p;
}

std::vector<double> PooledModel::unconstrain(const ConstrainedParams& p) const {
    const std::size_t K = layout_.K, M = layout_.M, R = layout_.R;
    if (p.mu_rho.size() != K || p.sigma2_rho.size() != K || p.rho.size() != K * M ||
        p.w.size() != K || p.delta.size() != R)
        throw_domain("unconstrain: field lengths do not match layout");
    std::vector<double> theta(layout_.dim());
    const auto log_pos = [](double x, const char* what) {
        if (!(x > 0.0)) throw_domain(std::string("unconstrain: ") + what + " must be positive");
        return std::log(x);
    };
    for (std::size_t k = 0; k < K; ++k) {
        theta[layout_.mu_rho(k)] = log_pos(p.mu_rho[k], "mu_rho");
        theta[layout_.sigma2_rho(k)] = log_pos(p.sigma2_rho[k], "sigma2_rho");
        theta[layout_.w(k)] = log_pos(p.w[k], "w");
    }
    for (std::size_t j = 0; j < K * M; ++j) theta[2 * K + j] = log_pos(p.rho[j], "rho");
    for (std::size_t i = 0; i < R; ++i) theta[layout_.delta(i)] = p.delta[i];
    const double u = hyper_.sigma_delta_upper;
    if (!(p.sigma_delta > 0.0) || !(p.sigma_delta < u))
        throw_domain("unconstrain: sigma_delta must lie in (0, upper)");
    theta[layout_.sigma_delta()] = std::log(p.sigma_delta / (u - p.sigma_delta));
    return theta;
}

} // namespace nsum
