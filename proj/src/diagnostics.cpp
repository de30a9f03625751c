#include "rankhaz/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace rankhaz {

namespace {

// Type-7 quantile (linear interpolation between order statistics).
double quantile(std::vector<double> x, double q) {
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * q;
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace

double ess(const Eigen::VectorXd& chain) {
    const int n = static_cast<int>(chain.size());
    if (n < 10) throw ValidationError("ess requires a chain of length >= 10");
    const double mean = chain.mean();
    Eigen::VectorXd centered = chain.array() - mean;
    const double gamma0 = centered.squaredNorm() / n;
    // constant chain up to accumulation noise
    if (gamma0 <= 1e-28 * (1.0 + mean * mean)) return static_cast<double>(n);

    auto autocov = [&](int lag) {
        double acc = 0.0;
        for (int t = 0; t + lag < n; ++t) acc += centered[t] * centered[t + lag];
        return acc / n;
    };

    // Geyer initial monotone positive sequence over autocovariance pairs.
    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (int m = 0; 2 * m + 1 < n; ++m) {
        double pair = autocov(2 * m) + autocov(2 * m + 1);
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair / gamma0;
    }
    if (tau < 1.0) tau = 1.0;  // cap ESS at N
    return static_cast<double>(n) / tau;
}

DicResult dic(const Eigen::VectorXd& loglik_draws, double loglik_at_mean) {
    if (loglik_draws.size() == 0 || !loglik_draws.allFinite() || !std::isfinite(loglik_at_mean))
        throw ValidationError("dic requires finite log-likelihood inputs");
    DicResult out;
    out.mean_deviance = -2.0 * loglik_draws.mean();
    out.deviance_at_mean = -2.0 * loglik_at_mean;
    out.p_d = out.mean_deviance - out.deviance_at_mean;
    out.dic = out.deviance_at_mean + 2.0 * out.p_d;
    return out;
}

PosteriorSummary summarize(const PosteriorDraws& draws) {
    const int n = draws.n_retained();
    if (n < 2) throw ValidationError("summarize requires at least 2 retained draws");

    PosteriorSummary out;
    out.n_retained = n;
    out.wall_seconds = draws.wall_seconds;
    out.clamp_count = draws.clamp_count;
    out.divergence_count = draws.divergence_count;

    std::vector<double> beta_ess_per_sec;
    for (int j = 0; j < draws.n_params(); ++j) {
        ParamSummary ps;
        ps.name = draws.param_names[j];
        ps.kind = draws.param_kinds[j];
        const Eigen::VectorXd col = draws.draws.col(j);
        ps.mean = col.mean();
        ps.sd = std::sqrt((col.array() - ps.mean).square().sum() / (n - 1));
        std::vector<double> vals(col.data(), col.data() + n);
        ps.q025 = quantile(vals, 0.025);
        ps.q975 = quantile(vals, 0.975);
        ps.ess = ess(col);
        if (ps.kind == ParamKind::Coefficient) {
            ps.has_hr = true;
            ps.hr = std::exp(ps.mean);
            ps.hr_low = std::exp(ps.q025);
            ps.hr_high = std::exp(ps.q975);
        }
        if (ps.kind == ParamKind::Coefficient || ps.kind == ParamKind::Intercept)
            if (draws.wall_seconds > 0.0)
                beta_ess_per_sec.push_back(ps.ess / draws.wall_seconds);
        out.params.push_back(std::move(ps));
    }
    if (!beta_ess_per_sec.empty()) {
        std::sort(beta_ess_per_sec.begin(), beta_ess_per_sec.end());
        const size_t m = beta_ess_per_sec.size();
        out.median_ess_per_sec_beta = (m % 2 == 1)
            ? beta_ess_per_sec[m / 2]
            : 0.5 * (beta_ess_per_sec[m / 2 - 1] + beta_ess_per_sec[m / 2]);
    }
    return out;
}

std::string format_summary_table(const PosteriorSummary& summary) {
    std::ostringstream os;
    os << std::left << std::setw(18) << "parameter" << std::right << std::setw(10) << "mean"
       << std::setw(10) << "sd" << std::setw(10) << "2.5%" << std::setw(10) << "97.5%"
       << std::setw(24) << "HR [95% CI]" << std::setw(10) << "ESS" << '\n';
    for (const auto& p : summary.params) {
        os << std::left << std::setw(18) << p.name << std::right << std::fixed
           << std::setprecision(3) << std::setw(10) << p.mean << std::setw(10) << p.sd
           << std::setw(10) << p.q025 << std::setw(10) << p.q975;
        if (p.has_hr) {
            std::ostringstream hr;
            hr << std::fixed << std::setprecision(2) << p.hr << " [" << p.hr_low << ", "
               << p.hr_high << "]";
            os << std::setw(24) << hr.str();
        } else {
            os << std::setw(24) << "-";
        }
        os << std::setprecision(0) << std::setw(10) << p.ess << '\n';
        os.unsetf(std::ios_base::fixed);
    }
    os << "retained draws: " << summary.n_retained << "  wall seconds: " << std::fixed
       << std::setprecision(2) << summary.wall_seconds << "  median ESS/sec (beta): "
       << std::setprecision(4) << summary.median_ess_per_sec_beta << '\n';
    return os.str();
}

std::string summary_to_json(const PosteriorSummary& summary) {
    nlohmann::json j;
    j["n_retained"] = summary.n_retained;
    j["wall_seconds"] = summary.wall_seconds;
    j["median_ess_per_sec_beta"] = summary.median_ess_per_sec_beta;
    j["clamp_count"] = summary.clamp_count;
    j["divergence_count"] = summary.divergence_count;
    j["parameters"] = nlohmann::json::array();
    for (const auto& p : summary.params) {
        nlohmann::json pj;
        pj["name"] = p.name;
        switch (p.kind) {
            case ParamKind::Intercept: pj["kind"] = "intercept"; break;
            case ParamKind::Coefficient: pj["kind"] = "coefficient"; break;
            case ParamKind::Frailty: pj["kind"] = "frailty"; break;
            case ParamKind::FrailtyVariance: pj["kind"] = "frailty_variance"; break;
        }
        pj["mean"] = p.mean;
        pj["sd"] = p.sd;
        pj["q2.5"] = p.q025;
        pj["q97.5"] = p.q975;
        pj["ess"] = p.ess;
        if (p.has_hr) {
            pj["hr"] = p.hr;
            pj["hr_low"] = p.hr_low;
            pj["hr_high"] = p.hr_high;
        }
        j["parameters"].push_back(pj);
    }
    return j.dump(2);
}

}  // namespace rankhaz
