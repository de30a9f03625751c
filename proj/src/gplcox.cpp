#include "rankhaz/gplcox.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace rankhaz {

namespace {

constexpr std::int64_t kZetaGuard = (std::int64_t{1} << 62);

// log(1 + e^x) without overflow
double softplus(double x) {
    if (x > 35.0) return x;
    if (x < -35.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

struct LogTheta {
    double log_theta;
    double log_1m_theta;
    bool clamped;
};

LogTheta stable_log_theta(double eta, double eps) {
    LogTheta out{-softplus(-eta), -softplus(eta), false};
    const double log_eps = std::log(eps);
    if (out.log_theta < log_eps) {
        out.log_theta = log_eps;
        out.log_1m_theta = std::log1p(-eps);
        out.clamped = true;
    } else if (out.log_1m_theta < log_eps) {
        out.log_1m_theta = log_eps;
        out.log_theta = std::log1p(-eps);
        out.clamped = true;
    }
    return out;
}

}  // namespace

double gpl_loglik_offset(const Eigen::VectorXd& beta, const RiskStructure& risk,
                         const Eigen::MatrixXd& X, const Eigen::VectorXd& offset) {
    Eigen::VectorXd eta = X * beta;
    if (offset.size()) {
        if (offset.size() != eta.size())
            throw ValidationError("offset dimension mismatch");
        eta += offset;
    }
    if (!eta.allFinite())
        throw NonConvergenceError("non-finite linear predictor in gpl_loglik");

    const int n = risk.n;
    const int R = risk.num_event_times();
    constexpr double eps = 1e-12;
    Eigen::VectorXd lt(n), l1t(n);
    for (int i = 0; i < n; ++i) {
        const LogTheta v = stable_log_theta(eta[i], eps);
        lt[i] = v.log_theta;
        l1t[i] = v.log_1m_theta;
    }

    double value = 0.0;
    for (int idx : risk.event_index) value += lt[idx] - l1t[idx];

    double s = 0.0;  // suffix sum of log(1-theta) over the current risk set
    int k = n - 1;
    for (int r = R - 1; r >= 0; --r) {
        while (k >= risk.risk_start[r]) s += l1t[risk.order[k--]];
        value += s - std::log(-std::expm1(s));
    }
    return value;
}

double gpl_loglik(const Eigen::VectorXd& beta, const RiskStructure& risk,
                  const Eigen::MatrixXd& X) {
    return gpl_loglik_offset(beta, risk, X, Eigen::VectorXd());
}

GplChain::GplChain(const SurvivalDataset& ds, const RiskStructure& risk,
                   const GPLCoxConfig& cfg)
    : risk_(risk), X_(ds.design_matrix()), cfg_(cfg) {
    if (!ds.has_intercept)
        throw ValidationError("GPL-Cox requires the intercept column; call with_intercept");
    if (!(cfg_.theta_eps > 0.0) || cfg_.theta_eps >= 0.5)
        throw ValidationError("theta_eps must lie in (0, 0.5)");
    validate_mcmc(cfg_.mcmc);
    prior_ = resolve_prior(cfg_.mcmc, static_cast<int>(X_.cols()));

    const int n = risk_.n;
    for (int i = 0; i < n; ++i)
        if (risk_.is_active(i)) active_.push_back(i);

    beta_ = prior_.b0;
    xb_.setZero(n);
    offset_.setZero(n);
    eta_.setZero(n);
    log_theta_.setZero(n);
    log_1m_theta_.setZero(n);
    z_.assign(risk_.num_event_times(), 1);
    zeta_.assign(n, 0);
    omega_.setZero(n);
    kappa_.setZero(n);
}

void GplChain::refresh_theta() {
    xb_.noalias() = X_ * beta_;
    eta_ = xb_ + offset_;
    for (int i : active_) {
        const LogTheta v = stable_log_theta(eta_[i], cfg_.theta_eps);
        log_theta_[i] = v.log_theta;
        log_1m_theta_[i] = v.log_1m_theta;
        if (v.clamped) ++clamp_count_;
    }
}

void GplChain::init(RngStream& rng) {
    beta_ = prior_.b0;
    refresh_theta();
    update_z(rng);
}

void GplChain::set_subject_offset(const Eigen::VectorXd& offset) {
    if (offset.size() != offset_.size()) throw ValidationError("offset dimension mismatch");
    offset_ = offset;
    eta_ = xb_ + offset_;
    for (int i : active_) {
        const LogTheta v = stable_log_theta(eta_[i], cfg_.theta_eps);
        log_theta_[i] = v.log_theta;
        log_1m_theta_[i] = v.log_1m_theta;
        if (v.clamped) ++clamp_count_;
    }
}

void GplChain::update_z(RngStream& rng) {
    const int R = risk_.num_event_times();
    // S_r = sum over R_r of log(1-theta_j); success probability 1 - e^{S_r}
    std::vector<double> srs(R);
    {
        double s = 0.0;
        int k = risk_.n - 1;
        for (int r = R - 1; r >= 0; --r) {
            while (k >= risk_.risk_start[r]) s += log_1m_theta_[risk_.order[k--]];
            srs[r] = s;
        }
    }
    for (int r = 0; r < R; ++r) z_[r] = sample_geometric_logq(srs[r], rng);

    std::int64_t acc = 0;
    std::vector<std::int64_t> zpref(R);
    for (int r = 0; r < R; ++r) {
        if (acc > kZetaGuard - z_[r])
            throw NonConvergenceError("zeta accumulation overflows 64-bit range");
        acc += z_[r];
        zpref[r] = acc;
    }
    for (int i : active_) {
        zeta_[i] = zpref[risk_.prefix_count[i] - 1];
        kappa_[i] = static_cast<double>(risk_.event_flag[i]) -
                    static_cast<double>(zeta_[i]) / 2.0;
    }
}

void GplChain::update_omega(RngStream& rng) {
    // zeta_i >= 1 for every active subject; omega stays pinned at 0 otherwise.
    for (int i : active_)
        omega_[i] = sample_polya_gamma(static_cast<double>(zeta_[i]), eta_[i], rng,
                                       cfg_.mcmc.pg);
}

void GplChain::update_beta(RngStream& rng) {
    Eigen::MatrixXd B = prior_.V0_inv;
    Eigen::VectorXd g = prior_.V0_inv_b0;
    for (int i : active_) {
        B.selfadjointView<Eigen::Lower>().rankUpdate(X_.row(i).transpose(), omega_[i]);
        g.noalias() += X_.row(i).transpose() * (kappa_[i] - omega_[i] * offset_[i]);
    }
    PrecisionGaussian gauss{std::move(g),
                            Eigen::MatrixXd(B.selfadjointView<Eigen::Lower>())};
    beta_ = sample_mvn_precision(gauss, rng);
    refresh_theta();
}

double GplChain::loglik() const { return gpl_loglik_offset(beta_, risk_, X_, offset_); }

PosteriorDraws run_gpl_gibbs(const SurvivalDataset& ds, const RiskStructure& risk,
                             const GPLCoxConfig& cfg) {
    GplChain chain(ds, risk, cfg);
    RngStream rng(cfg.mcmc.seed, cfg.mcmc.stream_id);
    const auto start = std::chrono::steady_clock::now();
    chain.init(rng);

    const int n_retained = (cfg.mcmc.n_iter - cfg.mcmc.n_burnin + cfg.mcmc.thin - 1) / cfg.mcmc.thin;
    PosteriorDraws out;
    out.param_names = ds.covariate_names;
    out.param_kinds.assign(ds.p, ParamKind::Coefficient);
    if (ds.has_intercept) out.param_kinds[0] = ParamKind::Intercept;
    out.draws.resize(n_retained, ds.p);
    out.loglik.resize(n_retained);
    out.n_iter = cfg.mcmc.n_iter;
    out.n_burnin = cfg.mcmc.n_burnin;
    out.thin = cfg.mcmc.thin;
    out.seed = cfg.mcmc.seed;
    out.stream_id = cfg.mcmc.stream_id;

    int kept = 0;
    int consecutive = 0;
    for (int iter = 0; iter < cfg.mcmc.n_iter; ++iter) {
        try {
            chain.update_z(rng);
            chain.update_omega(rng);
            chain.update_beta(rng);
            consecutive = 0;
        } catch (const NonConvergenceError& e) {
            ++out.divergence_count;
            if (++consecutive >= cfg.mcmc.max_consecutive_divergences)
                throw NonConvergenceError(std::string("GPL-Cox chain aborted after ") +
                                          std::to_string(consecutive) +
                                          " consecutive divergent iterations: " + e.what());
        }
        if (iter >= cfg.mcmc.n_burnin && (iter - cfg.mcmc.n_burnin) % cfg.mcmc.thin == 0) {
            out.draws.row(kept) = chain.beta().transpose();
            out.loglik[kept] = chain.loglik();
            ++kept;
        }
    }
    out.clamp_count = chain.clamp_count();
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace rankhaz
