#include "rankhaz/plcox.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace rankhaz {

ResolvedPrior resolve_prior(const McmcConfig& cfg, int p) {
    ResolvedPrior out;
    out.b0 = cfg.prior_mean.size() ? cfg.prior_mean : Eigen::VectorXd::Zero(p);
    if (out.b0.size() != p) throw ValidationError("prior mean dimension mismatch");
    if (cfg.prior_cov.size()) {
        out.V0 = cfg.prior_cov;
    } else {
        if (!(cfg.prior_sd > 0.0)) throw ValidationError("prior_sd must be positive");
        out.V0 = cfg.prior_sd * cfg.prior_sd * Eigen::MatrixXd::Identity(p, p);
    }
    if (out.V0.rows() != p || out.V0.cols() != p)
        throw ValidationError("prior covariance dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(out.V0);
    if (llt.info() != Eigen::Success)
        throw ValidationError("prior covariance is not positive definite");
    out.V0_inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
    out.V0_inv_b0 = out.V0_inv * out.b0;
    return out;
}

double pl_loglik_offset(const Eigen::VectorXd& beta, const RiskStructure& risk,
                        const Eigen::MatrixXd& X, const Eigen::VectorXd& offset) {
    Eigen::VectorXd eta = X * beta;
    if (offset.size()) {
        if (offset.size() != eta.size())
            throw ValidationError("offset dimension mismatch");
        eta += offset;
    }
    if (!eta.allFinite())
        throw NonConvergenceError("non-finite linear predictor in pl_loglik");

    double value = 0.0;
    const int R = risk.num_event_times();
    for (int idx : risk.event_index) value += eta[idx];

    // Backward streaming log-sum-exp over the nested risk-set suffixes.
    double m = -std::numeric_limits<double>::infinity();
    double s = 0.0;
    int k = risk.n - 1;
    for (int r = R - 1; r >= 0; --r) {
        while (k >= risk.risk_start[r]) {
            const double e = eta[risk.order[k--]];
            if (e > m) {
                s *= std::exp(m - e);
                m = e;
            }
            s += std::exp(e - m);
        }
        value -= risk.tie_counts[r] * (std::log(s) + m);
    }
    return value;
}

double pl_loglik(const Eigen::VectorXd& beta, const RiskStructure& risk,
                 const Eigen::MatrixXd& X) {
    return pl_loglik_offset(beta, risk, X, Eigen::VectorXd());
}

PlChain::PlChain(const SurvivalDataset& ds, const RiskStructure& risk, const PLCoxConfig& cfg)
    : risk_(risk), X_(ds.design_matrix()), cfg_(cfg) {
    if (!ds.has_intercept)
        throw ValidationError("PL-Cox fits require the intercept column; call with_intercept");
    if (!(cfg_.delta > 0.0)) throw ValidationError("delta must be positive");
    validate_mcmc(cfg_.mcmc);
    prior_ = resolve_prior(cfg_.mcmc, static_cast<int>(X_.cols()));

    const int n = risk_.n;
    for (int i = 0; i < n; ++i)
        if (risk_.is_active(i)) active_.push_back(i);

    beta_ = prior_.b0;
    xb_.setZero(n);
    offset_.setZero(n);
    eta_.setZero(n);
    lambda_.setZero(n);
    z_.setZero(risk_.num_event_times());
    zeta_.setZero(n);
    logzd_.setZero(n);
    psi_.setZero(n);
    omega_.setZero(n);
    kappa_.setZero(n);
    for (int i : active_) kappa_[i] = (static_cast<double>(risk_.event_flag[i]) - cfg_.delta) / 2.0;
}

void PlChain::refresh_lambda() {
    xb_.noalias() = X_ * beta_;
    eta_ = xb_ + offset_;
    for (int i : active_) lambda_[i] = std::exp(eta_[i]);
}

void PlChain::init(RngStream& rng) {
    beta_ = prior_.b0;
    refresh_lambda();
    update_z(rng);
}

void PlChain::set_subject_offset(const Eigen::VectorXd& offset) {
    if (offset.size() != offset_.size()) throw ValidationError("offset dimension mismatch");
    offset_ = offset;
    eta_ = xb_ + offset_;
    for (int i : active_) lambda_[i] = std::exp(eta_[i]);
}

void PlChain::shift_intercept(double a) {
    beta_[0] += a;
    refresh_lambda();
}

void PlChain::update_z(RngStream& rng) {
    const int R = risk_.num_event_times();
    // Risk-set rate sums via one backward suffix pass.
    std::vector<double> rate(R);
    {
        double acc = 0.0;
        int k = risk_.n - 1;
        for (int r = R - 1; r >= 0; --r) {
            while (k >= risk_.risk_start[r]) acc += lambda_[risk_.order[k--]];
            rate[r] = acc;
        }
    }
    for (int r = 0; r < R; ++r) {
        if (!std::isfinite(rate[r]) || !(rate[r] > 0.0))
            throw NonConvergenceError("risk-set rate sum overflowed (divergent beta)");
        z_[r] = sample_gamma(static_cast<double>(risk_.tie_counts[r]), rate[r], rng);
    }
    // zeta_i = sum of z_r over event times at or before T_i.
    const double log_delta = std::log(cfg_.delta);
    std::vector<double> zpref(R);
    double acc = 0.0;
    for (int r = 0; r < R; ++r) {
        acc += z_[r];
        zpref[r] = acc;
    }
    for (int i : active_) {
        zeta_[i] = zpref[risk_.prefix_count[i] - 1];
        logzd_[i] = std::log(zeta_[i]) - log_delta;
    }
}

void PlChain::update_omega(RngStream& rng) {
    for (int i : active_) {
        double psi = eta_[i] + logzd_[i];
        if (psi > cfg_.psi_clamp) {
            psi = cfg_.psi_clamp;
            ++clamp_count_;
        } else if (psi < -cfg_.psi_clamp) {
            psi = -cfg_.psi_clamp;
            ++clamp_count_;
        }
        psi_[i] = psi;
        const double shape = static_cast<double>(risk_.event_flag[i]) + cfg_.delta;
        omega_[i] = sample_polya_gamma(shape, psi, rng, cfg_.mcmc.pg);
    }
}

void PlChain::update_beta(RngStream& rng) {
    Eigen::MatrixXd B = prior_.V0_inv;
    Eigen::VectorXd g = prior_.V0_inv_b0;
    for (int i : active_) {
        B.selfadjointView<Eigen::Lower>().rankUpdate(X_.row(i).transpose(), omega_[i]);
        g.noalias() +=
            X_.row(i).transpose() * (kappa_[i] - omega_[i] * (offset_[i] + logzd_[i]));
    }
    PrecisionGaussian gauss{std::move(g),
                            Eigen::MatrixXd(B.selfadjointView<Eigen::Lower>())};
    beta_ = sample_mvn_precision(gauss, rng);
    refresh_lambda();
}

double PlChain::loglik() const { return pl_loglik_offset(beta_, risk_, X_, offset_); }

PosteriorDraws run_pl_gibbs(const SurvivalDataset& ds, const RiskStructure& risk,
                            const PLCoxConfig& cfg) {
    PlChain chain(ds, risk, cfg);
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
                throw NonConvergenceError(std::string("PL-Cox chain aborted after ") +
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
