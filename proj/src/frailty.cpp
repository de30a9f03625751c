#include "rankhaz/frailty.hpp"

#include <chrono>
#include <cmath>

namespace rankhaz {

Eigen::VectorXd update_frailty(const Eigen::VectorXd& omega, const Eigen::VectorXd& kappa,
                               const Eigen::VectorXd& xbeta, const Eigen::VectorXd& offset,
                               const std::vector<int>& active_subjects,
                               const std::vector<int>& cluster_of, int n_clusters,
                               double sigma2_u, RngStream& rng) {
    if (!(sigma2_u > 0.0)) throw ValidationError("sigma2_u must be positive");
    Eigen::VectorXd prec = Eigen::VectorXd::Zero(n_clusters);
    Eigen::VectorXd num = Eigen::VectorXd::Zero(n_clusters);
    for (int i : active_subjects) {
        const int g = cluster_of[i];
        prec[g] += omega[i];
        num[g] += kappa[i] - omega[i] * (xbeta[i] + offset[i]);
    }
    Eigen::VectorXd u(n_clusters);
    for (int g = 0; g < n_clusters; ++g) {
        const double total_prec = prec[g] + 1.0 / sigma2_u;
        u[g] = num[g] / total_prec + rng.normal() / std::sqrt(total_prec);
    }
    return u;
}

double update_frailty_variance(const Eigen::VectorXd& u, const FrailtyConfig& cfg,
                               RngStream& rng) {
    if (!(cfg.variance_prior_shape > 0.0) || !(cfg.variance_prior_rate > 0.0))
        throw ValidationError("frailty variance prior hyperparameters must be positive");
    const double shape = cfg.variance_prior_shape + 0.5 * static_cast<double>(u.size());
    const double scale = cfg.variance_prior_rate + 0.5 * u.squaredNorm();
    return 1.0 / sample_gamma(shape, scale, rng);
}

namespace {

std::vector<int> cluster_map(const SurvivalDataset& ds) {
    if (!ds.has_clusters())
        throw ValidationError("frailty model requires cluster labels on every record");
    std::vector<int> out(ds.n());
    for (int i = 0; i < ds.n(); ++i) out[i] = *ds.records[i].cluster;
    return out;
}

// Shared sweep driver; BetaOffset yields the per-subject beta-update offset
// (log(zeta/delta) for PL-Cox, zeros for GPL-Cox) and Recentre applies the
// identifiability shift where the model allows it.
template <class Chain, class BetaOffset, class Recentre>
PosteriorDraws run_frailty_impl(const SurvivalDataset& ds, Chain& chain,
                                const McmcConfig& mcmc, const FrailtyConfig& frailty,
                                BetaOffset beta_offset, Recentre recentre) {
    const std::vector<int> cluster_of = cluster_map(ds);
    const int G = ds.n_clusters();
    const int n = ds.n();

    RngStream rng(mcmc.seed, mcmc.stream_id);
    const auto start = std::chrono::steady_clock::now();

    Eigen::VectorXd u = Eigen::VectorXd::Zero(G);
    Eigen::VectorXd u_subject = Eigen::VectorXd::Zero(n);
    double sigma2_u = 1.0;
    chain.init(rng);

    const int n_retained = (mcmc.n_iter - mcmc.n_burnin + mcmc.thin - 1) / mcmc.thin;
    PosteriorDraws out;
    out.param_names = ds.covariate_names;
    out.param_kinds.assign(ds.p, ParamKind::Coefficient);
    if (ds.has_intercept) out.param_kinds[0] = ParamKind::Intercept;
    for (int g = 0; g < G; ++g) {
        out.param_names.push_back("u[" + std::to_string(g + 1) + "]");
        out.param_kinds.push_back(ParamKind::Frailty);
    }
    out.param_names.push_back("sigma2_u");
    out.param_kinds.push_back(ParamKind::FrailtyVariance);
    const int q = ds.p + G + 1;
    out.draws.resize(n_retained, q);
    out.loglik.resize(n_retained);
    out.n_iter = mcmc.n_iter;
    out.n_burnin = mcmc.n_burnin;
    out.thin = mcmc.thin;
    out.seed = mcmc.seed;
    out.stream_id = mcmc.stream_id;

    int kept = 0;
    int consecutive = 0;
    for (int iter = 0; iter < mcmc.n_iter; ++iter) {
        try {
            chain.update_z(rng);
            chain.update_omega(rng);
            chain.update_beta(rng);
            u = update_frailty(chain.omega(), chain.kappa(), chain.xbeta(), beta_offset(),
                               chain.active_subjects(), cluster_of, G, sigma2_u, rng);
            recentre(u);
            for (int i = 0; i < n; ++i) u_subject[i] = u[cluster_of[i]];
            chain.set_subject_offset(u_subject);
            sigma2_u = update_frailty_variance(u, frailty, rng);
            consecutive = 0;
        } catch (const NonConvergenceError& e) {
            ++out.divergence_count;
            if (++consecutive >= mcmc.max_consecutive_divergences)
                throw NonConvergenceError(std::string("frailty chain aborted after ") +
                                          std::to_string(consecutive) +
                                          " consecutive divergent iterations: " + e.what());
        }
        if (iter >= mcmc.n_burnin && (iter - mcmc.n_burnin) % mcmc.thin == 0) {
            out.draws.row(kept).head(ds.p) = chain.beta().transpose();
            out.draws.row(kept).segment(ds.p, G) = u.transpose();
            out.draws(kept, q - 1) = sigma2_u;
            out.loglik[kept] = chain.loglik();
            ++kept;
        }
    }
    out.clamp_count = chain.clamp_count();
    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

}  // namespace

PosteriorDraws run_frailty_gibbs(const SurvivalDataset& ds, const RiskStructure& risk,
                                 const PLCoxConfig& cfg, const FrailtyConfig& frailty) {
    PlChain chain(ds, risk, cfg);
    return run_frailty_impl(
        ds, chain, cfg.mcmc, frailty,
        [&]() -> const Eigen::VectorXd& { return chain.log_zeta_delta(); },
        [&](Eigen::VectorXd& u) {
            const double ubar = u.mean();
            u.array() -= ubar;
            chain.shift_intercept(ubar);
        });
}

PosteriorDraws run_frailty_gibbs(const SurvivalDataset& ds, const RiskStructure& risk,
                                 const GPLCoxConfig& cfg, const FrailtyConfig& frailty) {
    GplChain chain(ds, risk, cfg);
    const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(ds.n());
    return run_frailty_impl(
        ds, chain, cfg.mcmc, frailty, [&]() -> const Eigen::VectorXd& { return zeros; },
        [](Eigen::VectorXd&) {});
}

}  // namespace rankhaz
