#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rankhaz/common.hpp"
#include "rankhaz/randkit.hpp"

namespace rankhaz {

enum class ParamKind { Intercept, Coefficient, Frailty, FrailtyVariance };

// Retained posterior draws plus the bookkeeping needed downstream.
struct PosteriorDraws {
    std::vector<std::string> param_names;
    std::vector<ParamKind> param_kinds;
    Eigen::MatrixXd draws;   // n_retained x n_params
    Eigen::VectorXd loglik;  // model log-likelihood of each retained draw
    int n_iter = 0;
    int n_burnin = 0;
    int thin = 1;
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    double wall_seconds = 0.0;
    long clamp_count = 0;
    long divergence_count = 0;

    int n_retained() const { return static_cast<int>(draws.rows()); }
    int n_params() const { return static_cast<int>(draws.cols()); }
    Eigen::VectorXd posterior_mean() const { return draws.colwise().mean().transpose(); }
    // Absolute 1-based sweep index of retained draw k.
    int iteration_of(int k) const { return n_burnin + 1 + k * thin; }
};

// Settings shared by the PL and GPL samplers.
struct McmcConfig {
    Eigen::VectorXd prior_mean;  // empty: zeros(p)
    Eigen::MatrixXd prior_cov;   // empty: prior_sd^2 * I
    double prior_sd = 10.0;
    int n_iter = 3000;
    int n_burnin = 1000;
    int thin = 1;
    std::uint64_t seed = 1;
    std::uint64_t stream_id = 0;
    int max_consecutive_divergences = 10;
    PolyaGammaOptions pg;
};

struct ResolvedPrior {
    Eigen::VectorXd b0;
    Eigen::MatrixXd V0;
    Eigen::MatrixXd V0_inv;
    Eigen::VectorXd V0_inv_b0;
};

// Fills defaults, checks dimensions and positive definiteness.
ResolvedPrior resolve_prior(const McmcConfig& cfg, int p);

inline void validate_mcmc(const McmcConfig& cfg) {
    if (cfg.n_iter <= 0 || cfg.n_burnin < 0 || cfg.n_burnin >= cfg.n_iter)
        throw ValidationError("require 0 <= n_burnin < n_iter");
    if (cfg.thin <= 0) throw ValidationError("thin must be positive");
}

}  // namespace rankhaz
