#pragma once

#include <vector>

#include <Eigen/Core>

#include "rankhaz/draws.hpp"
#include "rankhaz/gplcox.hpp"
#include "rankhaz/plcox.hpp"
#include "rankhaz/survdata.hpp"

namespace rankhaz {

// Inverse-gamma hyperparameters for the shared frailty variance.
struct FrailtyConfig {
    double variance_prior_shape = 0.01;  // a0
    double variance_prior_rate = 0.01;   // b0 (scale of the inverse gamma)
};

// Gaussian full-conditional draw of all cluster effects. Per-subject inputs
// are the current PG weights omega, working responses kappa, linear predictor
// x'beta and the beta-update offset o (log(zeta/delta) under PL-Cox, zero
// under GPL-Cox). Empty clusters fall back to the N(0, sigma2_u) prior.
Eigen::VectorXd update_frailty(const Eigen::VectorXd& omega, const Eigen::VectorXd& kappa,
                               const Eigen::VectorXd& xbeta, const Eigen::VectorXd& offset,
                               const std::vector<int>& active_subjects,
                               const std::vector<int>& cluster_of, int n_clusters,
                               double sigma2_u, RngStream& rng);

// sigma_u^2 ~ InverseGamma(a0 + G/2, b0 + sum u_g^2 / 2)
double update_frailty_variance(const Eigen::VectorXd& u, const FrailtyConfig& cfg,
                               RngStream& rng);

// Shared log-normal frailty samplers. Sweep order: Z -> omega -> beta -> u ->
// sigma_u^2. Under PL-Cox the frailties are recentred to mean zero each sweep
// with the shift absorbed into the intercept; GPL-Cox is not shift invariant,
// so identification there comes from the N(0, sigma_u^2) prior alone.
PosteriorDraws run_frailty_gibbs(const SurvivalDataset& ds, const RiskStructure& risk,
                                 const PLCoxConfig& cfg, const FrailtyConfig& frailty);
PosteriorDraws run_frailty_gibbs(const SurvivalDataset& ds, const RiskStructure& risk,
                                 const GPLCoxConfig& cfg, const FrailtyConfig& frailty);

}  // namespace rankhaz
