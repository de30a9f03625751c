#pragma once

#include <vector>

#include <Eigen/Core>

#include "rankhaz/draws.hpp"
#include "rankhaz/randkit.hpp"
#include "rankhaz/survdata.hpp"

namespace rankhaz {

struct PLCoxConfig {
    McmcConfig mcmc;
    double delta = 10.0;      // negative-binomial approximation parameter
    double psi_clamp = 700.0; // |psi| bound before PG sampling
};

// Rank-ordered partial log-likelihood
//   sum_r [ sum_{i in E_r} x_i'beta - d_r log sum_{j in R_r} exp(x_j'beta) ],
// equal to the Breslow-tie Cox partial log-likelihood. Log-sum-exp stabilized.
double pl_loglik(const Eigen::VectorXd& beta, const RiskStructure& risk,
                 const Eigen::MatrixXd& X);

// Same with a per-subject additive offset in the linear predictor
// (frailty effects u_{g(i)}).
double pl_loglik_offset(const Eigen::VectorXd& beta, const RiskStructure& risk,
                        const Eigen::MatrixXd& X, const Eigen::VectorXd& offset);

// One Gibbs chain for the PL-Cox model. Sweep order is
// update_z -> update_omega -> update_beta; the frailty runner interleaves its
// own updates through the accessors below.
class PlChain {
public:
    PlChain(const SurvivalDataset& ds, const RiskStructure& risk, const PLCoxConfig& cfg);

    void init(RngStream& rng);  // beta = prior mean, lambda refreshed, one z sweep

    void update_z(RngStream& rng);
    void update_omega(RngStream& rng);
    void update_beta(RngStream& rng);

    // Frailty support: per-subject additive offset entering the linear predictor.
    void set_subject_offset(const Eigen::VectorXd& offset);
    // Adds a to the intercept coordinate and refreshes the predictor
    // (used when recentring frailties; valid by shift invariance).
    void shift_intercept(double a);

    const Eigen::VectorXd& beta() const { return beta_; }
    const Eigen::VectorXd& z() const { return z_; }
    const Eigen::VectorXd& zeta() const { return zeta_; }
    const Eigen::VectorXd& omega() const { return omega_; }
    const Eigen::VectorXd& xbeta() const { return xb_; }
    // PL-Cox beta-update offset o_i = log(zeta_i/delta); 0 for inert subjects.
    const Eigen::VectorXd& log_zeta_delta() const { return logzd_; }
    const Eigen::VectorXd& kappa() const { return kappa_; }
    const std::vector<int>& active_subjects() const { return active_; }

    double loglik() const;  // pl log-likelihood at current beta (+offset)
    long clamp_count() const { return clamp_count_; }

private:
    void refresh_lambda();

    const RiskStructure& risk_;
    Eigen::MatrixXd X_;
    PLCoxConfig cfg_;
    ResolvedPrior prior_;
    std::vector<int> active_;  // subjects belonging to at least one risk set

    Eigen::VectorXd beta_, xb_, offset_, eta_, lambda_;
    Eigen::VectorXd z_, zeta_, logzd_, psi_, omega_, kappa_;
    long clamp_count_ = 0;
};

// Full sampler. Requires the intercept column (hazard-ratio reporting skips it).
PosteriorDraws run_pl_gibbs(const SurvivalDataset& ds, const RiskStructure& risk,
                            const PLCoxConfig& cfg);

}  // namespace rankhaz
