#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "rankhaz/draws.hpp"
#include "rankhaz/randkit.hpp"
#include "rankhaz/survdata.hpp"

namespace rankhaz {

struct GPLCoxConfig {
    McmcConfig mcmc;
    double theta_eps = 1e-12;  // success probabilities clamped to [eps, 1-eps]
};

// Rank-ordered geometric likelihood
//   sum_r [ sum_{i in E_r} log theta_i + sum_{i in R_r \ E_r} log(1-theta_i)
//           - log(1 - prod_{j in R_r} (1-theta_j)) ]
// with theta_i = expit(x_i'beta). The risk-set products are accumulated as
// suffix sums of log(1-theta_j) and never exponentiated directly.
double gpl_loglik(const Eigen::VectorXd& beta, const RiskStructure& risk,
                  const Eigen::MatrixXd& X);

double gpl_loglik_offset(const Eigen::VectorXd& beta, const RiskStructure& risk,
                         const Eigen::MatrixXd& X, const Eigen::VectorXd& offset);

class GplChain {
public:
    GplChain(const SurvivalDataset& ds, const RiskStructure& risk, const GPLCoxConfig& cfg);

    void init(RngStream& rng);

    void update_z(RngStream& rng);
    void update_omega(RngStream& rng);
    void update_beta(RngStream& rng);

    void set_subject_offset(const Eigen::VectorXd& offset);

    const Eigen::VectorXd& beta() const { return beta_; }
    const std::vector<std::int64_t>& z() const { return z_; }
    const std::vector<std::int64_t>& zeta() const { return zeta_; }
    const Eigen::VectorXd& omega() const { return omega_; }
    const Eigen::VectorXd& xbeta() const { return xb_; }
    const Eigen::VectorXd& kappa() const { return kappa_; }
    const std::vector<int>& active_subjects() const { return active_; }

    double loglik() const;
    long clamp_count() const { return clamp_count_; }

private:
    void refresh_theta();

    const RiskStructure& risk_;
    Eigen::MatrixXd X_;
    GPLCoxConfig cfg_;
    ResolvedPrior prior_;
    std::vector<int> active_;

    Eigen::VectorXd beta_, xb_, offset_, eta_;
    Eigen::VectorXd log_theta_, log_1m_theta_;
    std::vector<std::int64_t> z_, zeta_;
    Eigen::VectorXd omega_, kappa_;
    long clamp_count_ = 0;
};

// Full sampler; the intercept column is mandatory for GPL-Cox.
PosteriorDraws run_gpl_gibbs(const SurvivalDataset& ds, const RiskStructure& risk,
                             const GPLCoxConfig& cfg);

}  // namespace rankhaz
