#pragma once

#include <string>

#include <Eigen/Core>

#include "rankhaz/survdata.hpp"

namespace rankhaz {

enum class TieMethod { Breslow, Efron };

struct LoglikDerivatives {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
};

struct MleResult {
    Eigen::VectorXd beta_hat;
    Eigen::MatrixXd covariance;  // inverse observed information
    double loglik = 0.0;
    bool converged = false;
    int n_iter = 0;
    std::string message;

    // Wald 95% bounds for coefficient j.
    double ci_low(int j) const;
    double ci_high(int j) const;
};

// Value, gradient and Hessian of the Breslow-tie partial log-likelihood;
// the value coincides with pl_loglik.
LoglikDerivatives breslow_loglik_grad_hess(const Eigen::VectorXd& beta,
                                           const RiskStructure& risk,
                                           const Eigen::MatrixXd& X);

// Efron's within-block denominator adjustment; identical to Breslow when all
// tie blocks have size one.
LoglikDerivatives efron_loglik_grad_hess(const Eigen::VectorXd& beta,
                                         const RiskStructure& risk,
                                         const Eigen::MatrixXd& X);

struct NewtonOptions {
    double tol = 1e-8;       // gradient infinity-norm
    int max_iter = 50;
    double beta_bound = 50.0;  // monotone-likelihood guard
    int max_halvings = 20;
};

// Newton-Raphson with step halving. A diverging coefficient path is reported
// via converged=false (monotone likelihood); a singular Hessian throws
// NonConvergenceError naming the null direction.
MleResult newton_mle(const RiskStructure& risk, const Eigen::MatrixXd& X, TieMethod ties,
                     const NewtonOptions& opts = {});

}  // namespace rankhaz
