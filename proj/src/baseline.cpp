#include "rankhaz/baseline.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "rankhaz/common.hpp"

namespace rankhaz {

double MleResult::ci_low(int j) const {
    return beta_hat[j] - 1.959963984540054 * std::sqrt(covariance(j, j));
}
double MleResult::ci_high(int j) const {
    return beta_hat[j] + 1.959963984540054 * std::sqrt(covariance(j, j));
}

namespace {

// One backward pass accumulating the scaled suffix sums
//   S0 = sum e^{eta-M}, S1 = sum e^{eta-M} x, S2 = sum e^{eta-M} x x'
// with a running maximum M, snapshotting each risk set as it completes.
LoglikDerivatives tied_derivatives(const Eigen::VectorXd& beta, const RiskStructure& risk,
                                   const Eigen::MatrixXd& X, bool efron) {
    const int p = static_cast<int>(X.cols());
    const int R = risk.num_event_times();
    Eigen::VectorXd eta = X * beta;
    if (!eta.allFinite())
        throw NonConvergenceError("non-finite linear predictor in partial likelihood");

    LoglikDerivatives out;
    out.grad = Eigen::VectorXd::Zero(p);
    out.hess = Eigen::MatrixXd::Zero(p, p);

    double m = -std::numeric_limits<double>::infinity();
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

    int k = risk.n - 1;
    for (int r = R - 1; r >= 0; --r) {
        while (k >= risk.risk_start[r]) {
            const int j = risk.order[k--];
            const double e = eta[j];
            if (e > m) {
                const double scale = std::exp(m - e);
                s0 *= scale;
                s1 *= scale;
                s2 *= scale;
                m = e;
            }
            const double w = std::exp(e - m);
            s0 += w;
            s1.noalias() += w * X.row(j).transpose();
            s2.selfadjointView<Eigen::Lower>().rankUpdate(X.row(j).transpose(), w);
        }

        const int d = risk.tie_counts[r];
        const Eigen::MatrixXd s2full = s2.selfadjointView<Eigen::Lower>();

        // event-block sums, on the same scale e^{-m}
        double b0 = 0.0;
        Eigen::VectorXd b1 = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd b2 = Eigen::MatrixXd::Zero(p, p);
        for (int idx = risk.event_offset[r]; idx < risk.event_offset[r + 1]; ++idx) {
            const int i = risk.event_index[idx];
            out.value += eta[i];
            out.grad.noalias() += X.row(i).transpose();
            if (efron && d > 1) {
                const double w = std::exp(eta[i] - m);
                b0 += w;
                b1.noalias() += w * X.row(i).transpose();
                b2.selfadjointView<Eigen::Lower>().rankUpdate(X.row(i).transpose(), w);
            }
        }

        if (!efron || d == 1) {
            out.value -= d * (std::log(s0) + m);
            const Eigen::VectorXd mu = s1 / s0;
            out.grad.noalias() -= d * mu;
            out.hess.noalias() -= d * (s2full / s0 - mu * mu.transpose());
        } else {
            const Eigen::MatrixXd b2full = b2.selfadjointView<Eigen::Lower>();
            for (int t = 0; t < d; ++t) {
                const double f = static_cast<double>(t) / d;
                const double den = s0 - f * b0;
                out.value -= std::log(den) + m;
                const Eigen::VectorXd mu = (s1 - f * b1) / den;
                out.grad.noalias() -= mu;
                out.hess.noalias() -= (s2full - f * b2full) / den - mu * mu.transpose();
            }
        }
    }
    return out;
}

[[noreturn]] void report_singular(const Eigen::MatrixXd& neg_hess) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neg_hess);
    int arg = 0;
    es.eigenvectors().col(0).cwiseAbs().maxCoeff(&arg);
    throw NonConvergenceError(
        "singular Hessian in Newton iteration: null direction dominated by covariate " +
        std::to_string(arg + 1) + " (column index " + std::to_string(arg) + ")");
}

}  // namespace

LoglikDerivatives breslow_loglik_grad_hess(const Eigen::VectorXd& beta,
                                           const RiskStructure& risk,
                                           const Eigen::MatrixXd& X) {
    return tied_derivatives(beta, risk, X, /*efron=*/false);
}

LoglikDerivatives efron_loglik_grad_hess(const Eigen::VectorXd& beta,
                                         const RiskStructure& risk,
                                         const Eigen::MatrixXd& X) {
    return tied_derivatives(beta, risk, X, /*efron=*/true);
}

MleResult newton_mle(const RiskStructure& risk, const Eigen::MatrixXd& X, TieMethod ties,
                     const NewtonOptions& opts) {
    const int p = static_cast<int>(X.cols());
    if (p < 1) throw ValidationError("newton_mle requires at least one covariate");
    const bool efron = (ties == TieMethod::Efron);

    MleResult res;
    res.beta_hat = Eigen::VectorXd::Zero(p);
    res.covariance = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());

    LoglikDerivatives cur = tied_derivatives(res.beta_hat, risk, X, efron);
    for (int it = 1; it <= opts.max_iter; ++it) {
        res.n_iter = it;
        const Eigen::MatrixXd neg_hess = -cur.hess;
        Eigen::LLT<Eigen::MatrixXd> llt(neg_hess);
        bool degenerate = llt.info() != Eigen::Success;
        Eigen::VectorXd step;
        if (!degenerate) {
            step = llt.solve(cur.grad);
            degenerate = !step.allFinite();
        }
        if (degenerate) {
            // Structural rank deficiency shows up immediately and with a live
            // gradient; curvature that dies out along the path with a
            // vanishing score is the monotone-likelihood flat region.
            if (it == 1 || cur.grad.lpNorm<Eigen::Infinity>() >= std::sqrt(opts.tol))
                report_singular(neg_hess);
            res.message =
                "information matrix degenerated along the iteration path; "
                "monotone likelihood / separation suspected, coefficients diverging";
            res.loglik = cur.value;
            res.converged = false;
            return res;
        }

        // A flat gradient alone does not mean an interior optimum: under a
        // monotone likelihood the score decays but the Newton increment stays
        // order one, so require both to vanish.
        if (cur.grad.lpNorm<Eigen::Infinity>() < opts.tol &&
            step.lpNorm<Eigen::Infinity>() <
                1e-6 * (1.0 + res.beta_hat.lpNorm<Eigen::Infinity>())) {
            res.converged = true;
            break;
        }

        double scale = 1.0;
        Eigen::VectorXd cand;
        LoglikDerivatives cand_d;
        bool improved = false;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            cand = res.beta_hat + scale * step;
            cand_d = tied_derivatives(cand, risk, X, efron);
            if (cand_d.value > cur.value ||
                cand_d.grad.lpNorm<Eigen::Infinity>() < opts.tol) {
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) {
            res.message = "step halving stalled without improving the log-likelihood";
            break;
        }
        res.beta_hat = cand;
        cur = cand_d;
        if (res.beta_hat.lpNorm<Eigen::Infinity>() > opts.beta_bound) {
            res.message =
                "coefficient path diverging (|beta| > " + std::to_string(opts.beta_bound) +
                "); monotone likelihood / separation suspected";
            res.loglik = cur.value;
            res.converged = false;
            return res;
        }
    }
    if (!res.converged && res.message.empty())
        res.message = "gradient tolerance not reached within max_iter";
    res.loglik = cur.value;

    if (res.converged) {
        const Eigen::MatrixXd neg_hess = -cur.hess;
        Eigen::LLT<Eigen::MatrixXd> llt(neg_hess);
        if (llt.info() != Eigen::Success) report_singular(neg_hess);
        res.covariance = llt.solve(Eigen::MatrixXd::Identity(p, p));
    }
    return res;
}

}  // namespace rankhaz
