#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "rankhaz/draws.hpp"

namespace rankhaz {

struct ParamSummary {
    std::string name;
    ParamKind kind = ParamKind::Coefficient;
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0;
    double q975 = 0.0;
    double ess = 0.0;
    bool has_hr = false;  // exp transform reported for non-intercept coefficients
    double hr = 0.0;
    double hr_low = 0.0;
    double hr_high = 0.0;
};

struct PosteriorSummary {
    std::vector<ParamSummary> params;
    int n_retained = 0;
    double wall_seconds = 0.0;
    double median_ess_per_sec_beta = 0.0;  // median over the beta block
    long clamp_count = 0;
    long divergence_count = 0;
};

// Means, SDs, equal-tailed 95% intervals (type-7 quantiles) and ESS for every
// retained parameter; hazard ratios are exp of the beta summaries.
PosteriorSummary summarize(const PosteriorDraws& draws);

// Effective sample size by the initial-monotone-positive-sequence
// autocorrelation estimator, capped at the chain length. A zero-variance
// chain reports ESS = N by convention.
double ess(const Eigen::VectorXd& chain);

struct DicResult {
    double dic = 0.0;
    double p_d = 0.0;
    double mean_deviance = 0.0;     // D-bar
    double deviance_at_mean = 0.0;  // D(theta-bar)
};

// loglik_at_mean must be the model's own log-likelihood evaluated at the
// posterior-mean parameters.
DicResult dic(const Eigen::VectorXd& loglik_draws, double loglik_at_mean);

// Aligned text table in "HR [low, high]" style.
std::string format_summary_table(const PosteriorSummary& summary);

// JSON mirror of the table (serialized string; identical values).
std::string summary_to_json(const PosteriorSummary& summary);

}  // namespace rankhaz
