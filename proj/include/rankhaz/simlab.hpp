#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rankhaz/draws.hpp"
#include "rankhaz/randkit.hpp"
#include "rankhaz/survdata.hpp"

namespace rankhaz {

enum class Family { WeibullPH, DiscreteLogistic, LognormalNPH };
enum class HazardShape { Constant, Decreasing, Increasing };
enum class CoarsenKind { None, Round, Grid };
enum class FitMethod { Breslow, Efron, PLCox, GPLCox };

struct ScenarioSpec {
    Family family = Family::WeibullPH;
    int n = 300;
    Eigen::VectorXd beta_true;  // covariates are iid standard normal

    // Weibull proportional hazards: T ~ Weibull(shape a, scale b*exp(-x'beta/a)),
    // censoring Unif(censor_lo, censor_hi).
    double weibull_shape = 1.0;
    double weibull_scale = 10.0;
    double censor_lo = 0.5;
    double censor_hi = 30.0;

    // Discrete logistic hazard: per-period event probability
    // expit(alpha_t + x'beta), censoring discrete-uniform on {1..t_max}.
    HazardShape hazard = HazardShape::Constant;
    double alpha0 = -5.0;
    int t_max = 300;
    double hazard_swing = 1.2;  // slope of the decreasing/increasing ramps

    // Log-normal (non-proportional): log T ~ N(log mu - x'beta, sigma^2),
    // censoring Unif(0, lognormal_censor_hi).
    double mu = 60.0;
    double sigma = 0.6;
    double lognormal_censor_hi = 300.0;

    CoarsenKind coarsen = CoarsenKind::None;
    double round_delta = 0.5;  // for CoarsenKind::Round
    double grid_u = 1.0;       // for CoarsenKind::Grid

    int p() const { return static_cast<int>(beta_true.size()); }
};

SurvivalDataset gen_weibull_ph(const ScenarioSpec& spec, RngStream& rng);
SurvivalDataset gen_discrete_logistic(const ScenarioSpec& spec, RngStream& rng);
SurvivalDataset gen_lognormal_nph(const ScenarioSpec& spec, RngStream& rng);

// Dispatch on family, coarsening applied per spec.
SurvivalDataset generate(const ScenarioSpec& spec, RngStream& rng);

struct ReplicationSettings {
    int n_replications = 200;
    std::vector<FitMethod> methods{FitMethod::Breslow, FitMethod::Efron, FitMethod::PLCox,
                                   FitMethod::GPLCox};
    McmcConfig mcmc;           // iteration protocol shared by the Bayesian fits
    double delta = 10.0;       // PL-Cox approximation parameter
    std::uint64_t seed = 1;
    int parallelism = 1;
    // Sample size of the single uncoarsened Efron fit defining the
    // pseudo-truth in non-proportional scenarios. Smaller values trade
    // precision of the reference point for speed.
    int pseudo_truth_n = 500000;
};

struct MethodCoefStats {
    double bias = 0.0;
    double sd = 0.0;   // sample SD, (R-1) denominator
    double rmse = 0.0;
    double cp = 0.0;   // coverage of the 95% interval, percent
    double aw = 0.0;   // average interval width
    bool sd_defined = true;
};

struct ReplicationReport {
    std::vector<std::string> method_names;
    Eigen::VectorXd truth;  // beta_true, or the Efron pseudo-truth for NPH scenarios
    bool pseudo_truth_used = false;
    std::vector<std::vector<MethodCoefStats>> stats;  // [method][coef]
    std::vector<double> seconds_per_method;
    std::vector<int> failures_per_method;
    int n_replications = 0;
};

// Generate -> fit each method -> aggregate Bias/SD/RMSE/CP/AW. Replication r
// draws its data from stream_id = r; sampler streams are derived from a
// disjoint id range so results do not depend on the worker count. Individual
// replication failures are recorded, not fatal.
ReplicationReport run_replications(const ScenarioSpec& spec,
                                   const ReplicationSettings& settings);

std::string method_name(FitMethod m);

struct SimulateJob {
    ScenarioSpec scenario;
    ReplicationSettings settings;
};

// Key-value scenario file (one `key = value` per line, '#' comments).
SimulateJob parse_scenario_file(const std::string& path);

void write_report_csv(const ReplicationReport& report, const std::string& path);
std::string report_to_json(const ReplicationReport& report);

}  // namespace rankhaz
