#include "rankhaz/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "rankhaz/baseline.hpp"
#include "rankhaz/diagnostics.hpp"
#include "rankhaz/gplcox.hpp"
#include "rankhaz/plcox.hpp"

namespace rankhaz {

namespace {

// Stream id layout: data for replication r uses stream_id = r; sampler
// chains use a disjoint high range; the pseudo-truth dataset its own slot.
constexpr std::uint64_t kChainStreamBase = std::uint64_t{1} << 32;
constexpr std::uint64_t kPseudoTruthStream = std::uint64_t{1} << 33;

struct RawSurvival {
    Eigen::MatrixXd X;
    std::vector<double> event_time;   // +inf when no event occurs
    std::vector<double> censor_time;
};

SurvivalDataset assemble(const ScenarioSpec& spec, const RawSurvival& raw) {
    const int n = spec.n;
    SurvivalDataset ds;
    ds.p = spec.p();
    for (int j = 0; j < ds.p; ++j) ds.covariate_names.push_back("x" + std::to_string(j + 1));
    ds.records.resize(n);

    std::vector<double> times(n);
    std::vector<std::uint8_t> flags(n);
    switch (spec.coarsen) {
        case CoarsenKind::None:
            for (int i = 0; i < n; ++i) {
                times[i] = std::min(raw.event_time[i], raw.censor_time[i]);
                flags[i] = raw.event_time[i] <= raw.censor_time[i] ? 1 : 0;
            }
            break;
        case CoarsenKind::Round: {
            for (int i = 0; i < n; ++i) {
                times[i] = std::min(raw.event_time[i], raw.censor_time[i]);
                flags[i] = raw.event_time[i] <= raw.censor_time[i] ? 1 : 0;
            }
            times = coarsen_round(times, spec.round_delta);
            break;
        }
        case CoarsenKind::Grid: {
            CoarsenedTimes ct = coarsen_grid(raw.event_time, raw.censor_time, spec.grid_u);
            times = std::move(ct.observed_times);
            flags = std::move(ct.event_flags);
            break;
        }
    }
    for (int i = 0; i < n; ++i) {
        ds.records[i].time = times[i];
        ds.records[i].event = flags[i] != 0;
        ds.records[i].covariates.assign(raw.X.row(i).data(), raw.X.row(i).data() + spec.p());
        for (int j = 0; j < spec.p(); ++j) ds.records[i].covariates[j] = raw.X(i, j);
    }
    return ds;
}

Eigen::MatrixXd standard_normal_covariates(int n, int p, RngStream& rng) {
    Eigen::MatrixXd X(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
    return X;
}

double hazard_intercept(const ScenarioSpec& spec, int t) {
    const double ramp = (spec.t_max > 1)
        ? static_cast<double>(t - 1) / static_cast<double>(spec.t_max - 1)
        : 0.0;
    switch (spec.hazard) {
        case HazardShape::Constant: return spec.alpha0;
        case HazardShape::Decreasing: return spec.alpha0 + spec.hazard_swing * (1.0 - ramp);
        case HazardShape::Increasing: return spec.alpha0 + spec.hazard_swing * ramp;
    }
    return spec.alpha0;
}

}  // namespace

SurvivalDataset gen_weibull_ph(const ScenarioSpec& spec, RngStream& rng) {
    if (!(spec.weibull_shape > 0.0) || !(spec.weibull_scale > 0.0))
        throw ValidationError("Weibull shape and scale must be positive");
    if (!(spec.censor_hi > spec.censor_lo))
        throw ValidationError("censoring bounds must satisfy lo < hi");
    RawSurvival raw;
    raw.X = standard_normal_covariates(spec.n, spec.p(), rng);
    raw.event_time.resize(spec.n);
    raw.censor_time.resize(spec.n);
    const double a = spec.weibull_shape;
    for (int i = 0; i < spec.n; ++i) {
        const double lp = raw.X.row(i) * spec.beta_true;
        const double scale = spec.weibull_scale * std::exp(-lp / a);
        raw.event_time[i] = scale * std::pow(rng.exponential(), 1.0 / a);
        raw.censor_time[i] = spec.censor_lo + (spec.censor_hi - spec.censor_lo) * rng.uniform();
    }
    return assemble(spec, raw);
}

SurvivalDataset gen_discrete_logistic(const ScenarioSpec& spec, RngStream& rng) {
    if (spec.t_max < 1) throw ValidationError("t_max must be at least 1");
    RawSurvival raw;
    raw.X = standard_normal_covariates(spec.n, spec.p(), rng);
    raw.event_time.resize(spec.n);
    raw.censor_time.resize(spec.n);
    for (int i = 0; i < spec.n; ++i) {
        const double lp = raw.X.row(i) * spec.beta_true;
        double t_event = std::numeric_limits<double>::infinity();
        for (int t = 1; t <= spec.t_max; ++t) {
            const double eta = hazard_intercept(spec, t) + lp;
            const double prob = 1.0 / (1.0 + std::exp(-eta));
            if (rng.uniform() < prob) {
                t_event = static_cast<double>(t);
                break;
            }
        }
        raw.event_time[i] = t_event;
        raw.censor_time[i] = std::min<double>(
            spec.t_max, 1.0 + std::floor(rng.uniform() * spec.t_max));
    }
    return assemble(spec, raw);
}

SurvivalDataset gen_lognormal_nph(const ScenarioSpec& spec, RngStream& rng) {
    if (!(spec.mu > 0.0) || !(spec.sigma > 0.0))
        throw ValidationError("log-normal mu and sigma must be positive");
    RawSurvival raw;
    raw.X = standard_normal_covariates(spec.n, spec.p(), rng);
    raw.event_time.resize(spec.n);
    raw.censor_time.resize(spec.n);
    for (int i = 0; i < spec.n; ++i) {
        const double lp = raw.X.row(i) * spec.beta_true;
        raw.event_time[i] = std::exp(std::log(spec.mu) - lp + spec.sigma * rng.normal());
        raw.censor_time[i] = spec.lognormal_censor_hi * rng.uniform();
    }
    return assemble(spec, raw);
}

SurvivalDataset generate(const ScenarioSpec& spec, RngStream& rng) {
    if (spec.n < 2) throw ValidationError("scenario sample size must be at least 2");
    if (spec.p() < 1) throw ValidationError("scenario needs a non-empty beta_true");
    switch (spec.family) {
        case Family::WeibullPH: return gen_weibull_ph(spec, rng);
        case Family::DiscreteLogistic: return gen_discrete_logistic(spec, rng);
        case Family::LognormalNPH: return gen_lognormal_nph(spec, rng);
    }
    throw ValidationError("unknown scenario family");
}

std::string method_name(FitMethod m) {
    switch (m) {
        case FitMethod::Breslow: return "breslow";
        case FitMethod::Efron: return "efron";
        case FitMethod::PLCox: return "pl";
        case FitMethod::GPLCox: return "gpl";
    }
    return "?";
}

namespace {

struct RepOutcome {
    bool ok = false;
    Eigen::VectorXd est, lo, hi;  // non-intercept coefficients
    double seconds = 0.0;
};

RepOutcome fit_one(FitMethod method, const RiskStructure& risk, const Eigen::MatrixXd& X,
                   const SurvivalDataset& ds_int, const ReplicationSettings& settings,
                   std::uint64_t chain_stream) {
    RepOutcome out;
    const auto t0 = std::chrono::steady_clock::now();
    const int p = static_cast<int>(X.cols());
    try {
        if (method == FitMethod::Breslow || method == FitMethod::Efron) {
            const MleResult res = newton_mle(
                risk, X, method == FitMethod::Breslow ? TieMethod::Breslow : TieMethod::Efron);
            if (!res.converged) throw NonConvergenceError(res.message);
            out.est = res.beta_hat;
            out.lo.resize(p);
            out.hi.resize(p);
            for (int j = 0; j < p; ++j) {
                out.lo[j] = res.ci_low(j);
                out.hi[j] = res.ci_high(j);
            }
        } else {
            PosteriorDraws draws;
            if (method == FitMethod::PLCox) {
                PLCoxConfig cfg;
                cfg.mcmc = settings.mcmc;
                cfg.delta = settings.delta;
                cfg.mcmc.seed = settings.seed;
                cfg.mcmc.stream_id = chain_stream;
                draws = run_pl_gibbs(ds_int, risk, cfg);
            } else {
                GPLCoxConfig cfg;
                cfg.mcmc = settings.mcmc;
                cfg.mcmc.seed = settings.seed;
                cfg.mcmc.stream_id = chain_stream;
                draws = run_gpl_gibbs(ds_int, risk, cfg);
            }
            const PosteriorSummary s = summarize(draws);
            out.est.resize(p);
            out.lo.resize(p);
            out.hi.resize(p);
            int j = 0;
            for (const auto& ps : s.params) {
                if (ps.kind != ParamKind::Coefficient) continue;
                out.est[j] = ps.mean;
                out.lo[j] = ps.q025;
                out.hi[j] = ps.q975;
                ++j;
            }
        }
        out.ok = true;
    } catch (const std::exception&) {
        out.ok = false;
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    return out;
}

}  // namespace

ReplicationReport run_replications(const ScenarioSpec& spec,
                                   const ReplicationSettings& settings) {
    if (settings.n_replications < 1)
        throw ValidationError("n_replications must be at least 1");
    if (settings.methods.empty()) throw ValidationError("no fit methods selected");

    const int p = spec.p();
    ReplicationReport report;
    report.n_replications = settings.n_replications;
    for (FitMethod m : settings.methods) report.method_names.push_back(method_name(m));

    if (spec.family == Family::LognormalNPH) {
        ScenarioSpec big = spec;
        big.n = settings.pseudo_truth_n;
        big.coarsen = CoarsenKind::None;
        RngStream rng(settings.seed, kPseudoTruthStream);
        const SurvivalDataset ds = generate(big, rng);
        const RiskStructure risk = build_risk_structure(ds);
        const MleResult res = newton_mle(risk, ds.design_matrix(), TieMethod::Efron);
        if (!res.converged)
            throw NonConvergenceError("pseudo-truth Efron fit failed to converge");
        report.truth = res.beta_hat;
        report.pseudo_truth_used = true;
    } else {
        report.truth = spec.beta_true;
    }

    const int R = settings.n_replications;
    const int M = static_cast<int>(settings.methods.size());
    std::vector<std::vector<RepOutcome>> results(M, std::vector<RepOutcome>(R));

    std::atomic<int> next{0};
    auto worker = [&]() {
        int r;
        while ((r = next.fetch_add(1)) < R) {
            try {
                RngStream data_rng(settings.seed, static_cast<std::uint64_t>(r));
                const SurvivalDataset ds = generate(spec, data_rng);
                const RiskStructure risk = build_risk_structure(ds);
                const Eigen::MatrixXd X = ds.design_matrix();
                const SurvivalDataset ds_int = with_intercept(ds);
                for (int m = 0; m < M; ++m) {
                    const std::uint64_t chain_stream =
                        kChainStreamBase + static_cast<std::uint64_t>(r) * M +
                        static_cast<std::uint64_t>(m);
                    results[m][r] = fit_one(settings.methods[m], risk, X, ds_int, settings,
                                            chain_stream);
                }
            } catch (const std::exception&) {
                // zero-event draw or other rep-level failure: counts against
                // every method for this replication
            }
        }
    };

    const int workers = std::max(1, settings.parallelism);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    report.stats.assign(M, std::vector<MethodCoefStats>(p));
    report.seconds_per_method.assign(M, 0.0);
    report.failures_per_method.assign(M, 0);
    for (int m = 0; m < M; ++m) {
        int ok_count = 0;
        for (int r = 0; r < R; ++r) {
            report.seconds_per_method[m] += results[m][r].seconds;
            if (results[m][r].ok) ++ok_count;
            else ++report.failures_per_method[m];
        }
        for (int j = 0; j < p; ++j) {
            MethodCoefStats st;
            if (ok_count == 0) {
                st.bias = st.sd = st.rmse = st.cp = st.aw =
                    std::numeric_limits<double>::quiet_NaN();
                st.sd_defined = false;
            } else {
                double sum = 0.0, sumsq_err = 0.0, width = 0.0;
                int covered = 0;
                for (int r = 0; r < R; ++r) {
                    if (!results[m][r].ok) continue;
                    const double est = results[m][r].est[j];
                    const double err = est - report.truth[j];
                    sum += est;
                    sumsq_err += err * err;
                    width += results[m][r].hi[j] - results[m][r].lo[j];
                    if (results[m][r].lo[j] <= report.truth[j] &&
                        report.truth[j] <= results[m][r].hi[j])
                        ++covered;
                }
                const double mean_est = sum / ok_count;
                st.bias = mean_est - report.truth[j];
                st.rmse = std::sqrt(sumsq_err / ok_count);
                st.cp = 100.0 * covered / ok_count;
                st.aw = width / ok_count;
                if (ok_count > 1) {
                    double ss = 0.0;
                    for (int r = 0; r < R; ++r) {
                        if (!results[m][r].ok) continue;
                        const double dev = results[m][r].est[j] - mean_est;
                        ss += dev * dev;
                    }
                    st.sd = std::sqrt(ss / (ok_count - 1));
                } else {
                    st.sd = std::numeric_limits<double>::quiet_NaN();
                    st.sd_defined = false;
                }
            }
            report.stats[m][j] = st;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Scenario file parsing and report emission

namespace {

std::string trim_ws(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim_ws(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ValidationError("scenario key '" + key + "': cannot parse number '" + v + "'");
    }
}

}  // namespace

SimulateJob parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open scenario file '" + path + "'");
    SimulateJob job;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim_ws(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("scenario file line " + std::to_string(lineno) +
                                  ": expected key = value");
        const std::string key = trim_ws(line.substr(0, eq));
        const std::string val = trim_ws(line.substr(eq + 1));
        ScenarioSpec& sc = job.scenario;
        ReplicationSettings& st = job.settings;
        if (key == "family") {
            if (val == "weibull-ph") sc.family = Family::WeibullPH;
            else if (val == "discrete-logistic") sc.family = Family::DiscreteLogistic;
            else if (val == "lognormal-nph") sc.family = Family::LognormalNPH;
            else throw ValidationError("unknown family '" + val + "'");
        } else if (key == "n") {
            sc.n = static_cast<int>(parse_double(val, key));
        } else if (key == "beta_true") {
            const auto items = split_list(val);
            sc.beta_true.resize(static_cast<Eigen::Index>(items.size()));
            for (size_t i = 0; i < items.size(); ++i)
                sc.beta_true[static_cast<Eigen::Index>(i)] = parse_double(items[i], key);
        } else if (key == "weibull_shape") {
            sc.weibull_shape = parse_double(val, key);
        } else if (key == "weibull_scale") {
            sc.weibull_scale = parse_double(val, key);
        } else if (key == "censor_lo") {
            sc.censor_lo = parse_double(val, key);
        } else if (key == "censor_hi") {
            sc.censor_hi = parse_double(val, key);
        } else if (key == "hazard") {
            if (val == "constant") sc.hazard = HazardShape::Constant;
            else if (val == "decreasing") sc.hazard = HazardShape::Decreasing;
            else if (val == "increasing") sc.hazard = HazardShape::Increasing;
            else throw ValidationError("unknown hazard shape '" + val + "'");
        } else if (key == "alpha0") {
            sc.alpha0 = parse_double(val, key);
        } else if (key == "t_max") {
            sc.t_max = static_cast<int>(parse_double(val, key));
        } else if (key == "hazard_swing") {
            sc.hazard_swing = parse_double(val, key);
        } else if (key == "mu") {
            sc.mu = parse_double(val, key);
        } else if (key == "sigma") {
            sc.sigma = parse_double(val, key);
        } else if (key == "lognormal_censor_hi") {
            sc.lognormal_censor_hi = parse_double(val, key);
        } else if (key == "coarsen") {
            if (val == "none") sc.coarsen = CoarsenKind::None;
            else if (val == "round") sc.coarsen = CoarsenKind::Round;
            else if (val == "grid") sc.coarsen = CoarsenKind::Grid;
            else throw ValidationError("unknown coarsen kind '" + val + "'");
        } else if (key == "round_delta") {
            sc.round_delta = parse_double(val, key);
        } else if (key == "grid_u") {
            sc.grid_u = parse_double(val, key);
        } else if (key == "reps") {
            st.n_replications = static_cast<int>(parse_double(val, key));
        } else if (key == "methods") {
            st.methods.clear();
            for (const auto& name : split_list(val)) {
                if (name == "breslow") st.methods.push_back(FitMethod::Breslow);
                else if (name == "efron") st.methods.push_back(FitMethod::Efron);
                else if (name == "pl") st.methods.push_back(FitMethod::PLCox);
                else if (name == "gpl") st.methods.push_back(FitMethod::GPLCox);
                else throw ValidationError("unknown method '" + name + "'");
            }
        } else if (key == "iters") {
            st.mcmc.n_iter = static_cast<int>(parse_double(val, key));
        } else if (key == "burnin") {
            st.mcmc.n_burnin = static_cast<int>(parse_double(val, key));
        } else if (key == "thin") {
            st.mcmc.thin = static_cast<int>(parse_double(val, key));
        } else if (key == "delta") {
            st.delta = parse_double(val, key);
        } else if (key == "prior_sd") {
            st.mcmc.prior_sd = parse_double(val, key);
        } else if (key == "seed") {
            st.seed = static_cast<std::uint64_t>(parse_double(val, key));
        } else if (key == "parallel") {
            st.parallelism = static_cast<int>(parse_double(val, key));
        } else if (key == "pseudo_truth_n") {
            st.pseudo_truth_n = static_cast<int>(parse_double(val, key));
        } else {
            throw ValidationError("unknown scenario key '" + key + "'");
        }
    }
    if (job.scenario.beta_true.size() == 0)
        throw ValidationError("scenario file must set beta_true");
    return job;
}

void write_report_csv(const ReplicationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write report file '" + path + "'");
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "method,coefficient,bias,sd,rmse,cp,aw,n_replications,failures\n";
    for (size_t m = 0; m < report.method_names.size(); ++m) {
        for (size_t j = 0; j < report.stats[m].size(); ++j) {
            const MethodCoefStats& st = report.stats[m][j];
            out << report.method_names[m] << ",beta" << (j + 1) << ',' << st.bias << ',';
            if (st.sd_defined) out << st.sd;
            out << ',' << st.rmse << ',' << st.cp << ',' << st.aw << ','
                << report.n_replications << ',' << report.failures_per_method[m] << '\n';
        }
    }
}

std::string report_to_json(const ReplicationReport& report) {
    nlohmann::json j;
    j["n_replications"] = report.n_replications;
    j["pseudo_truth_used"] = report.pseudo_truth_used;
    j["truth"] = std::vector<double>(report.truth.data(),
                                     report.truth.data() + report.truth.size());
    j["methods"] = nlohmann::json::array();
    for (size_t m = 0; m < report.method_names.size(); ++m) {
        nlohmann::json mj;
        mj["name"] = report.method_names[m];
        mj["failures"] = report.failures_per_method[m];
        mj["coefficients"] = nlohmann::json::array();
        for (size_t k = 0; k < report.stats[m].size(); ++k) {
            const MethodCoefStats& st = report.stats[m][k];
            nlohmann::json cj;
            cj["name"] = "beta" + std::to_string(k + 1);
            cj["bias"] = st.bias;
            if (st.sd_defined) cj["sd"] = st.sd;
            else cj["sd"] = nullptr;
            cj["rmse"] = st.rmse;
            cj["cp"] = st.cp;
            cj["aw"] = st.aw;
            mj["coefficients"].push_back(cj);
        }
        j["methods"].push_back(mj);
    }
    return j.dump(2);
}

}  // namespace rankhaz
