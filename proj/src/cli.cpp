#include "rankhaz/cli.hpp"

#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rankhaz/baseline.hpp"
#include "rankhaz/diagnostics.hpp"
#include "rankhaz/frailty.hpp"
#include "rankhaz/gplcox.hpp"
#include "rankhaz/plcox.hpp"
#include "rankhaz/simlab.hpp"
#include "rankhaz/survdata.hpp"

namespace rankhaz::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string iso_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file '" + path + "' for digest");
    std::uint64_t h = 1469598103934665603ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (!in) break;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// RANKHAZ_SEED takes precedence over --seed when present.
std::uint64_t resolve_seed(std::uint64_t flag_seed) {
    if (const char* env = std::getenv("RANKHAZ_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ValidationError("RANKHAZ_SEED is not a valid unsigned integer");
        }
    }
    return flag_seed;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << content;
}

struct FitArgs {
    std::string model;
    std::string data;
    std::string time_col = "time";
    std::string event_col = "event";
    std::string covariates;  // comma separated; empty = all remaining columns
    std::string frailty_col;
    int iters = 3000;
    int burnin = 1000;
    int thin = 1;
    std::uint64_t seed = 1;
    double delta = 10.0;
    double prior_sd = 10.0;
    int parallel = 1;
    std::string out_dir = ".";
};

CsvSchema schema_from(const std::string& time_col, const std::string& event_col,
                      const std::string& cluster_col, const std::string& covariates) {
    CsvSchema schema;
    schema.time_col = time_col;
    schema.event_col = event_col;
    schema.cluster_col = cluster_col;
    if (!covariates.empty()) {
        std::stringstream ss(covariates);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) schema.covariate_cols.push_back(item);
    }
    return schema;
}

void write_draws_csv(const PosteriorDraws& draws, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out.precision(std::numeric_limits<double>::max_digits10);
    out << "# manifest: manifest.json\n";
    out << "iteration,parameter,value\n";
    for (int k = 0; k < draws.n_retained(); ++k)
        for (int j = 0; j < draws.n_params(); ++j)
            out << draws.iteration_of(k) << ',' << draws.param_names[j] << ','
                << draws.draws(k, j) << '\n';
}

json manifest_base(const std::string& command, std::uint64_t seed,
                   const std::string& input_path, const std::string& started) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["seed"] = seed;
    m["input"] = {{"path", input_path}, {"fnv1a64", fnv1a64_file(input_path)}};
    m["started_at"] = started;
    return m;
}

int cmd_fit(const FitArgs& args) {
    const std::string started = iso_now();
    const std::uint64_t seed = resolve_seed(args.seed);
    const fs::path out_dir(args.out_dir);
    fs::create_directories(out_dir);

    const CsvSchema schema =
        schema_from(args.time_col, args.event_col, args.frailty_col, args.covariates);
    const SurvivalDataset ds = load_csv(args.data, schema);
    const SurvivalDataset ds_int = with_intercept(ds);
    const RiskStructure risk = build_risk_structure(ds);

    McmcConfig mcmc;
    mcmc.n_iter = args.iters;
    mcmc.n_burnin = args.burnin;
    mcmc.thin = args.thin;
    mcmc.seed = seed;
    mcmc.prior_sd = args.prior_sd;

    PosteriorDraws draws;
    const bool frailty = !args.frailty_col.empty();
    if (args.model == "pl") {
        PLCoxConfig cfg;
        cfg.mcmc = mcmc;
        cfg.delta = args.delta;
        draws = frailty ? run_frailty_gibbs(ds_int, risk, cfg, FrailtyConfig{})
                        : run_pl_gibbs(ds_int, risk, cfg);
    } else {
        GPLCoxConfig cfg;
        cfg.mcmc = mcmc;
        draws = frailty ? run_frailty_gibbs(ds_int, risk, cfg, FrailtyConfig{})
                        : run_gpl_gibbs(ds_int, risk, cfg);
    }

    const PosteriorSummary summary = summarize(draws);

    // DIC with the posterior-mean plug-in (conditional on frailty means).
    const Eigen::MatrixXd X = ds_int.design_matrix();
    const Eigen::VectorXd mean_all = draws.posterior_mean();
    const Eigen::VectorXd mean_beta = mean_all.head(ds_int.p);
    Eigen::VectorXd offset;
    if (frailty) {
        const int G = ds_int.n_clusters();
        const Eigen::VectorXd mean_u = mean_all.segment(ds_int.p, G);
        offset.resize(ds_int.n());
        for (int i = 0; i < ds_int.n(); ++i)
            offset[i] = mean_u[*ds_int.records[i].cluster];
    }
    const double ll_at_mean = (args.model == "pl")
        ? pl_loglik_offset(mean_beta, risk, X, offset)
        : gpl_loglik_offset(mean_beta, risk, X, offset);
    const DicResult d = dic(draws.loglik, ll_at_mean);

    write_draws_csv(draws, out_dir / "draws.csv");

    json sj = json::parse(summary_to_json(summary));
    sj["manifest"] = "manifest.json";
    sj["model"] = args.model;
    sj["dic"] = {{"dic", d.dic},
                 {"p_d", d.p_d},
                 {"mean_deviance", d.mean_deviance},
                 {"deviance_at_mean", d.deviance_at_mean}};
    write_text(out_dir / "summary.json", sj.dump(2) + "\n");

    std::string table = format_summary_table(summary);
    {
        std::ostringstream os;
        os << table << "DIC: " << std::fixed << std::setprecision(2) << d.dic
           << "  p_D: " << d.p_d << "\nmanifest: manifest.json\n";
        table = os.str();
    }
    write_text(out_dir / "summary.txt", table);
    std::cout << table;

    json m = manifest_base("fit", seed, args.data, started);
    m["config"] = {{"model", args.model},   {"time", args.time_col},
                   {"event", args.event_col}, {"covariates", args.covariates},
                   {"frailty_col", args.frailty_col}, {"iters", args.iters},
                   {"burnin", args.burnin}, {"thin", args.thin},
                   {"delta", args.delta},   {"prior_sd", args.prior_sd},
                   {"parallel", args.parallel}};
    m["wall_seconds"] = draws.wall_seconds;
    m["outputs"] = {"draws.csv", "summary.json", "summary.txt"};
    m["finished_at"] = iso_now();
    write_text(out_dir / "manifest.json", m.dump(2) + "\n");
    return 0;
}

struct MleArgs {
    std::string data;
    std::string time_col = "time";
    std::string event_col = "event";
    std::string covariates;
    std::string ties = "breslow";
    std::string out_dir = ".";
};

int cmd_mle(const MleArgs& args) {
    const std::string started = iso_now();
    const fs::path out_dir(args.out_dir);
    fs::create_directories(out_dir);

    const CsvSchema schema = schema_from(args.time_col, args.event_col, "", args.covariates);
    const SurvivalDataset ds = load_csv(args.data, schema);
    const RiskStructure risk = build_risk_structure(ds);
    const Eigen::MatrixXd X = ds.design_matrix();
    const MleResult res = newton_mle(
        risk, X, args.ties == "efron" ? TieMethod::Efron : TieMethod::Breslow);

    json j;
    j["manifest"] = "manifest.json";
    j["ties"] = args.ties;
    j["converged"] = res.converged;
    j["n_iter"] = res.n_iter;
    j["loglik"] = res.loglik;
    if (!res.message.empty()) j["message"] = res.message;
    j["coefficients"] = json::array();

    std::ostringstream table;
    table << std::left << std::setw(18) << "parameter" << std::right << std::setw(12)
          << "estimate" << std::setw(12) << "se" << std::setw(24) << "HR [95% CI]" << '\n';
    for (int k = 0; k < ds.p; ++k) {
        json cj;
        cj["name"] = ds.covariate_names[k];
        cj["estimate"] = res.beta_hat[k];
        if (res.converged) {
            const double se = std::sqrt(res.covariance(k, k));
            cj["se"] = se;
            cj["ci_low"] = res.ci_low(k);
            cj["ci_high"] = res.ci_high(k);
            cj["hr"] = std::exp(res.beta_hat[k]);
            table << std::left << std::setw(18) << ds.covariate_names[k] << std::right
                  << std::fixed << std::setprecision(4) << std::setw(12) << res.beta_hat[k]
                  << std::setw(12) << se;
            std::ostringstream hr;
            hr << std::fixed << std::setprecision(2) << std::exp(res.beta_hat[k]) << " ["
               << std::exp(res.ci_low(k)) << ", " << std::exp(res.ci_high(k)) << "]";
            table << std::setw(24) << hr.str() << '\n';
            table.unsetf(std::ios_base::fixed);
        }
        j["coefficients"].push_back(cj);
    }
    write_text(out_dir / "mle.json", j.dump(2) + "\n");

    json m = manifest_base("mle", 0, args.data, started);
    m["config"] = {{"ties", args.ties},
                   {"time", args.time_col},
                   {"event", args.event_col},
                   {"covariates", args.covariates}};
    m["outputs"] = {"mle.json"};
    m["finished_at"] = iso_now();
    write_text(out_dir / "manifest.json", m.dump(2) + "\n");

    if (!res.converged) {
        std::cerr << "mle did not converge: " << res.message << '\n';
        return 3;
    }
    std::cout << table.str();
    return 0;
}

struct SimArgs {
    std::string config;
    std::string out_dir = ".";
    int parallel = 0;          // 0: keep the scenario file's value
    std::uint64_t seed = 0;    // 0: keep the scenario file's value
    bool seed_set = false;
};

int cmd_simulate(const SimArgs& args) {
    const std::string started = iso_now();
    const fs::path out_dir(args.out_dir);
    fs::create_directories(out_dir);

    SimulateJob job = parse_scenario_file(args.config);
    if (args.parallel > 0) job.settings.parallelism = args.parallel;
    if (args.seed_set) job.settings.seed = args.seed;
    job.settings.seed = resolve_seed(job.settings.seed);

    const ReplicationReport report = run_replications(job.scenario, job.settings);

    write_report_csv(report, (out_dir / "report.csv").string());
    json rj = json::parse(report_to_json(report));
    rj["manifest"] = "manifest.json";
    write_text(out_dir / "report.json", rj.dump(2) + "\n");

    json m = manifest_base("simulate", job.settings.seed, args.config, started);
    m["config"] = {{"parallel", job.settings.parallelism},
                   {"reps", job.settings.n_replications}};
    json timing = json::object();
    for (size_t k = 0; k < report.method_names.size(); ++k)
        timing[report.method_names[k]] = report.seconds_per_method[k];
    m["timing_seconds"] = timing;  // run-specific, kept out of the report files
    m["outputs"] = {"report.csv", "report.json"};
    m["finished_at"] = iso_now();
    write_text(out_dir / "manifest.json", m.dump(2) + "\n");

    int worst_failures = 0;
    for (size_t k = 0; k < report.method_names.size(); ++k) {
        worst_failures = std::max(worst_failures, report.failures_per_method[k]);
        std::cout << report.method_names[k] << ": " << report.failures_per_method[k]
                  << " failed of " << report.n_replications << " replications ("
                  << std::fixed << std::setprecision(1)
                  << report.seconds_per_method[k] << "s)\n";
        std::cout.unsetf(std::ios_base::fixed);
    }
    std::cout << "report written to " << (out_dir / "report.csv").string() << '\n';
    if (worst_failures * 10 > report.n_replications) return 4;
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{
        "rankhaz: Bayesian Cox regression via rank-ordered likelihoods.\n"
        "Exit codes: 0 ok, 2 validation error, 3 non-convergence, "
        "4 replication failure budget exceeded."};
    app.require_subcommand(1);

    FitArgs fit;
    CLI::App* fit_cmd = app.add_subcommand(
        "fit", "Fit the PL-Cox or GPL-Cox model to a CSV dataset");
    fit_cmd->add_option("--model", fit.model, "Model: pl or gpl")
        ->required()
        ->check(CLI::IsMember({"pl", "gpl"}));
    fit_cmd->add_option("--data", fit.data, "Input CSV path")->required();
    fit_cmd->add_option("--time", fit.time_col, "Time column name");
    fit_cmd->add_option("--event", fit.event_col, "Event column name (values 0/1)");
    fit_cmd->add_option("--covariates", fit.covariates,
                        "Comma-separated covariate columns (default: all others)");
    fit_cmd->add_option("--frailty-col", fit.frailty_col,
                        "Cluster column enabling the shared frailty model");
    fit_cmd->add_option("--iters", fit.iters, "Total MCMC iterations");
    fit_cmd->add_option("--burnin", fit.burnin, "Burn-in iterations discarded");
    fit_cmd->add_option("--thin", fit.thin, "Thinning interval");
    fit_cmd->add_option("--seed", fit.seed, "RNG seed (RANKHAZ_SEED overrides)");
    fit_cmd->add_option("--delta", fit.delta,
                        "PL-Cox negative-binomial approximation parameter");
    fit_cmd->add_option("--prior-sd", fit.prior_sd,
                        "Prior SD of each coefficient (normal prior)");
    fit_cmd->add_option("--parallel", fit.parallel, "Worker cap (single chain: unused)");
    fit_cmd->add_option("--out-dir", fit.out_dir, "Output directory");

    MleArgs mle;
    CLI::App* mle_cmd =
        app.add_subcommand("mle", "Frequentist partial-likelihood fit (Newton)");
    mle_cmd->add_option("--data", mle.data, "Input CSV path")->required();
    mle_cmd->add_option("--time", mle.time_col, "Time column name");
    mle_cmd->add_option("--event", mle.event_col, "Event column name");
    mle_cmd->add_option("--covariates", mle.covariates, "Comma-separated covariate columns");
    mle_cmd->add_option("--ties", mle.ties, "Tie handling: breslow or efron")
        ->check(CLI::IsMember({"breslow", "efron"}));
    mle_cmd->add_option("--out-dir", mle.out_dir, "Output directory");

    SimArgs sim;
    CLI::App* sim_cmd =
        app.add_subcommand("simulate", "Run a replication study from a scenario file");
    sim_cmd->add_option("--config", sim.config, "Scenario file (key = value lines)")
        ->required();
    sim_cmd->add_option("--out-dir", sim.out_dir, "Output directory");
    sim_cmd->add_option("--parallel", sim.parallel, "Worker threads");
    CLI::Option* seed_opt =
        sim_cmd->add_option("--seed", sim.seed, "RNG seed (RANKHAZ_SEED overrides)");

    std::vector<const char*> argv;
    argv.push_back("rankhaz");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    sim.seed_set = seed_opt->count() > 0;
    try {
        if (fit_cmd->parsed()) return cmd_fit(fit);
        if (mle_cmd->parsed()) return cmd_mle(mle);
        if (sim_cmd->parsed()) return cmd_simulate(sim);
    } catch (const CholeskyError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const NonConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}

}  // namespace rankhaz::cli
