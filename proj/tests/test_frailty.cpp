#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rankhaz/diagnostics.hpp"
#include "rankhaz/frailty.hpp"

using namespace rankhaz;

namespace {

// Clustered exponential survival data with log-normal frailty.
struct ClusteredData {
    SurvivalDataset ds;  // with intercept
    RiskStructure risk;
};

ClusteredData simulate_clustered(int n_clusters, int cluster_size, double sigma2_u,
                                 double beta1, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> norm(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> time;
    std::vector<int> event;
    std::vector<int> cluster;
    const int n = n_clusters * cluster_size;
    Eigen::MatrixXd X(n, 1);
    int row = 0;
    for (int g = 0; g < n_clusters; ++g) {
        const double u = std::sqrt(sigma2_u) * norm(gen);
        for (int k = 0; k < cluster_size; ++k, ++row) {
            const double x = norm(gen);
            X(row, 0) = x;
            const double rate = 0.1 * std::exp(beta1 * x + u);
            const double t_event = -std::log(unif(gen)) / rate;
            const double c = 0.5 + 29.5 * unif(gen);
            time.push_back(std::min(t_event, c));
            event.push_back(t_event <= c ? 1 : 0);
            cluster.push_back(g);
        }
    }
    ClusteredData out;
    out.ds = with_intercept(oracles::make_dataset(time, event, X, &cluster));
    out.risk = build_risk_structure(out.ds);
    return out;
}

}  // namespace

TEST_CASE("update_frailty single-subject cluster has the closed-form conditional") {
    // omega=1, kappa=0.5, x'beta=0, o=0, sigma2=1: N(0.25, 0.5)
    Eigen::VectorXd omega(1), kappa(1), xb(1), off(1);
    omega << 1.0;
    kappa << 0.5;
    xb << 0.0;
    off << 0.0;
    std::vector<int> active{0};
    std::vector<int> cluster_of{0};
    RngStream rng(21, 0);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd u =
            update_frailty(omega, kappa, xb, off, active, cluster_of, 1, 1.0, rng);
        sum += u[0];
        sumsq += u[0] * u[0];
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(0.25).epsilon(0.02));
    CHECK(var == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("update_frailty two-subject cluster matches complete-the-square") {
    Eigen::VectorXd omega(2), kappa(2), xb(2), off(2);
    omega << 0.8, 1.5;
    kappa << -0.2, 0.6;
    xb << 0.3, -0.4;
    off << 0.1, 0.0;
    std::vector<int> active{0, 1};
    std::vector<int> cluster_of{0, 0};
    const double sigma2 = 0.7;
    const double prec = omega.sum() + 1.0 / sigma2;
    double num = 0.0;
    for (int i = 0; i < 2; ++i) num += kappa[i] - omega[i] * (xb[i] + off[i]);
    RngStream rng(22, 0);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd u =
            update_frailty(omega, kappa, xb, off, active, cluster_of, 1, sigma2, rng);
        sum += u[0];
        sumsq += u[0] * u[0];
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(num / prec).epsilon(0.03));
    CHECK(var == doctest::Approx(1.0 / prec).epsilon(0.03));
}

TEST_CASE("no-information clusters fall back to the prior") {
    // cluster 0 has a subject with omega=kappa=0, cluster 1 is empty
    Eigen::VectorXd omega(1), kappa(1), xb(1), off(1);
    omega << 0.0;
    kappa << 0.0;
    xb << 0.7;
    off << 0.2;
    std::vector<int> active{0};
    std::vector<int> cluster_of{0};
    const double sigma2 = 0.6;
    RngStream rng(23, 0);
    const int n = 100000;
    Eigen::Vector2d sum = Eigen::Vector2d::Zero(), sumsq = Eigen::Vector2d::Zero();
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd u =
            update_frailty(omega, kappa, xb, off, active, cluster_of, 2, sigma2, rng);
        sum += u;
        sumsq += u.cwiseProduct(u);
    }
    for (int g = 0; g < 2; ++g) {
        const double mean = sum[g] / n;
        const double var = sumsq[g] / n - mean * mean;
        CHECK(std::fabs(mean) < 0.02);
        CHECK(var == doctest::Approx(sigma2).epsilon(0.03));
    }
}

TEST_CASE("update_frailty_variance posterior") {
    FrailtyConfig cfg;  // a0 = b0 = 0.01
    SUBCASE("zero effects keep the prior-plus-G/2 form") {
        const int G = 8;
        const Eigen::VectorXd u = Eigen::VectorXd::Zero(G);
        RngStream rng(24, 0);
        const int n = 200000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += update_frailty_variance(u, cfg, rng);
        // mean of InverseGamma(a0+G/2, b0) = b0/(a0+G/2-1)
        const double expect = cfg.variance_prior_rate / (cfg.variance_prior_shape + G / 2.0 - 1.0);
        CHECK(sum / n == doctest::Approx(expect).epsilon(0.03));
    }
    SUBCASE("shape and scale track the sum of squares") {
        const int G = 400;
        Eigen::VectorXd u = Eigen::VectorXd::Constant(G, std::sqrt(0.5));  // sum u^2 = 200
        RngStream rng(24, 1);
        const int n = 100000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += update_frailty_variance(u, cfg, rng);
        // InverseGamma(200.01, 100.01) has mean 100.01/199.01
        CHECK(sum / n == doctest::Approx(100.01 / 199.01).epsilon(0.01));
    }
    SUBCASE("hyperparameters validated") {
        FrailtyConfig bad;
        bad.variance_prior_shape = 0.0;
        RngStream rng(24, 2);
        CHECK_THROWS_AS(update_frailty_variance(Eigen::VectorXd::Zero(3), bad, rng),
                        ValidationError);
    }
}

TEST_CASE("frailty run requires cluster labels") {
    oracles::Ds5 d;
    const SurvivalDataset ds =
        with_intercept(oracles::make_dataset(d.time, d.event, Eigen::MatrixXd::Ones(5, 1)));
    const RiskStructure risk = build_risk_structure(ds);
    PLCoxConfig cfg;
    CHECK_THROWS_AS(run_frailty_gibbs(ds, risk, cfg, FrailtyConfig{}), ValidationError);
}

TEST_CASE("PL frailty draws are recentred and bookkeeping is consistent") {
    ClusteredData cd = simulate_clustered(30, 4, 0.5, 0.4, 91);
    PLCoxConfig cfg;
    cfg.mcmc.n_iter = 400;
    cfg.mcmc.n_burnin = 200;
    cfg.mcmc.seed = 3;
    const PosteriorDraws d = run_frailty_gibbs(cd.ds, cd.risk, cfg, FrailtyConfig{});
    const int G = cd.ds.n_clusters();
    REQUIRE(d.n_params() == cd.ds.p + G + 1);
    CHECK(d.param_names.back() == "sigma2_u");
    for (int k = 0; k < d.n_retained(); ++k) {
        const double umean = d.draws.row(k).segment(cd.ds.p, G).mean();
        CHECK(std::fabs(umean) < 1e-10);
        CHECK(d.draws(k, d.n_params() - 1) > 0.0);
    }
}

TEST_CASE("GPL frailty runs and keeps sigma2 positive") {
    ClusteredData cd = simulate_clustered(25, 4, 0.4, 0.3, 92);
    GPLCoxConfig cfg;
    cfg.mcmc.n_iter = 300;
    cfg.mcmc.n_burnin = 150;
    const PosteriorDraws d = run_frailty_gibbs(cd.ds, cd.risk, cfg, FrailtyConfig{});
    CHECK(d.draws.allFinite());
    for (int k = 0; k < d.n_retained(); ++k) CHECK(d.draws(k, d.n_params() - 1) > 0.0);
}

TEST_CASE("single-cluster frailty collapses toward an intercept-like effect") {
    ClusteredData cd = simulate_clustered(1, 40, 0.3, 0.4, 93);
    PLCoxConfig cfg;
    cfg.mcmc.n_iter = 300;
    cfg.mcmc.n_burnin = 150;
    const PosteriorDraws d = run_frailty_gibbs(cd.ds, cd.risk, cfg, FrailtyConfig{});
    CHECK(d.draws.allFinite());
}

TEST_CASE("pinning the frailty variance to zero recovers the base sampler") {
    ClusteredData cd = simulate_clustered(40, 5, 0.4, 0.5, 94);
    PLCoxConfig cfg;
    cfg.mcmc.n_iter = 1500;
    cfg.mcmc.n_burnin = 500;
    cfg.mcmc.seed = 7;

    FrailtyConfig tight;  // prior mass essentially at sigma2 = 1e-10
    tight.variance_prior_shape = 1e6;
    tight.variance_prior_rate = 1e-4;
    const PosteriorDraws with_frailty = run_frailty_gibbs(cd.ds, cd.risk, cfg, tight);
    const PosteriorDraws without = run_pl_gibbs(cd.ds, cd.risk, cfg);

    const auto interval = [](const PosteriorDraws& d, int col) {
        std::vector<double> v(d.draws.col(col).data(), d.draws.col(col).data() + d.n_retained());
        std::sort(v.begin(), v.end());
        return std::pair<double, double>(v[static_cast<size_t>(0.025 * (v.size() - 1))],
                                         v[static_cast<size_t>(0.975 * (v.size() - 1))]);
    };
    const auto [lo_a, hi_a] = interval(with_frailty, 1);
    const auto [lo_b, hi_b] = interval(without, 1);
    CHECK(lo_a < hi_b);
    CHECK(lo_b < hi_a);
    // frailty variance indeed pinned near zero
    CHECK(with_frailty.draws.col(with_frailty.n_params() - 1).mean() < 1e-6);
}

TEST_CASE("readmissions-shaped run completes and reports a frailty variance") {
    // 403 clusters, 861 records: 348 clusters of 2 and 55 of 3
    std::mt19937 gen(95);
    std::normal_distribution<double> norm(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> time;
    std::vector<int> event;
    std::vector<int> cluster;
    std::vector<double> xs;
    int g = 0;
    for (; g < 348; ++g) {
        for (int k = 0; k < 2; ++k) {
            const double u = 0.7 * norm(gen);
            const double x = norm(gen);
            const double rate = 0.08 * std::exp(0.3 * x + u);
            const double t_event = -std::log(unif(gen)) / rate;
            const double c = 0.5 + 40.0 * unif(gen);
            time.push_back(std::min(t_event, c));
            event.push_back(t_event <= c ? 1 : 0);
            cluster.push_back(g);
            xs.push_back(x);
        }
    }
    for (; g < 403; ++g) {
        for (int k = 0; k < 3; ++k) {
            const double x = norm(gen);
            const double t_event = -std::log(unif(gen)) / (0.08 * std::exp(0.3 * x));
            const double c = 0.5 + 40.0 * unif(gen);
            time.push_back(std::min(t_event, c));
            event.push_back(t_event <= c ? 1 : 0);
            cluster.push_back(g);
            xs.push_back(x);
        }
    }
    REQUIRE(time.size() == 861);
    Eigen::MatrixXd X(861, 1);
    for (int i = 0; i < 861; ++i) X(i, 0) = xs[i];
    const SurvivalDataset ds = with_intercept(oracles::make_dataset(time, event, X, &cluster));
    const RiskStructure risk = build_risk_structure(ds);
    PLCoxConfig cfg;
    cfg.mcmc.n_iter = 200;
    cfg.mcmc.n_burnin = 100;
    const PosteriorDraws d = run_frailty_gibbs(ds, risk, cfg, FrailtyConfig{});
    const PosteriorSummary s = summarize(d);
    const ParamSummary& sigma = s.params.back();
    CHECK(sigma.name == "sigma2_u");
    CHECK(sigma.mean > 0.0);
    CHECK(std::isfinite(sigma.q975));
}

TEST_CASE("frailty variance recovery at reduced scale") {
    ClusteredData cd = simulate_clustered(60, 5, 0.5, 0.3, 96);
    PLCoxConfig cfg;
    cfg.mcmc.n_iter = 1200;
    cfg.mcmc.n_burnin = 400;
    cfg.mcmc.seed = 11;
    const PosteriorDraws d = run_frailty_gibbs(cd.ds, cd.risk, cfg, FrailtyConfig{});
    const double sigma2_mean = d.draws.col(d.n_params() - 1).mean();
    CHECK(sigma2_mean > 0.15);
    CHECK(sigma2_mean < 1.2);
}
