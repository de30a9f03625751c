#include <doctest.h>

#include <cmath>
#include <vector>

#include "rankhaz/randkit.hpp"

using namespace rankhaz;

namespace {

struct MomentStats {
    double mean, se_mean, var, se_var;
};

template <class Draw>
MomentStats empirical_moments(int n, Draw draw) {
    std::vector<double> xs(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        xs[i] = draw();
        sum += xs[i];
    }
    const double mean = sum / n;
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    const double var = m2 / (n - 1);
    MomentStats st;
    st.mean = mean;
    st.var = var;
    st.se_mean = std::sqrt(var / n);
    st.se_var = std::sqrt(std::max(0.0, m4 / n - var * var) / n);
    return st;
}

}  // namespace

TEST_CASE("streams are reproducible and distinct") {
    RngStream a(123, 5), b(123, 5), c(123, 6);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        const double ua = a.uniform();
        all_equal = all_equal && (ua == b.uniform());
        any_diff = any_diff || (ua != c.uniform());
    }
    CHECK(all_equal);
    CHECK(any_diff);

    RngStream p(9, 0), q(9, 0);
    for (int i = 0; i < 200; ++i) {
        CHECK(sample_gamma(2.5, 1.3, p) == sample_gamma(2.5, 1.3, q));
        CHECK(sample_polya_gamma(3, 0.7, p) == sample_polya_gamma(3, 0.7, q));
    }

    RngStream child1 = RngStream(7, 1).child(3);
    RngStream child2 = RngStream(7, 1).child(3);
    CHECK(child1.uniform() == child2.uniform());
}

TEST_CASE("polya-gamma closed-form moments") {
    CHECK(polya_gamma_mean(1, 0) == doctest::Approx(0.25));
    CHECK(polya_gamma_mean(2, 1) == doctest::Approx(std::tanh(0.5)));
    CHECK(polya_gamma_variance(1, 0) == doctest::Approx(1.0 / 24.0));
    // continuity of the small-|c| series switch
    CHECK(polya_gamma_mean(1, 1e-4) == doctest::Approx(polya_gamma_mean(1, 1.0001e-4)).epsilon(1e-6));
    CHECK(polya_gamma_variance(3, 9e-4) ==
          doctest::Approx(polya_gamma_variance(3, 1.1e-3)).epsilon(1e-5));
    // large-|c| asymptotic branch stays finite and continuous
    CHECK(polya_gamma_variance(2, 299.0) ==
          doctest::Approx(polya_gamma_variance(2, 301.0)).epsilon(0.05));
    CHECK(std::isfinite(polya_gamma_variance(1000, 700.0)));
}

TEST_CASE("polya-gamma sampler matches its moments") {
    const int n = 100000;
    SUBCASE("PG(1,0) mean 1/4 and variance 1/24") {
        RngStream rng(2024, 0);
        const auto st = empirical_moments(n, [&] { return sample_polya_gamma(1, 0, rng); });
        CHECK(std::fabs(st.mean - 0.25) < 3 * st.se_mean);
        CHECK(std::fabs(st.var - 1.0 / 24.0) < 3 * st.se_var);
    }
    SUBCASE("PG(2,1) mean tanh(1/2)") {
        RngStream rng(2024, 1);
        const auto st = empirical_moments(n, [&] { return sample_polya_gamma(2, 1, rng); });
        CHECK(std::fabs(st.mean - 0.46211715726000974) < 3 * st.se_mean);
    }
    SUBCASE("moment closure over the (b,c) grid") {
        int stream = 10;
        for (double b : {1.0, 2.0, 10.0, 100.0}) {
            for (double c : {0.0, 0.5, 2.0, 5.0}) {
                RngStream rng(99, stream++);
                const auto st =
                    empirical_moments(n, [&] { return sample_polya_gamma(b, c, rng); });
                const double expect = polya_gamma_mean(b, c);
                INFO("b=", b, " c=", c);
                CHECK(std::fabs(st.mean - expect) < 4 * st.se_mean);
            }
        }
    }
    SUBCASE("additivity: PG(2,c) matches the sum of two PG(1,c)") {
        for (double c : {0.0, 1.5}) {
            RngStream r1(5, 1), r2(5, 2);
            const auto one = empirical_moments(
                n, [&] { return sample_polya_gamma(2, c, r1); });
            const auto two = empirical_moments(n, [&] {
                return sample_polya_gamma(1, c, r2) + sample_polya_gamma(1, c, r2);
            });
            CHECK(std::fabs(one.mean - two.mean) <
                  4 * std::sqrt(one.se_mean * one.se_mean + two.se_mean * two.se_mean));
        }
    }
    SUBCASE("large-shape branch stays positive, finite and calibrated") {
        RngStream rng(77, 0);
        const auto st = empirical_moments(20000, [&] { return sample_polya_gamma(500, 2, rng); });
        CHECK(std::fabs(st.mean - polya_gamma_mean(500, 2)) < 4 * st.se_mean);
        RngStream rng2(77, 1);
        for (int i = 0; i < 1000; ++i) {
            const double x = sample_polya_gamma(500, 2, rng2);
            CHECK(x > 0);
            CHECK(std::isfinite(x));
        }
    }
    SUBCASE("experimental fractional-shape series") {
        PolyaGammaOptions opts;
        opts.exact_fractional = true;
        RngStream rng(31, 0);
        const auto st = empirical_moments(
            50000, [&] { return sample_polya_gamma(2.5, 1.0, rng, opts); });
        CHECK(std::fabs(st.mean - polya_gamma_mean(2.5, 1.0)) < 4 * st.se_mean);
    }
    SUBCASE("validation") {
        RngStream rng(1, 0);
        CHECK_THROWS_AS(sample_polya_gamma(0, 1, rng), ValidationError);
        CHECK_THROWS_AS(sample_polya_gamma(-1, 1, rng), ValidationError);
        CHECK_THROWS_AS(sample_polya_gamma(1, std::nan(""), rng), ValidationError);
    }
}

TEST_CASE("gamma sampler") {
    const int n = 100000;
    SUBCASE("mean of Gamma(3,2)") {
        RngStream rng(55, 0);
        const auto st = empirical_moments(n, [&] { return sample_gamma(3, 2, rng); });
        CHECK(std::fabs(st.mean - 1.5) < 3 * st.se_mean);
    }
    SUBCASE("shape 1 is exponential") {
        RngStream rng(55, 1);
        int over = 0;
        for (int i = 0; i < n; ++i) over += sample_gamma(1, 1, rng) > 1.0 ? 1 : 0;
        const double phat = static_cast<double>(over) / n;
        const double expect = std::exp(-1.0);
        CHECK(std::fabs(phat - expect) < 3 * std::sqrt(expect * (1 - expect) / n));
    }
    SUBCASE("fractional shape") {
        RngStream rng(55, 2);
        const auto st = empirical_moments(n, [&] { return sample_gamma(0.4, 1.5, rng); });
        CHECK(std::fabs(st.mean - 0.4 / 1.5) < 4 * st.se_mean);
    }
    SUBCASE("validation") {
        RngStream rng(1, 0);
        CHECK_THROWS_AS(sample_gamma(0, 1, rng), ValidationError);
        CHECK_THROWS_AS(sample_gamma(1, 0, rng), ValidationError);
        CHECK_THROWS_AS(sample_gamma(-2, 1, rng), ValidationError);
    }
}

TEST_CASE("geometric sampler") {
    SUBCASE("p=1 is the constant 1") {
        RngStream rng(8, 0);
        for (int i = 0; i < 100; ++i) CHECK(sample_geometric(1.0, rng) == 1);
    }
    SUBCASE("mean 1/p") {
        RngStream rng(8, 1);
        const int n = 100000;
        const auto st = empirical_moments(
            n, [&] { return static_cast<double>(sample_geometric(0.25, rng)); });
        CHECK(std::fabs(st.mean - 4.0) < 3 * st.se_mean);
    }
    SUBCASE("log-complement form avoids cancellation") {
        RngStream rng(8, 2);
        for (int i = 0; i < 1000; ++i) {
            const std::int64_t z = sample_geometric_logq(-1e-12, rng);
            CHECK(z >= 1);
        }
    }
    SUBCASE("memorylessness at desk scale") {
        RngStream rng(8, 3);
        const double p = 0.3;
        const int n = 200000;
        long over1 = 0, over2 = 0;
        for (int i = 0; i < n; ++i) {
            const auto z = sample_geometric(p, rng);
            if (z > 2) ++over1;
            if (z > 3) ++over2;
        }
        // P(Z > k+1 | Z > k) = 1 - p
        const double cond = static_cast<double>(over2) / over1;
        CHECK(std::fabs(cond - (1.0 - p)) < 0.01);
    }
    SUBCASE("validation") {
        RngStream rng(1, 0);
        CHECK_THROWS_AS(sample_geometric(0.0, rng), ValidationError);
        CHECK_THROWS_AS(sample_geometric(1.5, rng), ValidationError);
        CHECK_THROWS_AS(sample_geometric_logq(0.0, rng), ValidationError);
        CHECK_THROWS_AS(sample_geometric_logq(0.5, rng), ValidationError);
    }
}

TEST_CASE("multivariate normal from precision form") {
    SUBCASE("identity precision gives standard normals") {
        PrecisionGaussian g{Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()};
        RngStream rng(3, 0);
        const int n = 50000;
        Eigen::Vector2d mean = Eigen::Vector2d::Zero();
        Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
        for (int i = 0; i < n; ++i) {
            const Eigen::VectorXd x = sample_mvn_precision(g, rng);
            mean += x;
            cov += x * x.transpose();
        }
        mean /= n;
        cov = cov / n - mean * mean.transpose();
        CHECK(mean.norm() < 0.02);
        CHECK((cov - Eigen::Matrix2d::Identity()).norm() < 0.03);
    }
    SUBCASE("B=diag(4), g=8 has mean 2 and variance 1/4") {
        Eigen::VectorXd gv(1);
        gv << 8.0;
        Eigen::MatrixXd B(1, 1);
        B << 4.0;
        PrecisionGaussian g{gv, B};
        RngStream rng(3, 1);
        const auto st = empirical_moments(100000, [&] { return sample_mvn_precision(g, rng)[0]; });
        CHECK(std::fabs(st.mean - 2.0) < 3 * st.se_mean);
        CHECK(std::fabs(st.var - 0.25) < 3 * st.se_var);
    }
    SUBCASE("singular precision raises instead of returning NaN") {
        Eigen::MatrixXd B(2, 2);
        B << 1, 1, 1, 1;
        PrecisionGaussian g{Eigen::Vector2d::Ones(), B};
        RngStream rng(3, 2);
        CHECK_THROWS_AS(sample_mvn_precision(g, rng), CholeskyError);
    }
}
