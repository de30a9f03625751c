#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "rankhaz/common.hpp"

namespace rankhaz {

// Reproducible seeded stream. The engine seed is derived from (seed,
// stream_id) by splitmix64 mixing, so the same pair always reproduces the
// same variate sequence and distinct stream ids give unrelated streams.
// Variate transforms are implemented here rather than taken from
// <random> distributions so that sequences are identical across standard
// library implementations.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

    // Derived substream k of this stream (used for per-chain /
    // per-replication splitting).
    RngStream child(std::uint64_t k) const;

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64() { return engine_(); }
    double uniform();      // open interval (0,1)
    double normal();       // standard normal, Box-Muller
    double exponential();  // rate 1

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::mt19937_64 engine_;
};

// Parameters of N(B^{-1} g, B^{-1}) held in precision form.
struct PrecisionGaussian {
    Eigen::VectorXd g;
    Eigen::MatrixXd B;  // symmetric positive definite
};

struct PolyaGammaOptions {
    // Integer shapes up to this bound are drawn as exact convolutions of
    // PG(1,c); larger or fractional shapes use a moment-matched Gaussian.
    int convolution_threshold = 20;
    // Experimental: draw fractional shape parts from the truncated
    // sum-of-gammas series instead of the Gaussian approximation.
    bool exact_fractional = false;
};

// E[PG(b,c)] and Var[PG(b,c)].
double polya_gamma_mean(double b, double c);
double polya_gamma_variance(double b, double c);

// Draw from the Polya-Gamma distribution PG(b, c), b > 0.
double sample_polya_gamma(double b, double c, RngStream& rng,
                          const PolyaGammaOptions& opts = {});

// Gamma(shape, rate), mean shape/rate.
double sample_gamma(double shape, double rate, RngStream& rng);

// Geometric on {1,2,...} with P(Z=k) = p(1-p)^{k-1}.
std::int64_t sample_geometric(double p, RngStream& rng);

// Same distribution with the success probability supplied as log(1-p),
// which stays accurate when p is within rounding of 1 or of 0.
std::int64_t sample_geometric_logq(double log_one_minus_p, RngStream& rng);

// Draw from N(B^{-1} g, B^{-1}) via Cholesky of B; no inverse is formed.
// Throws CholeskyError when B is not numerically positive definite.
Eigen::VectorXd sample_mvn_precision(const PrecisionGaussian& gauss, RngStream& rng);

}  // namespace rankhaz
