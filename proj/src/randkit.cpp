#include "rankhaz/randkit.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

namespace rankhaz {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream_id) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream_id + 0x632BE59BD9B4E019ULL));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(mix_seed(seed, stream_id)) {}

RngStream RngStream::child(std::uint64_t k) const {
    return RngStream(mix_seed(seed_, stream_id_), k);
}

double RngStream::uniform() {
    // 53-bit mantissa, shifted into the open interval.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double RngStream::exponential() { return -std::log(uniform()); }

// ---------------------------------------------------------------------------
// Polya-Gamma moments

double polya_gamma_mean(double b, double c) {
    const double h = 0.5 * std::fabs(c);
    if (h < 1e-4) {
        // (b/4) * tanh(h)/h expanded around 0
        return 0.25 * b * (1.0 - h * h / 3.0);
    }
    return 0.25 * b * std::tanh(h) / h;
}

double polya_gamma_variance(double b, double c) {
    const double a = std::fabs(c);
    if (a < 1e-3) {
        // (sinh c - c)/c^3 -> 1/6 + c^2/120
        const double series = 1.0 / 6.0 + a * a / 120.0;
        const double ch = std::cosh(0.5 * a);
        return 0.25 * b * series / (ch * ch);
    }
    if (a > 300.0) {
        // sinh(c)/cosh^2(c/2) -> 2 e^{-...}; leading term b/(2c^3)
        return 0.5 * b / (a * a * a);
    }
    const double ch = std::cosh(0.5 * a);
    return 0.25 * b * ((std::sinh(a) - a) / (a * a * a)) / (ch * ch);
}

// ---------------------------------------------------------------------------
// PG(1, c) exact sampler: alternating-series rejection on the mixture
// proposal of a truncated inverse Gaussian and a truncated exponential
// (Polson, Scott & Windle construction).

namespace {

constexpr double kPgTrunc = 0.64;

double log_norm_cdf(double x) {
    // log Phi(x); erfc keeps the left tail alive until ~ -37
    return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
}

// Series coefficient a_k(x) of the J*(1,.) density.
double pg_series_coef(int k, double x) {
    const double K = (k + 0.5) * kPi;
    if (x > kPgTrunc) return K * std::exp(-0.5 * K * K * x);
    if (x > 0.0)
        return std::exp(std::log(K) - 1.5 * (std::log(0.5 * kPi) + std::log(x)) -
                        2.0 * (k + 0.5) * (k + 0.5) / x);
    return 0.0;
}

// Probability of proposing from the exponential (right) piece.
double pg_mass_texpon(double z) {
    const double t = kPgTrunc;
    const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
    const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
    const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);
    const double x0 = std::log(fz) + fz * t;
    const double xb = x0 - z + log_norm_cdf(b);
    const double xa = x0 + z + log_norm_cdf(a);
    const double qdivp = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
    return 1.0 / (1.0 + qdivp);
}

// Inverse Gaussian IG(1/z, 1) truncated to (0, kPgTrunc].
double pg_rtigauss(double z, RngStream& rng) {
    z = std::fabs(z);
    const double t = kPgTrunc;
    double x = t + 1.0;
    if (z < 1.0 / t) {  // mean above the truncation point
        double alpha = 0.0;
        do {
            double e1, e2;
            do {
                e1 = rng.exponential();
                e2 = rng.exponential();
            } while (e1 * e1 > 2.0 * e2 / t);
            x = t / ((1.0 + t * e1) * (1.0 + t * e1));
            alpha = std::exp(-0.5 * z * z * x);
        } while (rng.uniform() > alpha);
    } else {
        const double mu = 1.0 / z;
        do {
            double y = rng.normal();
            y *= y;
            const double mu_y = mu * y;
            x = mu + 0.5 * mu * mu_y - 0.5 * mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
            if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
        } while (x > t);
    }
    return x;
}

double pg_draw_one(double c, RngStream& rng) {
    const double z = 0.5 * std::fabs(c);
    const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
    const double p_right = pg_mass_texpon(z);
    while (true) {
        double x;
        if (rng.uniform() < p_right)
            x = kPgTrunc + rng.exponential() / fz;
        else
            x = pg_rtigauss(z, rng);

        double s = pg_series_coef(0, x);
        const double y = rng.uniform() * s;
        int k = 0;
        while (true) {
            ++k;
            if (k % 2 == 1) {
                s -= pg_series_coef(k, x);
                if (y <= s) return 0.25 * x;
            } else {
                s += pg_series_coef(k, x);
                if (y > s) break;
            }
        }
    }
}

// Truncated sum-of-gammas representation for a fractional shape, with the
// truncated tail replaced by its mean.
double pg_draw_fractional_series(double b, double c, RngStream& rng) {
    constexpr int kTerms = 200;
    const double shift = 0.25 * c * c / (kPi * kPi);
    double sum = 0.0;
    double truncated_mean = 0.0;
    for (int k = 1; k <= kTerms; ++k) {
        const double denom = (k - 0.5) * (k - 0.5) + shift;
        sum += sample_gamma(b, 1.0, rng) / denom;
        truncated_mean += b / denom;
    }
    const double scale = 1.0 / (2.0 * kPi * kPi);
    return sum * scale + (polya_gamma_mean(b, c) - truncated_mean * scale);
}

double pg_draw_gaussian_approx(double b, double c, RngStream& rng) {
    const double m = polya_gamma_mean(b, c);
    const double sd = std::sqrt(polya_gamma_variance(b, c));
    for (int attempt = 0; attempt < 100; ++attempt) {
        const double x = m + sd * rng.normal();
        if (x > 0.0) return x;
    }
    return m;
}

}  // namespace

double sample_polya_gamma(double b, double c, RngStream& rng, const PolyaGammaOptions& opts) {
    if (!(b > 0.0) || !std::isfinite(b))
        throw ValidationError("sample_polya_gamma requires finite b > 0");
    if (!std::isfinite(c)) throw ValidationError("sample_polya_gamma requires finite c");

    const double b_floor = std::floor(b);
    const bool integral = (b == b_floor);
    if (integral && b <= static_cast<double>(opts.convolution_threshold)) {
        double total = 0.0;
        const int m = static_cast<int>(b_floor);
        for (int i = 0; i < m; ++i) total += pg_draw_one(c, rng);
        return total;
    }
    if (opts.exact_fractional && b <= static_cast<double>(opts.convolution_threshold)) {
        double total = 0.0;
        const int m = static_cast<int>(b_floor);
        for (int i = 0; i < m; ++i) total += pg_draw_one(c, rng);
        const double frac = b - b_floor;
        if (frac > 0.0) total += pg_draw_fractional_series(frac, c, rng);
        return total;
    }
    return pg_draw_gaussian_approx(b, c, rng);
}

// ---------------------------------------------------------------------------

double sample_gamma(double shape, double rate, RngStream& rng) {
    if (!(shape > 0.0) || !std::isfinite(shape))
        throw ValidationError("sample_gamma requires finite shape > 0");
    if (!(rate > 0.0) || !std::isfinite(rate))
        throw ValidationError("sample_gamma requires finite rate > 0");

    if (shape < 1.0) {
        // Boost to shape+1 and thin with U^{1/shape}
        const double g = sample_gamma(shape + 1.0, rate, rng);
        return g * std::pow(rng.uniform(), 1.0 / shape);
    }
    // Marsaglia-Tsang squeeze
    const double d = shape - 1.0 / 3.0;
    const double cc = 1.0 / std::sqrt(9.0 * d);
    while (true) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + cc * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return d * v / rate;
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
}

std::int64_t sample_geometric(double p, RngStream& rng) {
    if (!(p > 0.0) || p > 1.0 || !std::isfinite(p))
        throw ValidationError("sample_geometric requires p in (0,1]");
    if (p == 1.0) return 1;
    return sample_geometric_logq(std::log1p(-p), rng);
}

std::int64_t sample_geometric_logq(double log_one_minus_p, RngStream& rng) {
    if (std::isnan(log_one_minus_p) || log_one_minus_p >= 0.0)
        throw ValidationError("sample_geometric_logq requires log(1-p) < 0");
    // ceil(log U / log(1-p)); log_q = -inf (p = 1) gives 0/(-inf) = 0 -> 1
    const double ratio = std::log(rng.uniform()) / log_one_minus_p;
    if (!(ratio < 9.0e18))
        throw NonConvergenceError("geometric draw exceeds 64-bit integer range");
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(ratio)));
}

Eigen::VectorXd sample_mvn_precision(const PrecisionGaussian& gauss, RngStream& rng) {
    const Eigen::Index p = gauss.B.rows();
    if (gauss.B.cols() != p || gauss.g.size() != p)
        throw ValidationError("sample_mvn_precision: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(gauss.B);
    if (llt.info() != Eigen::Success)
        throw CholeskyError("precision matrix is not positive definite");
    const Eigen::VectorXd mean = llt.solve(gauss.g);
    Eigen::VectorXd eps(p);
    for (Eigen::Index i = 0; i < p; ++i) eps[i] = rng.normal();
    // L^T u = eps gives Cov(u) = B^{-1}
    const Eigen::VectorXd noise = llt.matrixU().solve(eps);
    Eigen::VectorXd draw = mean + noise;
    if (!draw.allFinite())
        throw CholeskyError("non-finite draw from precision Gaussian (ill-conditioned B)");
    return draw;
}

}  // namespace rankhaz
