#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "biasci/errors.hpp"

namespace biasci {

/// Standard normal CDF Phi(x). Computed through erfc so that both tails
/// keep full relative precision; the coverage formulas evaluate arguments
/// as deep as -2z - sqrt(3). Absolute error <= 1e-14.
double std_normal_cdf(double x);

/// Standard normal density phi(x).
double std_normal_pdf(double x);

/// Quantile z_p with std_normal_cdf(z_p) = p within 1e-12, for p in (0,1).
/// Rational initial approximation polished by two Newton steps.
double std_normal_quantile(double p);

/// RNG seed. Equal seeds produce bit-identical sample streams.
struct Seed {
    std::uint64_t value = 0;
};

/// Derive an independent sub-seed by keyed mixing of up to three stream
/// indices. Per-replication streams are derived this way so that results
/// do not depend on thread count or chunking.
Seed derive_seed(Seed base, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

/// Counter-based generator: the i-th output is mix64(key + i*GAMMA) where
/// mix64 is the splitmix64 finalizer and key is derived from the seed.
/// Instances own no shared state; create one per worker/replication.
class Rng {
public:
    explicit Rng(Seed seed);

    std::uint64_t next_u64();

    /// Uniform draw strictly inside (0,1): ((u >> 11) + 0.5) * 2^-53.
    double next_uniform();

    /// Standard normal via the inverse CDF.
    double next_normal();

    /// Uniform integer in [0, n); n > 0. Multiply-shift reduction.
    std::uint64_t next_below(std::uint64_t n);

private:
    std::uint64_t state_;
};

/// n i.i.d. draws from the bivariate normal with means (mu1, mu2),
/// standard deviations (s1, s2) and correlation rho, built from two
/// independent standard normals: x2 = mu2 + s2*(rho*z1 + sqrt(1-rho^2)*z2).
/// Deterministic given the seed.
std::vector<std::pair<double, double>> sample_bivariate(
    double mu1, double mu2, double s1, double s2, double rho,
    Seed seed, std::size_t n);

} // namespace biasci
