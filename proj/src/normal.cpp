#include "biasci/normal.hpp"

#include <cmath>
#include <limits>

namespace biasci {

namespace {

constexpr double kSqrt1_2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// splitmix64 finalizer (Vigna / Steele-Lea-Flood).
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Acklam-style rational approximation to the normal quantile,
// relative error ~1.15e-9 before polishing.
double quantile_estimate(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    if (p < p_low) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // central region; callers only pass p <= 0.5
    double q = p - 0.5;
    double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Quantile on (0, 0.5]: estimate + two Newton steps through the
// tail-stable CDF.
double quantile_lower(double p) {
    double z = quantile_estimate(p);
    for (int i = 0; i < 2; ++i) {
        double err = std_normal_cdf(z) - p;
        z -= err / std_normal_pdf(z);
    }
    return z;
}

} // namespace

double std_normal_cdf(double x) {
    if (!std::isfinite(x)) {
        throw domain_error("std_normal_cdf: x must be finite");
    }
    return 0.5 * std::erfc(-x * kSqrt1_2);
}

double std_normal_pdf(double x) {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw domain_error("std_normal_quantile: p must lie in (0,1)");
    }
    if (p == 0.5) return 0.0;
    // 1-p is exact for p >= 0.5 (Sterbenz), so both tails are solved on
    // the numerically favorable side.
    if (p > 0.5) return -quantile_lower(1.0 - p);
    return quantile_lower(p);
}

Seed derive_seed(Seed base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t s = mix64(base.value + kGamma);
    s = mix64(s ^ (a + kGamma));
    s = mix64(s ^ (b + kGamma));
    s = mix64(s ^ (c + kGamma));
    return Seed{s};
}

Rng::Rng(Seed seed) : state_(mix64(seed.value + kGamma)) {}

std::uint64_t Rng::next_u64() {
    state_ += kGamma;
    return mix64(state_);
}

double Rng::next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::next_normal() {
    return std_normal_quantile(next_uniform());
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    // multiply-shift; bias is O(n / 2^64), immaterial at desk scale
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

std::vector<std::pair<double, double>> sample_bivariate(
    double mu1, double mu2, double s1, double s2, double rho,
    Seed seed, std::size_t n) {
    if (!(s1 >= 0.0) || !(s2 >= 0.0)) {
        throw domain_error("sample_bivariate: standard deviations must be >= 0");
    }
    if (!(rho >= -1.0 && rho <= 1.0)) {
        throw domain_error("sample_bivariate: rho must lie in [-1,1]");
    }
    const double cross = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    Rng rng(seed);
    std::vector<std::pair<double, double>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double z1 = rng.next_normal();
        double z2 = rng.next_normal();
        out.emplace_back(mu1 + s1 * z1, mu2 + s2 * (rho * z1 + cross * z2));
    }
    return out;
}

} // namespace biasci
