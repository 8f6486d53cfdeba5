#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "biasci/errors.hpp"

#include "json.hpp"

namespace biasci {

enum class CiKind { ci1, ci2, ci3, ci4, ci5, ci6, ci6s };

std::string_view to_string(CiKind kind);
std::optional<CiKind> parse_ci_kind(std::string_view token);

/// What to do when estimated s2 exceeds s1: reject with an
/// assumption_error, or clip s2 to s1 (zero bias bound). Clipping always
/// sets the `clipped` diagnostic on the output.
enum class ClipMode { reject, clip };

struct IntervalFlags {
    bool undercovers = false;   // CI3/CI4 diagnostic comparators
    bool zero_width = false;    // s2 = 0: length zero, 0% CP
    bool clipped = false;       // s2 was clipped to s1
    bool degenerate = false;    // step-function calibration (s2 = 0)
};

/// A symmetric two-sided CI: center +/- half_width at the given level.
struct Interval {
    CiKind kind = CiKind::ci1;
    double level = 0.0;
    double center = 0.0;
    double half_width = 0.0;
    double critical_value = 0.0;  // multiplier on the scale actually used
    std::optional<double> w;      // convex weight, CI6/CI6s only
    IntervalFlags flags;

    double lower() const { return center - half_width; }
    double upper() const { return center + half_width; }
    /// Closed-interval convention: boundary hits count as covered.
    bool covers(double theta) const {
        return std::fabs(center - theta) <= half_width;
    }
};

/// CI1: theta1_hat +/- z*s1, the benchmark.
Interval ci1(double theta1_hat, double s1, double level);

/// CI2: theta2_hat +/- z*s1.
Interval ci2(double theta2_hat, double s1, double level);

/// CI3/CI4 use the biased estimator's standard error and always
/// undercover; provided as diagnostic comparators only.
Interval ci3(double theta1_hat, double s2, double level);
Interval ci4(double theta2_hat, double s2, double level);

/// CI5: theta2_hat +/- z~*s1 with z~ from calibrated_z.
Interval ci5(double theta2_hat, double s1, double s2, double level,
             ClipMode clip = ClipMode::reject);

/// CI6: (1-w*)*theta1_hat + w**theta2_hat +/- z~_{w*}*s1. With shrink_rho
/// the calibration and the weight both use rho' = (1+rho)/2 and the kind
/// tag becomes CI6s.
Interval ci6(double theta1_hat, double theta2_hat, double s1, double s2,
             double rho, double level, bool shrink_rho = false,
             ClipMode clip = ClipMode::reject);

nlohmann::json to_json(const Interval& iv);

} // namespace biasci
