#include "biasci/intervals.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "biasci/calibrate.hpp"
#include "biasci/normal.hpp"

namespace biasci {

namespace {

constexpr std::array<std::string_view, 7> kKindNames = {
    "CI1", "CI2", "CI3", "CI4", "CI5", "CI6", "CI6s"};

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw domain_error("intervals: level must lie in (0,1)");
    }
}

double z_ref(double level) {
    return std_normal_quantile(0.5 * (1.0 + level));
}

Interval plain_interval(CiKind kind, double center, double scale, double level) {
    check_level(level);
    double z = z_ref(level);
    Interval iv;
    iv.kind = kind;
    iv.level = level;
    iv.center = center;
    iv.half_width = z * scale;
    iv.critical_value = z;
    return iv;
}

// Resolve the working s2 under the chosen clip policy.
double effective_s2(double s1, double s2, ClipMode clip, IntervalFlags& flags) {
    if (!(s1 > 0.0)) {
        throw domain_error("intervals: s1 must be positive");
    }
    if (!(s2 >= 0.0)) {
        throw domain_error("intervals: s2 must be >= 0");
    }
    if (s2 > s1) {
        if (clip == ClipMode::reject) {
            throw assumption_error("intervals: s2 > s1 violates the MSE inequality");
        }
        flags.clipped = true;
        return s1;
    }
    return s2;
}

} // namespace

std::string_view to_string(CiKind kind) {
    return kKindNames[static_cast<std::size_t>(kind)];
}

std::optional<CiKind> parse_ci_kind(std::string_view token) {
    std::string lowered(token);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        std::string name(kKindNames[i]);
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char ch) { return std::tolower(ch); });
        if (lowered == name) return static_cast<CiKind>(i);
    }
    return std::nullopt;
}

Interval ci1(double theta1_hat, double s1, double level) {
    if (!(s1 > 0.0)) {
        throw domain_error("ci1: s1 must be positive");
    }
    return plain_interval(CiKind::ci1, theta1_hat, s1, level);
}

Interval ci2(double theta2_hat, double s1, double level) {
    if (!(s1 > 0.0)) {
        throw domain_error("ci2: s1 must be positive");
    }
    return plain_interval(CiKind::ci2, theta2_hat, s1, level);
}

Interval ci3(double theta1_hat, double s2, double level) {
    if (!(s2 >= 0.0)) {
        throw domain_error("ci3: s2 must be >= 0");
    }
    Interval iv = plain_interval(CiKind::ci3, theta1_hat, s2, level);
    iv.flags.undercovers = true;
    iv.flags.zero_width = (s2 == 0.0);
    return iv;
}

Interval ci4(double theta2_hat, double s2, double level) {
    if (!(s2 >= 0.0)) {
        throw domain_error("ci4: s2 must be >= 0");
    }
    Interval iv = plain_interval(CiKind::ci4, theta2_hat, s2, level);
    iv.flags.undercovers = true;
    iv.flags.zero_width = (s2 == 0.0);
    return iv;
}

Interval ci5(double theta2_hat, double s1, double s2, double level, ClipMode clip) {
    check_level(level);
    IntervalFlags flags;
    double s2e = effective_s2(s1, s2, clip, flags);
    Calibration cal = calibrated_z(s1, s2e, level);
    Interval iv;
    iv.kind = CiKind::ci5;
    iv.level = level;
    iv.center = theta2_hat;
    iv.half_width = cal.z_tilde * s1;
    iv.critical_value = cal.z_tilde;
    iv.flags = flags;
    iv.flags.degenerate = cal.degenerate;
    return iv;
}

Interval ci6(double theta1_hat, double theta2_hat, double s1, double s2,
             double rho, double level, bool shrink_rho, ClipMode clip) {
    check_level(level);
    if (!(rho >= -1.0 && rho <= 1.0)) {
        throw domain_error("ci6: rho must lie in [-1,1]");
    }
    IntervalFlags flags;
    double s2e = effective_s2(s1, s2, clip, flags);
    double rho_used = shrink_rho ? 0.5 * (1.0 + rho) : rho;
    OptimalW opt = optimal_w(s1, s2e, rho_used, level);
    Interval iv;
    iv.kind = shrink_rho ? CiKind::ci6s : CiKind::ci6;
    iv.level = level;
    iv.center = (1.0 - opt.w_star) * theta1_hat + opt.w_star * theta2_hat;
    iv.half_width = opt.cal.z_tilde * s1;
    iv.critical_value = opt.cal.z_tilde;
    iv.w = opt.w_star;
    iv.flags = flags;
    iv.flags.degenerate = opt.cal.degenerate;
    return iv;
}

nlohmann::json to_json(const Interval& iv) {
    nlohmann::json j{
        {"kind", to_string(iv.kind)},
        {"level", iv.level},
        {"center", iv.center},
        {"lower", iv.lower()},
        {"upper", iv.upper()},
        {"half_width", iv.half_width},
        {"critical_value", iv.critical_value},
        {"diagnostics",
         {{"undercovers", iv.flags.undercovers},
          {"zero_width", iv.flags.zero_width},
          {"clipped", iv.flags.clipped},
          {"degenerate", iv.flags.degenerate}}},
    };
    if (iv.w) j["w"] = *iv.w;
    return j;
}

} // namespace biasci
