#include "biasci/calibrate.hpp"

#include <cmath>
#include <functional>

#include "biasci/coverage.hpp"
#include "biasci/normal.hpp"

namespace biasci {

namespace {

constexpr double kCpResidualTol = 1e-10;
constexpr int kWGridPoints = 1001;
constexpr double kWRefineTol = 1e-6;

void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw domain_error("calibrate: level must lie in (0,1)");
    }
}

void check_scales(double s1, double s2) {
    if (!(s1 > 0.0) || !std::isfinite(s1)) {
        throw domain_error("calibrate: s1 must be positive and finite");
    }
    if (!(s2 >= 0.0) || !std::isfinite(s2)) {
        throw domain_error("calibrate: s2 must be >= 0 and finite");
    }
    if (s2 > s1) {
        throw assumption_error("calibrate: s2 > s1 violates the MSE inequality");
    }
}

// Bisection for the unique root of cp(z) = level on (0, 10*z_ref].
// cp is strictly increasing in z with cp(0+) = 0 and sup = 1.
double solve_z(const std::function<double(double)>& cp, double level) {
    double z_ref = std_normal_quantile(0.5 * (1.0 + level));
    double lo = 0.0; // cp(0+) - level = -level < 0, no evaluation needed
    double hi = 10.0 * z_ref;
    if (!(cp(hi) >= level)) {
        throw numeric_error("calibrate: bracket [0, 10*z_ref] has no sign change");
    }
    double mid = 0.5 * (lo + hi);
    for (int i = 0; i < 200; ++i) {
        mid = 0.5 * (lo + hi);
        double r = cp(mid) - level;
        if (std::fabs(r) <= kCpResidualTol) return mid;
        if (r < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-15 * (1.0 + hi)) break;
    }
    return mid;
}

Calibration make_cal(double z_tilde, double level, double ratio,
                     std::optional<double> rho, double w, bool degenerate) {
    Calibration cal;
    cal.z_tilde = z_tilde;
    cal.level = level;
    cal.s2_over_s1 = ratio;
    cal.rho = rho;
    cal.w = w;
    cal.bias_bound_over_s1 = std::sqrt(std::max(0.0, 1.0 - ratio * ratio));
    cal.degenerate = degenerate;
    return cal;
}

} // namespace

Calibration calibrated_z(double s1, double s2, double level) {
    check_level(level);
    check_scales(s1, s2);
    double ratio = s2 / s1;
    if (ratio == 0.0) {
        // CP in z is a step at z = 1 (point mass at the bias bound)
        return make_cal(1.0, level, ratio, std::nullopt, 1.0, true);
    }
    double t = std::acos(ratio);
    double z = solve_z([t](double zz) { return cp_t(t, zz); }, level);
    return make_cal(z, level, ratio, std::nullopt, 1.0, false);
}

Calibration calibrated_z_w(double s1, double s2, double rho, double level, double w) {
    check_level(level);
    check_scales(s1, s2);
    if (!(rho >= -1.0 && rho <= 1.0)) {
        throw domain_error("calibrate: rho must lie in [-1,1]");
    }
    if (!(w >= 0.0 && w <= 1.0)) {
        throw domain_error("calibrate: weight must lie in [0,1]");
    }
    double ratio = s2 / s1;
    if (w == 0.0) {
        // all weight on the unbiased estimator: the usual quantile
        return make_cal(std_normal_quantile(0.5 * (1.0 + level)), level, ratio, rho, 0.0, false);
    }
    if (w == 1.0 && ratio == 0.0) {
        return make_cal(1.0, level, ratio, rho, 1.0, true);
    }
    double t = std::acos(ratio);
    double z = solve_z([=](double zz) { return cp_w(t, zz, w, rho); }, level);
    return make_cal(z, level, ratio, rho, w, false);
}

OptimalW optimal_w(double s1, double s2, double rho, double level) {
    check_level(level);
    check_scales(s1, s2);
    if (!(rho >= -1.0 && rho <= 1.0)) {
        throw domain_error("calibrate: rho must lie in [-1,1]");
    }
    double grid_z[kWGridPoints];
    int best_i = 0;
    for (int i = 0; i < kWGridPoints; ++i) {
        double w = static_cast<double>(i) / (kWGridPoints - 1);
        grid_z[i] = calibrated_z_w(s1, s2, rho, level, w).z_tilde;
        if (grid_z[i] <= grid_z[best_i]) best_i = i; // <=: ties go to larger w
    }
    int local_minima = 0;
    for (int i = 0; i < kWGridPoints; ++i) {
        bool left_up = (i == 0) || grid_z[i] < grid_z[i - 1];
        bool right_up = (i == kWGridPoints - 1) || grid_z[i] < grid_z[i + 1];
        if (left_up && right_up) ++local_minima;
    }

    double lo = static_cast<double>(std::max(0, best_i - 1)) / (kWGridPoints - 1);
    double hi = static_cast<double>(std::min(kWGridPoints - 1, best_i + 1)) / (kWGridPoints - 1);
    constexpr double invphi = 0.6180339887498949;
    double best_w = static_cast<double>(best_i) / (kWGridPoints - 1);
    double best_z = grid_z[best_i];
    auto probe = [&](double w) {
        double z = calibrated_z_w(s1, s2, rho, level, w).z_tilde;
        if (z < best_z || (z == best_z && w > best_w)) {
            best_z = z;
            best_w = w;
        }
        return z;
    };
    double x1 = hi - invphi * (hi - lo);
    double x2 = lo + invphi * (hi - lo);
    double f1 = probe(x1);
    double f2 = probe(x2);
    while (hi - lo > kWRefineTol) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - invphi * (hi - lo);
            f1 = probe(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + invphi * (hi - lo);
            f2 = probe(x2);
        }
    }

    OptimalW out;
    out.w_star = best_w;
    out.cal = calibrated_z_w(s1, s2, rho, level, best_w);
    out.grid_local_minima = local_minima;
    return out;
}

std::vector<LengthRatioRow> length_ratio_table(double level,
                                               std::span<const double> s2_over_s1_grid,
                                               std::span<const double> rho_grid) {
    check_level(level);
    double z_ref = std_normal_quantile(0.5 * (1.0 + level));
    std::vector<LengthRatioRow> rows;
    for (double ratio : s2_over_s1_grid) {
        double ratio_ci5 = calibrated_z(1.0, ratio, level).z_tilde / z_ref;
        if (rho_grid.empty()) {
            rows.push_back({ratio, std::nullopt, ratio_ci5, std::nullopt});
            continue;
        }
        for (double rho : rho_grid) {
            double ratio_ci6 = optimal_w(1.0, ratio, rho, level).cal.z_tilde / z_ref;
            rows.push_back({ratio, rho, ratio_ci5, ratio_ci6});
        }
    }
    return rows;
}

} // namespace biasci
