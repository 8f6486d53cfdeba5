#pragma once

#include <optional>
#include <span>
#include <vector>

#include "biasci/errors.hpp"

namespace biasci {

/// A solved critical value together with the inputs that define it.
/// Invariant: cp_w(acos(s2_over_s1), z_tilde, w, rho) = level within the
/// solver tolerance (1e-10 on the CP residual), unless `degenerate`.
struct Calibration {
    double z_tilde = 0.0;
    double level = 0.0;
    double s2_over_s1 = 1.0;
    std::optional<double> rho;
    double w = 1.0;
    double bias_bound_over_s1 = 0.0;
    /// s2 = 0 makes the CP a step function of z; z_tilde is then the
    /// minimal critical value (exactly 1) giving full coverage.
    bool degenerate = false;
};

/// Critical value z~ solving cp_t(acos(s2/s1), z~) = level. Unique by
/// monotonicity of CP in z; bracketed bisection to |residual| <= 1e-10.
/// Depends on (s1, s2) only through s2/s1.
Calibration calibrated_z(double s1, double s2, double level);

/// Critical value z~_w solving cp_w(acos(s2/s1), z~_w, w, rho) = level.
Calibration calibrated_z_w(double s1, double s2, double rho, double level, double w);

struct OptimalW {
    double w_star = 1.0;
    Calibration cal;
    /// Number of strict local minima of z~_w seen on the grid; values
    /// above 1 mean the profile was not unimodal in w.
    int grid_local_minima = 1;
};

/// Length-minimizing convex weight: w* = argmin_{w in [0,1]} z~_w,
/// located on a 1001-point grid and refined by golden section to
/// |dw| <= 1e-6. Ties break toward larger w.
OptimalW optimal_w(double s1, double s2, double rho, double level);

struct LengthRatioRow {
    double s2_over_s1 = 1.0;
    std::optional<double> rho;
    double ratio_ci5 = 1.0;            // z~ / z_{(1+level)/2}
    std::optional<double> ratio_ci6;   // z~_{w*} / z_{(1+level)/2}
};

/// Length-ratio table over grids of s2/s1 (and optionally rho). The CI5
/// column does not depend on rho. Pass an empty rho grid to omit CI6.
std::vector<LengthRatioRow> length_ratio_table(double level,
                                               std::span<const double> s2_over_s1_grid,
                                               std::span<const double> rho_grid = {});

} // namespace biasci
