#pragma once

#include <optional>

#include "biasci/errors.hpp"

namespace biasci {

/// Joint-normal sampling model for the estimator pair: theta1_hat is
/// unbiased with sd s1, theta2_hat has bias b2 and sd s2, and the MSE
/// inequality b2^2 + s2^2 <= s1^2 holds. rho is the correlation between
/// the two estimators when known.
struct EstimatorModel {
    double theta = 0.0; // true parameter, simulation-only
    double b2 = 0.0;
    double s1 = 1.0;
    double s2 = 1.0;
    std::optional<double> rho;

    /// Largest |b2| consistent with the MSE inequality: sqrt(s1^2 - s2^2).
    double bias_bound() const;

    /// Throws domain_error / assumption_error if the invariants fail.
    /// The MSE inequality is checked with 1e-12 relative slack so that
    /// boundary models built from bias_bound() validate.
    void validate() const;
};

/// Coverage probability of theta2_hat +/- z*s1 on the equal-MSE frontier
/// b2 = s1*sin(t), s2 = s1*cos(t):
///   CP(t,z) = Phi(z*sec(t) - tan(t)) - Phi(-z*sec(t) - tan(t)).
/// At t = pi/2 the analytic limit is a step: 1 if z >= 1, else 0.
double cp_t(double t, double z);

/// Coverage probability of theta2_hat +/- z*s1 at bias b2:
///   Phi((z*s1 - b2)/s2) - Phi((-z*s1 - b2)/s2).
/// Even in b2 (computed from |b2| so evenness is exact). For s2 = 0 the
/// distribution is a point mass and the CP is the indicator |b2| <= z*s1.
double cp_from_bias(double b2, double s1, double s2, double z);

/// Coverage probability of the convex combination (1-w)*theta1_hat +
/// w*theta2_hat +/- z*s1 on the equal-MSE frontier, with correlation rho.
/// Reduces to cp_t at w = 1 and to 2*Phi(z)-1 at w = 0. Throws
/// domain_error for the degenerate zero-variance combination (interior w
/// with rho = -1 and cos(t) = (1-w)/w).
double cp_w(double t, double z, double w, double rho);

/// General-bias version of cp_w: coverage of the convex combination
/// interval when the bias of theta2_hat is b2 (not necessarily on the
/// equal-MSE frontier). The combination is normal with bias w*b2 and sd
/// s3w = sqrt((1-w)^2 s1^2 + w^2 s2^2 + 2 rho w (1-w) s1 s2).
double cp_w_from_bias(double b2, double s1, double s2, double rho, double w, double z);

struct WorstCase {
    double t_min = 0.0;
    double cp_min = 0.0;
};

/// Global minimum of cp_t(., z) over [0, pi/2]: dense grid (2001 points)
/// followed by golden-section refinement to |dt| <= 1e-8. No unimodality
/// is assumed.
WorstCase worst_case_cp(double z);

/// Same search for cp_w(., z, w, rho).
WorstCase worst_case_cp_w(double z, double w, double rho);

/// The confidence level L* at which min_t CP(t, z_{(1+L)/2}) = L: below
/// L* the worst-case coverage drops under the nominal level. Solved by
/// bisection on L in [0.85, 0.95] to width <= tol.
double coverage_threshold_level(double tol);

} // namespace biasci
