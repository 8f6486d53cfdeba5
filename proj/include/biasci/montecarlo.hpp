#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "biasci/coverage.hpp"
#include "biasci/intervals.hpp"
#include "biasci/normal.hpp"

#include "json.hpp"

namespace biasci {

struct SimulationConfig {
    EstimatorModel model;
    double level = 0.95;
    std::size_t n_reps = 1;
    Seed seed;
    std::vector<CiKind> kinds;
    int n_threads = 0; // 0: hardware concurrency
};

struct KindSummary {
    CiKind kind = CiKind::ci1;
    double coverage = 0.0;
    double mc_stderr = 0.0;     // sqrt(cov*(1-cov)/n_reps)
    double median_length = 0.0;
};

struct SimulationResult {
    SimulationConfig config; // echo
    std::vector<KindSummary> kinds;
};

/// Draw (theta1_hat, theta2_hat) n_reps times from the model and record
/// the empirical coverage and length of each requested interval kind,
/// built from the model's true (s1, s2, rho). Deterministic given the
/// seed, independent of thread count (per-replication sub-streams).
SimulationResult simulate_joint_normal(const SimulationConfig& cfg);

struct Observation {
    double x = 0.0;
    double y = 0.0;
};

using Estimator = std::function<double(std::span<const Observation>)>;

struct BootstrapEstimates {
    double s1_hat = 0.0;
    double s2_hat = 0.0;
    double rho_hat = 0.0;
    std::size_t n_boot = 0;
    /// A replicate series had zero variance; rho_hat is reported as 0.
    bool rho_degenerate = false;
    std::size_t n_retries = 0;
};

/// Nonparametric pairs bootstrap: n_boot resamples of whole rows with
/// replacement; s-hats are the sample standard deviations of the two
/// estimate sequences and rho_hat their sample correlation clamped to
/// [-1,1]. An estimator failure on a resample is recorded and the
/// resample redrawn, at most 10 retries each.
BootstrapEstimates pairs_bootstrap(std::span<const Observation> data,
                                   const Estimator& estimator1,
                                   const Estimator& estimator2,
                                   std::size_t n_boot, Seed seed);

struct DemoData {
    std::vector<Observation> rows;
    double true_theta = 0.0;
};

/// Built-in data-generating process: y = 1 + 2x + u with x, u
/// independent standard normals. The estimator pair for it is the OLS
/// slope (unbiased) versus the ridge slope with fixed penalty 4/sqrt(n),
/// which shrinks toward zero, trading bias for lower variance.
DemoData demo_dgp(std::size_t n, Seed seed);

double ols_slope(std::span<const Observation> rows);
double ridge_slope(std::span<const Observation> rows, double penalty);
double demo_ridge_penalty(std::size_t n);

struct StudyCell {
    std::size_t n = 0;
    double level = 0.95;
};

struct StudyRow {
    std::size_t n = 0;
    double level = 0.95;
    std::string tag; // stand-in estimator pair label
    std::vector<KindSummary> kinds; // CI1, CI2, CI5, CI6s, CI6
    double clip_rate = 0.0;
};

/// Full-pipeline study over (n, level) cells: per replication, draw demo
/// data, bootstrap (s1, s2, rho), build CI1/CI2/CI5/CI6s/CI6 in clip
/// mode, and record coverage of the true slope and the lengths.
/// Bit-identical output for equal master seeds regardless of n_threads.
std::vector<StudyRow> run_study(std::span<const StudyCell> grid,
                                std::size_t sim_reps, std::size_t n_boot,
                                Seed master_seed, int n_threads = 0);

std::string simulation_csv(const SimulationResult& result);
nlohmann::json simulation_json(const SimulationResult& result);

std::string study_csv(std::span<const StudyRow> rows);
nlohmann::json study_json(std::span<const StudyRow> rows);

} // namespace biasci
