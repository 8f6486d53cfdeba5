#include "doctest.h"

#include <cmath>

#include "biasci/calibrate.hpp"
#include "biasci/montecarlo.hpp"
#include "oracles.hpp"

using namespace biasci;

namespace {

SimulationConfig make_config(EstimatorModel model, double level, std::size_t reps,
                             std::uint64_t seed, std::vector<CiKind> kinds) {
    SimulationConfig cfg;
    cfg.model = model;
    cfg.level = level;
    cfg.n_reps = reps;
    cfg.seed = Seed{seed};
    cfg.kinds = std::move(kinds);
    return cfg;
}

const KindSummary& find_kind(const SimulationResult& result, CiKind kind) {
    for (const KindSummary& s : result.kinds) {
        if (s.kind == kind) return s;
    }
    REQUIRE(false);
    return result.kinds.front();
}

} // namespace

TEST_CASE("simulate_joint_normal: benchmark CI1 covers at the nominal rate") {
    EstimatorModel model{0.7, 0.0, 1.0, 1.0, std::nullopt};
    auto result = simulate_joint_normal(
        make_config(model, 0.95, 1000000, 31415, {CiKind::ci1}));
    const KindSummary& s = find_kind(result, CiKind::ci1);
    CHECK(std::fabs(s.coverage - 0.95) < 0.001);
    CHECK(std::fabs(s.median_length - 2.0 * oracles::kZ975) < 1e-8);
    CHECK(std::fabs(s.mc_stderr - std::sqrt(s.coverage * (1 - s.coverage) / 1e6)) < 1e-15);
}

TEST_CASE("simulate_joint_normal: worked example at the equal-MSE bound") {
    EstimatorModel model{0.0, std::sqrt(3.0) / 2.0, 1.0, 0.5, std::nullopt};
    auto result = simulate_joint_normal(
        make_config(model, 0.95, 200000, 2024, {CiKind::ci2, CiKind::ci5}));
    const KindSummary& s2 = find_kind(result, CiKind::ci2);
    const KindSummary& s5 = find_kind(result, CiKind::ci5);
    CHECK(std::fabs(s2.coverage - oracles::kCp2AtMaxBias) < 4.0 * s2.mc_stderr);
    CHECK(std::fabs(s5.coverage - 0.95) < 4.0 * s5.mc_stderr);
}

TEST_CASE("simulate_joint_normal matches analytic coverage across models") {
    Rng rng(Seed{404});
    for (int i = 0; i < 5; ++i) {
        double s1 = 0.3 + 2.0 * rng.next_uniform();
        double ratio = 0.1 + 0.85 * rng.next_uniform();
        double s2 = ratio * s1;
        double rho = 1.8 * rng.next_uniform() - 0.9;
        double bound = std::sqrt(s1 * s1 - s2 * s2);
        double b2 = (i == 0 ? bound : bound * rng.next_uniform()); // include the boundary
        EstimatorModel model{1.0, b2, s1, s2, rho};
        auto result = simulate_joint_normal(make_config(
            model, 0.95, 200000, 7000 + i, {CiKind::ci2, CiKind::ci5, CiKind::ci6}));

        double z = std_normal_quantile(0.975);
        double cp2 = cp_from_bias(b2, s1, s2, z);
        double z5 = calibrated_z(s1, s2, 0.95).z_tilde;
        double cp5 = cp_from_bias(b2, s1, s2, z5);
        OptimalW opt = optimal_w(s1, s2, rho, 0.95);
        double cp6 = cp_w_from_bias(b2, s1, s2, rho, opt.w_star, opt.cal.z_tilde);

        const KindSummary& k2 = find_kind(result, CiKind::ci2);
        const KindSummary& k5 = find_kind(result, CiKind::ci5);
        const KindSummary& k6 = find_kind(result, CiKind::ci6);
        CHECK(std::fabs(k2.coverage - cp2) <= 4.0 * std::sqrt(cp2 * (1 - cp2) / 200000.0));
        CHECK(std::fabs(k5.coverage - cp5) <= 4.0 * std::sqrt(cp5 * (1 - cp5) / 200000.0));
        CHECK(std::fabs(k6.coverage - cp6) <= 4.0 * std::sqrt(cp6 * (1 - cp6) / 200000.0));
        CHECK(k5.coverage >= 0.95 - 4.0 * k5.mc_stderr); // Theorem 2 lower bound
    }
}

TEST_CASE("simulate_joint_normal determinism and edge cases") {
    EstimatorModel model{0.0, 0.3, 1.0, 0.8, 0.25};
    auto cfg = make_config(model, 0.9, 20000, 555, {CiKind::ci1, CiKind::ci2, CiKind::ci6});
    auto a = simulate_joint_normal(cfg);
    auto b = simulate_joint_normal(cfg);
    for (std::size_t k = 0; k < a.kinds.size(); ++k) {
        CHECK(a.kinds[k].coverage == b.kinds[k].coverage);
    }
    cfg.n_threads = 1;
    auto serial = simulate_joint_normal(cfg);
    cfg.n_threads = 4;
    auto parallel = simulate_joint_normal(cfg);
    for (std::size_t k = 0; k < serial.kinds.size(); ++k) {
        CHECK(serial.kinds[k].coverage == parallel.kinds[k].coverage);
    }

    auto one = simulate_joint_normal(make_config(model, 0.9, 1, 1, {CiKind::ci1}));
    CHECK((one.kinds[0].coverage == 0.0 || one.kinds[0].coverage == 1.0));
    CHECK(one.kinds[0].mc_stderr == 0.0);

    EstimatorModel no_rho{0.0, 0.3, 1.0, 0.8, std::nullopt};
    CHECK_THROWS_AS(
        simulate_joint_normal(make_config(no_rho, 0.9, 10, 1, {CiKind::ci6})),
        domain_error);
    EstimatorModel bad{0.0, 0.9, 1.0, 0.9, std::nullopt};
    CHECK_THROWS_AS(simulate_joint_normal(make_config(bad, 0.9, 10, 1, {CiKind::ci1})),
                    assumption_error);
    CHECK_THROWS_AS(simulate_joint_normal(make_config(model, 0.9, 10, 1, {})), domain_error);
}

TEST_CASE("pairs_bootstrap degenerate estimator pairs") {
    DemoData demo = demo_dgp(60, Seed{808});
    auto ols = [](std::span<const Observation> rows) { return ols_slope(rows); };

    BootstrapEstimates same = pairs_bootstrap(demo.rows, ols, ols, 199, Seed{1});
    CHECK(same.s1_hat == same.s2_hat);
    CHECK(same.rho_hat == 1.0);
    CHECK_FALSE(same.rho_degenerate);

    auto constant = [](std::span<const Observation>) { return 3.0; };
    BootstrapEstimates degen = pairs_bootstrap(demo.rows, ols, constant, 199, Seed{2});
    CHECK(degen.s2_hat == 0.0);
    CHECK(degen.rho_hat == 0.0);
    CHECK(degen.rho_degenerate);

    CHECK_THROWS_AS(pairs_bootstrap({}, ols, ols, 99, Seed{3}), domain_error);
    CHECK_THROWS_AS(pairs_bootstrap(demo.rows, ols, ols, 1, Seed{3}), domain_error);
}

TEST_CASE("pairs_bootstrap retries failing estimators") {
    DemoData demo = demo_dgp(40, Seed{809});
    auto ols = [](std::span<const Observation> rows) { return ols_slope(rows); };

    int calls = 0;
    auto flaky = [&calls](std::span<const Observation> rows) {
        if (++calls == 1) throw std::runtime_error("transient failure");
        return ols_slope(rows);
    };
    BootstrapEstimates est = pairs_bootstrap(demo.rows, flaky, ols, 50, Seed{4});
    CHECK(est.n_retries == 1);
    CHECK(est.s1_hat > 0.0);

    auto broken = [](std::span<const Observation>) -> double {
        throw std::runtime_error("always fails");
    };
    CHECK_THROWS_AS(pairs_bootstrap(demo.rows, broken, ols, 10, Seed{5}), numeric_error);
}

TEST_CASE("pairs_bootstrap estimates stabilize as n_boot doubles") {
    DemoData demo = demo_dgp(200, Seed{810});
    auto ols = [](std::span<const Observation> rows) { return ols_slope(rows); };
    double lambda = demo_ridge_penalty(200);
    auto ridge = [lambda](std::span<const Observation> rows) {
        return ridge_slope(rows, lambda);
    };
    BootstrapEstimates prev = pairs_bootstrap(demo.rows, ols, ridge, 1600, Seed{6});
    for (std::size_t n_boot : {3200, 6400}) {
        BootstrapEstimates next = pairs_bootstrap(demo.rows, ols, ridge, n_boot, Seed{6});
        CHECK(std::fabs(next.s1_hat - prev.s1_hat) / prev.s1_hat < 0.05);
        CHECK(std::fabs(next.s2_hat - prev.s2_hat) / prev.s2_hat < 0.05);
        CHECK(std::fabs(next.rho_hat - prev.rho_hat) < 0.05);
        prev = next;
    }
}

TEST_CASE("demo_dgp and the OLS/ridge estimator pair") {
    CHECK_THROWS_AS(demo_dgp(5, Seed{1}), domain_error);

    DemoData a = demo_dgp(100, Seed{11});
    DemoData b = demo_dgp(100, Seed{11});
    CHECK(a.true_theta == 2.0);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].x == b.rows[i].x);
        CHECK(a.rows[i].y == b.rows[i].y);
    }

    // consistency of the OLS slope
    DemoData big = demo_dgp(20000, Seed{12});
    CHECK(std::fabs(ols_slope(big.rows) - 2.0) < 0.05);

    // ridge shrinks toward zero, so with a positive slope it sits below OLS
    double sum_ols = 0.0, sum_ridge = 0.0;
    int n_reps = 3000;
    for (int r = 0; r < n_reps; ++r) {
        DemoData d = demo_dgp(50, derive_seed(Seed{13}, r));
        double ols = ols_slope(d.rows);
        double ridge = ridge_slope(d.rows, demo_ridge_penalty(50));
        sum_ols += ols;
        sum_ridge += ridge;
        if (ols > 0.0) CHECK(ridge < ols);
    }
    CHECK(sum_ridge / n_reps < sum_ols / n_reps);
    CHECK(sum_ridge / n_reps < 2.0);

    CHECK_THROWS_AS(ridge_slope(std::vector<Observation>{{1, 1}}, 0.0), domain_error);
    std::vector<Observation> flat{{1.0, 0.0}, {1.0, 1.0}, {1.0, 2.0}};
    CHECK_THROWS_AS(ols_slope(flat), numeric_error);
    CHECK(std::fabs(ridge_slope(flat, 1.0)) < 1e-15); // penalty rescues the division
}

TEST_CASE("ridge beats OLS on MSE at the demo sample sizes") {
    for (std::size_t n : {100, 200}) {
        double lambda = demo_ridge_penalty(n);
        double mse_ols = 0.0, mse_ridge = 0.0;
        const int reps = 10000;
        for (int r = 0; r < reps; ++r) {
            DemoData d = demo_dgp(n, derive_seed(Seed{14}, n, r));
            double e1 = ols_slope(d.rows) - d.true_theta;
            double e2 = ridge_slope(d.rows, lambda) - d.true_theta;
            mse_ols += e1 * e1;
            mse_ridge += e2 * e2;
        }
        CHECK(mse_ridge <= mse_ols);
    }
}

TEST_CASE("bootstrap scale ordering holds across seeds") {
    // s2_hat < s1_hat should hold in at least 95% of seeds
    int ordered = 0;
    const int n_seeds = 100;
    double lambda = demo_ridge_penalty(200);
    auto ols = [](std::span<const Observation> rows) { return ols_slope(rows); };
    auto ridge = [lambda](std::span<const Observation> rows) {
        return ridge_slope(rows, lambda);
    };
    for (int s = 0; s < n_seeds; ++s) {
        DemoData d = demo_dgp(200, derive_seed(Seed{15}, s, 0));
        BootstrapEstimates est =
            pairs_bootstrap(d.rows, ols, ridge, 399, derive_seed(Seed{15}, s, 1));
        if (est.s2_hat < est.s1_hat) ++ordered;
    }
    CHECK(ordered >= 95);
}

TEST_CASE("run_study output structure and orderings") {
    const StudyCell cells[] = {{100, 0.95}};
    auto rows = run_study(cells, 60, 99, Seed{909});
    REQUIRE(rows.size() == 1);
    const StudyRow& row = rows.front();
    CHECK(row.n == 100);
    CHECK(row.tag == "ols_ridge");
    REQUIRE(row.kinds.size() == 5);
    CHECK(row.kinds[0].kind == CiKind::ci1);
    CHECK(row.kinds[1].kind == CiKind::ci2);
    CHECK(row.kinds[2].kind == CiKind::ci5);
    CHECK(row.kinds[3].kind == CiKind::ci6s);
    CHECK(row.kinds[4].kind == CiKind::ci6);

    // CI1 and CI2 widths coincide per replication, hence equal medians
    CHECK(row.kinds[0].median_length == row.kinds[1].median_length);
    CHECK(row.kinds[1].median_length >= row.kinds[2].median_length);
    CHECK(row.kinds[2].median_length >= row.kinds[3].median_length - 1e-12);
    CHECK(row.kinds[3].median_length >= row.kinds[4].median_length - 1e-12);
    CHECK(row.clip_rate >= 0.0);
    CHECK(row.clip_rate <= 1.0);

    CHECK_THROWS_AS(run_study({}, 10, 99, Seed{1}), domain_error);
    const StudyCell bad_cell[] = {{5, 0.95}};
    CHECK_THROWS_AS(run_study(bad_cell, 10, 99, Seed{1}), domain_error);
}

TEST_CASE("run_study is deterministic regardless of thread count") {
    const StudyCell cells[] = {{50, 0.9}, {80, 0.95}};
    auto serial = run_study(cells, 24, 60, Seed{1234}, 1);
    auto parallel = run_study(cells, 24, 60, Seed{1234}, 4);
    CHECK(study_csv(serial) == study_csv(parallel));
    auto repeat = run_study(cells, 24, 60, Seed{1234}, 3);
    CHECK(study_csv(repeat) == study_csv(serial));
}

TEST_CASE("study and simulation serialization") {
    const StudyCell cells[] = {{60, 0.9}};
    auto rows = run_study(cells, 12, 50, Seed{77});
    std::string csv = study_csv(rows);
    CHECK(csv.rfind("n,level,tau_or_tag,cp_CI1,cp_CI2,cp_CI5,cp_CI6s,cp_CI6,"
                    "medlen_CI1,medlen_CI2,medlen_CI5,medlen_CI6s,medlen_CI6,clip_rate\n",
                    0) == 0);
    CHECK(csv.back() == '\n');
    nlohmann::json js = study_json(rows);
    REQUIRE(js.is_array());
    CHECK(js[0]["n"] == 60);
    CHECK(js[0]["kinds"].size() == 5);

    EstimatorModel model{0.0, 0.2, 1.0, 0.9, 0.5};
    auto sim = simulate_joint_normal(make_config(model, 0.95, 100, 3, {CiKind::ci2}));
    std::string sim_csv = simulation_csv(sim);
    CHECK(sim_csv.rfind("kind,level,coverage,", 0) == 0);
    nlohmann::json sj = simulation_json(sim);
    CHECK(sj["n_reps"] == 100);
    CHECK(sj["kinds"][0]["kind"] == "CI2");
}
