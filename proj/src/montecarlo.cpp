#include "biasci/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "biasci/calibrate.hpp"
#include "biasci/io.hpp"

namespace biasci {

namespace {

std::size_t resolve_threads(int n_threads, std::size_t n_tasks) {
    std::size_t k;
    if (n_threads > 0) {
        k = static_cast<std::size_t>(n_threads);
    } else {
        unsigned hw = std::thread::hardware_concurrency();
        k = hw ? hw : 1;
    }
    return std::max<std::size_t>(1, std::min(k, n_tasks));
}

// Runs fn(i) for i in [0, n). Work is handed out in blocks through an
// atomic cursor; every task writes only its own slot, so the result does
// not depend on scheduling. The first exception is rethrown.
template <typename Fn>
void parallel_for_index(std::size_t n, int n_threads, std::size_t block, Fn&& fn) {
    std::size_t k = resolve_threads(n_threads, n);
    if (k <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::atomic<bool> stop{false};
    auto worker = [&] {
        try {
            while (!stop.load(std::memory_order_relaxed)) {
                std::size_t begin = cursor.fetch_add(block);
                if (begin >= n) break;
                std::size_t end = std::min(n, begin + block);
                for (std::size_t i = begin; i < end; ++i) fn(i);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            stop.store(true, std::memory_order_relaxed);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(k);
    for (std::size_t i = 0; i < k; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct KindSpec {
    CiKind kind;
    double c1 = 0.0; // coefficient on theta1_hat in the center
    double c2 = 1.0;
    double half = 0.0;
};

KindSpec make_kind_spec(CiKind kind, const EstimatorModel& m, double level) {
    double z = std_normal_quantile(0.5 * (1.0 + level));
    switch (kind) {
        case CiKind::ci1:
            return {kind, 1.0, 0.0, z * m.s1};
        case CiKind::ci2:
            return {kind, 0.0, 1.0, z * m.s1};
        case CiKind::ci3:
            return {kind, 1.0, 0.0, z * m.s2};
        case CiKind::ci4:
            return {kind, 0.0, 1.0, z * m.s2};
        case CiKind::ci5: {
            Calibration cal = calibrated_z(m.s1, m.s2, level);
            return {kind, 0.0, 1.0, cal.z_tilde * m.s1};
        }
        case CiKind::ci6:
        case CiKind::ci6s: {
            if (!m.rho) {
                throw domain_error("simulate_joint_normal: CI6 requires the model correlation");
            }
            double rho = kind == CiKind::ci6s ? 0.5 * (1.0 + *m.rho) : *m.rho;
            OptimalW opt = optimal_w(m.s1, m.s2, rho, level);
            return {kind, 1.0 - opt.w_star, opt.w_star, opt.cal.z_tilde * m.s1};
        }
    }
    throw domain_error("simulate_joint_normal: unknown interval kind");
}

double median_of(std::vector<double>& values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

struct SeriesStats {
    double mean = 0.0;
    double sd = 0.0;
};

SeriesStats sd_of(std::span<const double> xs) {
    SeriesStats st;
    double n = static_cast<double>(xs.size());
    for (double x : xs) st.mean += x;
    st.mean /= n;
    double ss = 0.0;
    for (double x : xs) {
        double d = x - st.mean;
        ss += d * d;
    }
    st.sd = std::sqrt(ss / (n - 1.0));
    return st;
}

std::string csv_cell_kind(const char* metric, CiKind kind) {
    std::string s(metric);
    s += '_';
    s += to_string(kind);
    return s;
}

} // namespace

SimulationResult simulate_joint_normal(const SimulationConfig& cfg) {
    cfg.model.validate();
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) {
        throw domain_error("simulate_joint_normal: level must lie in (0,1)");
    }
    if (cfg.n_reps < 1) {
        throw domain_error("simulate_joint_normal: n_reps must be >= 1");
    }
    if (cfg.kinds.empty()) {
        throw domain_error("simulate_joint_normal: no interval kinds requested");
    }
    if (cfg.kinds.size() > 8) {
        throw domain_error("simulate_joint_normal: too many interval kinds");
    }

    const EstimatorModel& m = cfg.model;
    std::vector<KindSpec> specs;
    specs.reserve(cfg.kinds.size());
    for (CiKind kind : cfg.kinds) specs.push_back(make_kind_spec(kind, m, cfg.level));

    const double rho = m.rho.value_or(0.0);
    const double cross = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const std::size_t n = cfg.n_reps;

    // one byte per replication: bit k set when interval k covered theta
    std::vector<std::uint8_t> covered(n, 0);
    parallel_for_index(n, cfg.n_threads, 4096, [&](std::size_t i) {
        Rng rng(derive_seed(cfg.seed, i));
        double z1 = rng.next_normal();
        double z2 = rng.next_normal();
        double th1 = m.theta + m.s1 * z1;
        double th2 = m.theta + m.b2 + m.s2 * (rho * z1 + cross * z2);
        std::uint8_t mask = 0;
        for (std::size_t k = 0; k < specs.size(); ++k) {
            double center = specs[k].c1 * th1 + specs[k].c2 * th2;
            if (std::fabs(center - m.theta) <= specs[k].half) {
                mask |= static_cast<std::uint8_t>(1u << k);
            }
        }
        covered[i] = mask;
    });

    SimulationResult result;
    result.config = cfg;
    for (std::size_t k = 0; k < specs.size(); ++k) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            hits += (covered[i] >> k) & 1u;
        }
        KindSummary s;
        s.kind = specs[k].kind;
        s.coverage = static_cast<double>(hits) / static_cast<double>(n);
        s.mc_stderr = std::sqrt(s.coverage * (1.0 - s.coverage) / static_cast<double>(n));
        s.median_length = 2.0 * specs[k].half; // widths are deterministic here
        result.kinds.push_back(s);
    }
    return result;
}

BootstrapEstimates pairs_bootstrap(std::span<const Observation> data,
                                   const Estimator& estimator1,
                                   const Estimator& estimator2,
                                   std::size_t n_boot, Seed seed) {
    if (data.empty()) {
        throw domain_error("pairs_bootstrap: data must be nonempty");
    }
    if (n_boot < 2) {
        throw domain_error("pairs_bootstrap: n_boot must be >= 2");
    }
    const std::size_t n = data.size();
    std::vector<double> est1(n_boot), est2(n_boot);
    std::vector<Observation> resample(n);
    std::size_t retries = 0;
    for (std::size_t b = 0; b < n_boot; ++b) {
        bool done = false;
        for (std::size_t attempt = 0; attempt <= 10 && !done; ++attempt) {
            Rng rng(derive_seed(seed, b, attempt));
            for (std::size_t i = 0; i < n; ++i) {
                resample[i] = data[rng.next_below(n)];
            }
            try {
                est1[b] = estimator1(resample);
                est2[b] = estimator2(resample);
                done = true;
            } catch (const std::exception&) {
                ++retries;
            }
        }
        if (!done) {
            throw numeric_error("pairs_bootstrap: estimator failed 10 retries on a resample");
        }
    }

    SeriesStats st1 = sd_of(est1);
    SeriesStats st2 = sd_of(est2);
    BootstrapEstimates out;
    out.s1_hat = st1.sd;
    out.s2_hat = st2.sd;
    out.n_boot = n_boot;
    out.n_retries = retries;
    if (st1.sd == 0.0 || st2.sd == 0.0) {
        out.rho_hat = 0.0;
        out.rho_degenerate = true;
        return out;
    }
    double cross = 0.0;
    for (std::size_t b = 0; b < n_boot; ++b) {
        cross += (est1[b] - st1.mean) * (est2[b] - st2.mean);
    }
    double rho = cross / ((n_boot - 1.0) * st1.sd * st2.sd);
    out.rho_hat = std::clamp(rho, -1.0, 1.0);
    return out;
}

DemoData demo_dgp(std::size_t n, Seed seed) {
    if (n < 10) {
        throw domain_error("demo_dgp: n must be >= 10");
    }
    constexpr double kIntercept = 1.0;
    constexpr double kSlope = 2.0;
    Rng rng(seed);
    DemoData out;
    out.true_theta = kSlope;
    out.rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = rng.next_normal();
        double u = rng.next_normal();
        out.rows.push_back({x, kIntercept + kSlope * x + u});
    }
    return out;
}

double ols_slope(std::span<const Observation> rows) {
    return ridge_slope(rows, 0.0);
}

double ridge_slope(std::span<const Observation> rows, double penalty) {
    if (rows.size() < 2) {
        throw domain_error("ridge_slope: need at least two rows");
    }
    if (!(penalty >= 0.0)) {
        throw domain_error("ridge_slope: penalty must be >= 0");
    }
    double mx = 0.0, my = 0.0;
    for (const auto& r : rows) {
        mx += r.x;
        my += r.y;
    }
    mx /= static_cast<double>(rows.size());
    my /= static_cast<double>(rows.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto& r : rows) {
        sxx += (r.x - mx) * (r.x - mx);
        sxy += (r.x - mx) * (r.y - my);
    }
    if (sxx + penalty == 0.0) {
        throw numeric_error("ridge_slope: degenerate design (all x equal)");
    }
    return sxy / (sxx + penalty);
}

double demo_ridge_penalty(std::size_t n) {
    return 4.0 / std::sqrt(static_cast<double>(n));
}

std::vector<StudyRow> run_study(std::span<const StudyCell> grid,
                                std::size_t sim_reps, std::size_t n_boot,
                                Seed master_seed, int n_threads) {
    if (grid.empty()) {
        throw domain_error("run_study: empty grid");
    }
    if (sim_reps < 1) {
        throw domain_error("run_study: sim_reps must be >= 1");
    }
    for (const auto& cell : grid) {
        if (cell.n < 10) throw domain_error("run_study: cell n must be >= 10");
        if (!(cell.level > 0.0 && cell.level < 1.0)) {
            throw domain_error("run_study: cell level must lie in (0,1)");
        }
    }

    constexpr std::size_t kStudyKinds = 5; // CI1, CI2, CI5, CI6s, CI6
    struct RepRecord {
        double length[kStudyKinds];
        std::uint8_t covered = 0;
        bool clipped = false;
    };
    const std::size_t n_cells = grid.size();
    const std::size_t n_tasks = n_cells * sim_reps;
    std::vector<RepRecord> records(n_tasks);

    parallel_for_index(n_tasks, n_threads, 1, [&](std::size_t task) {
        const std::size_t c = task / sim_reps;
        const std::size_t r = task % sim_reps;
        const StudyCell& cell = grid[c];
        const double lambda = demo_ridge_penalty(cell.n);

        DemoData demo = demo_dgp(cell.n, derive_seed(master_seed, c, r, 0));
        double th1 = ols_slope(demo.rows);
        double th2 = ridge_slope(demo.rows, lambda);
        BootstrapEstimates boot =
            pairs_bootstrap(demo.rows, [](std::span<const Observation> rows) { return ols_slope(rows); },
                            [lambda](std::span<const Observation> rows) {
                                return ridge_slope(rows, lambda);
                            },
                            n_boot, derive_seed(master_seed, c, r, 1));

        Interval ivs[kStudyKinds] = {
            ci1(th1, boot.s1_hat, cell.level),
            ci2(th2, boot.s1_hat, cell.level),
            ci5(th2, boot.s1_hat, boot.s2_hat, cell.level, ClipMode::clip),
            ci6(th1, th2, boot.s1_hat, boot.s2_hat, boot.rho_hat, cell.level,
                /*shrink_rho=*/true, ClipMode::clip),
            ci6(th1, th2, boot.s1_hat, boot.s2_hat, boot.rho_hat, cell.level,
                /*shrink_rho=*/false, ClipMode::clip),
        };
        RepRecord& rec = records[task];
        for (std::size_t k = 0; k < kStudyKinds; ++k) {
            rec.length[k] = 2.0 * ivs[k].half_width;
            if (ivs[k].covers(demo.true_theta)) {
                rec.covered |= static_cast<std::uint8_t>(1u << k);
            }
            rec.clipped = rec.clipped || ivs[k].flags.clipped;
        }
    });

    constexpr CiKind kKindOrder[kStudyKinds] = {CiKind::ci1, CiKind::ci2, CiKind::ci5,
                                                CiKind::ci6s, CiKind::ci6};
    std::vector<StudyRow> rows;
    rows.reserve(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        StudyRow row;
        row.n = grid[c].n;
        row.level = grid[c].level;
        row.tag = "ols_ridge";
        std::size_t clipped = 0;
        for (std::size_t k = 0; k < kStudyKinds; ++k) {
            std::size_t hits = 0;
            std::vector<double> lengths(sim_reps);
            for (std::size_t r = 0; r < sim_reps; ++r) {
                const RepRecord& rec = records[c * sim_reps + r];
                lengths[r] = rec.length[k];
                hits += (rec.covered >> k) & 1u;
            }
            KindSummary s;
            s.kind = kKindOrder[k];
            s.coverage = static_cast<double>(hits) / static_cast<double>(sim_reps);
            s.mc_stderr = std::sqrt(s.coverage * (1.0 - s.coverage) /
                                    static_cast<double>(sim_reps));
            s.median_length = median_of(lengths);
            row.kinds.push_back(s);
        }
        for (std::size_t r = 0; r < sim_reps; ++r) {
            clipped += records[c * sim_reps + r].clipped ? 1 : 0;
        }
        row.clip_rate = static_cast<double>(clipped) / static_cast<double>(sim_reps);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string simulation_csv(const SimulationResult& result) {
    std::ostringstream out;
    out << "kind,level,coverage,mc_stderr,median_length,n_reps,seed,theta,b2,s1,s2,rho\n";
    const EstimatorModel& m = result.config.model;
    for (const KindSummary& s : result.kinds) {
        out << to_string(s.kind) << ',' << fmt_csv(result.config.level) << ','
            << fmt_csv(s.coverage) << ',' << fmt_csv(s.mc_stderr) << ','
            << fmt_csv(s.median_length) << ',' << result.config.n_reps << ','
            << result.config.seed.value << ',' << fmt_csv(m.theta) << ','
            << fmt_csv(m.b2) << ',' << fmt_csv(m.s1) << ',' << fmt_csv(m.s2) << ','
            << (m.rho ? fmt_csv(*m.rho) : std::string()) << '\n';
    }
    return out.str();
}

nlohmann::json simulation_json(const SimulationResult& result) {
    const EstimatorModel& m = result.config.model;
    nlohmann::json model{{"theta", m.theta}, {"b2", m.b2}, {"s1", m.s1}, {"s2", m.s2}};
    if (m.rho) model["rho"] = *m.rho;
    nlohmann::json kinds = nlohmann::json::array();
    for (const KindSummary& s : result.kinds) {
        kinds.push_back({{"kind", to_string(s.kind)},
                         {"coverage", s.coverage},
                         {"mc_stderr", s.mc_stderr},
                         {"median_length", s.median_length}});
    }
    return {{"model", model},
            {"level", result.config.level},
            {"n_reps", result.config.n_reps},
            {"seed", result.config.seed.value},
            {"kinds", kinds}};
}

std::string study_csv(std::span<const StudyRow> rows) {
    std::ostringstream out;
    out << "n,level,tau_or_tag";
    if (!rows.empty()) {
        for (const KindSummary& s : rows.front().kinds) {
            out << ',' << csv_cell_kind("cp", s.kind);
        }
        for (const KindSummary& s : rows.front().kinds) {
            out << ',' << csv_cell_kind("medlen", s.kind);
        }
    }
    out << ",clip_rate\n";
    for (const StudyRow& row : rows) {
        out << row.n << ',' << fmt_csv(row.level) << ',' << row.tag;
        for (const KindSummary& s : row.kinds) out << ',' << fmt_csv(s.coverage);
        for (const KindSummary& s : row.kinds) out << ',' << fmt_csv(s.median_length);
        out << ',' << fmt_csv(row.clip_rate) << '\n';
    }
    return out.str();
}

nlohmann::json study_json(std::span<const StudyRow> rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const StudyRow& row : rows) {
        nlohmann::json kinds = nlohmann::json::array();
        for (const KindSummary& s : row.kinds) {
            kinds.push_back({{"kind", to_string(s.kind)},
                             {"coverage", s.coverage},
                             {"mc_stderr", s.mc_stderr},
                             {"median_length", s.median_length}});
        }
        out.push_back({{"n", row.n},
                       {"level", row.level},
                       {"tau_or_tag", row.tag},
                       {"kinds", kinds},
                       {"clip_rate", row.clip_rate}});
    }
    return out;
}

} // namespace biasci
