#include "biasci/cli.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "biasci/calibrate.hpp"
#include "biasci/coverage.hpp"
#include "biasci/intervals.hpp"
#include "biasci/io.hpp"
#include "biasci/montecarlo.hpp"
#include "biasci/normal.hpp"

namespace biasci {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitAssumption = 3;
constexpr int kExitNumeric = 4;

std::vector<double> parse_grid(const std::string& spec) {
    // "start:stop:count" with count evenly spaced points, endpoints included
    std::istringstream in(spec);
    std::string a, b, c;
    if (!std::getline(in, a, ':') || !std::getline(in, b, ':') || !std::getline(in, c)) {
        throw domain_error("grid spec must be start:stop:count, got '" + spec + "'");
    }
    double start, stop;
    long count;
    try {
        std::size_t pa = 0, pb = 0, pc = 0;
        start = std::stod(a, &pa);
        stop = std::stod(b, &pb);
        count = std::stol(c, &pc);
        if (pa != a.size() || pb != b.size() || pc != c.size()) {
            throw std::invalid_argument(spec);
        }
    } catch (const std::exception&) {
        throw domain_error("grid spec must be numeric start:stop:count, got '" + spec + "'");
    }
    if (count < 1 || count > 1000000) {
        throw domain_error("grid count must lie in [1, 1e6]");
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    if (count == 1) {
        out.push_back(start);
        return out;
    }
    for (long i = 0; i < count; ++i) {
        out.push_back(start + (stop - start) * static_cast<double>(i) /
                                  static_cast<double>(count - 1));
    }
    return out;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::istringstream in(csv);
    std::string token;
    while (std::getline(in, token, ',')) {
        if (!token.empty()) out.push_back(token);
    }
    return out;
}

std::vector<CiKind> parse_kinds(const std::string& csv) {
    std::vector<CiKind> kinds;
    for (const std::string& token : split_list(csv)) {
        auto kind = parse_ci_kind(token);
        if (!kind) {
            throw domain_error("unknown interval kind '" + token + "'");
        }
        kinds.push_back(*kind);
    }
    if (kinds.empty()) {
        throw domain_error("--kinds must list at least one interval kind");
    }
    return kinds;
}

std::string flags_csv(const IntervalFlags& flags) {
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (!on) return;
        if (!out.empty()) out += ';';
        out += name;
    };
    add(flags.undercovers, "undercovers");
    add(flags.zero_width, "zero_width");
    add(flags.clipped, "clipped");
    add(flags.degenerate, "degenerate");
    return out;
}

struct OutputSpec {
    std::string format; // "csv" or "json"
    std::string path;   // empty: standard output
};

void emit(const OutputSpec& spec, std::ostream& out, const std::string& payload) {
    if (spec.path.empty()) {
        out << payload;
        return;
    }
    std::ofstream file(spec.path);
    if (!file) {
        throw domain_error("cannot open output file '" + spec.path + "'");
    }
    file << payload;
}

void add_output_options(CLI::App* cmd, OutputSpec& spec, const std::string& default_format) {
    spec.format = default_format;
    cmd->add_option("--format", spec.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--output", spec.path, "Write output to this file instead of stdout");
}

// ---- cp ----------------------------------------------------------------

struct CpArgs {
    std::optional<double> level;
    std::optional<double> z;
    int t_grid = 501;
    double w = 1.0;
    std::optional<double> rho;
    OutputSpec out;
};

int run_cp(const CpArgs& args, std::ostream& out) {
    if (args.level.has_value() == args.z.has_value()) {
        throw domain_error("cp: give exactly one of --level or --z");
    }
    if (args.t_grid < 2) {
        throw domain_error("cp: --t-grid must be >= 2");
    }
    double z = args.z ? *args.z : std_normal_quantile(0.5 * (1.0 + *args.level));
    if (args.w != 1.0 && !args.rho) {
        throw domain_error("cp: --rho is required when --w != 1");
    }
    double rho = args.rho.value_or(0.0);
    auto cp_at = [&](double t) {
        return args.w == 1.0 && !args.rho ? cp_t(t, z) : cp_w(t, z, args.w, rho);
    };
    WorstCase worst = (args.w == 1.0 && !args.rho) ? worst_case_cp(z)
                                                   : worst_case_cp_w(z, args.w, rho);
    constexpr double kPiHalf = std::numbers::pi / 2.0;
    if (args.out.format == "csv") {
        std::ostringstream csv;
        csv << "t,cp,tag\n";
        for (int i = 0; i < args.t_grid; ++i) {
            double t = kPiHalf * i / (args.t_grid - 1);
            csv << fmt_csv(t) << ',' << fmt_csv(cp_at(t)) << ",grid\n";
        }
        csv << fmt_csv(worst.t_min) << ',' << fmt_csv(worst.cp_min) << ",min\n";
        emit(args.out, out, csv.str());
    } else {
        nlohmann::json j;
        j["z"] = z;
        if (args.level) j["level"] = *args.level;
        j["w"] = args.w;
        if (args.rho) j["rho"] = *args.rho;
        nlohmann::json grid = nlohmann::json::array();
        for (int i = 0; i < args.t_grid; ++i) {
            double t = kPiHalf * i / (args.t_grid - 1);
            grid.push_back({{"t", t}, {"cp", cp_at(t)}});
        }
        j["grid"] = grid;
        j["worst_case"] = {{"t", worst.t_min}, {"cp", worst.cp_min}};
        emit(args.out, out, j.dump(2) + "\n");
    }
    return kExitOk;
}

// ---- calibrate ----------------------------------------------------------

struct CalibrateArgs {
    double s1 = 0.0;
    double s2 = 0.0;
    double level = 0.95;
    std::optional<double> rho;
    std::optional<double> w;
    bool optimize_w = false;
    OutputSpec out;
};

int run_calibrate(const CalibrateArgs& args, std::ostream& out, std::ostream& err) {
    if ((args.w || args.optimize_w) && !args.rho) {
        throw domain_error("calibrate: --w/--optimize-w require --rho");
    }
    if (args.w && args.optimize_w) {
        throw domain_error("calibrate: give at most one of --w and --optimize-w");
    }
    double z_reference = std_normal_quantile(0.5 * (1.0 + args.level));

    Calibration cal;
    std::optional<double> ratio_vs_w1;
    std::optional<int> local_minima;
    if (args.optimize_w) {
        OptimalW opt = optimal_w(args.s1, args.s2, *args.rho, args.level);
        cal = opt.cal;
        ratio_vs_w1 = cal.z_tilde / calibrated_z(args.s1, args.s2, args.level).z_tilde;
        local_minima = opt.grid_local_minima;
        if (opt.grid_local_minima > 1) {
            err << "warning: z~_w showed " << opt.grid_local_minima
                << " grid local minima (profile not unimodal)\n";
        }
    } else if (args.w) {
        cal = calibrated_z_w(args.s1, args.s2, *args.rho, args.level, *args.w);
    } else {
        cal = calibrated_z(args.s1, args.s2, args.level);
    }

    if (args.out.format == "json") {
        nlohmann::json j{
            {"z_tilde", cal.z_tilde},
            {"level", cal.level},
            {"s2_over_s1", cal.s2_over_s1},
            {"w", cal.w},
            {"bias_bound_over_s1", cal.bias_bound_over_s1},
            {"z_reference", z_reference},
            {"length_ratio", cal.z_tilde / z_reference},
            {"degenerate", cal.degenerate},
        };
        if (cal.rho) j["rho"] = *cal.rho;
        if (ratio_vs_w1) j["length_ratio_vs_w1"] = *ratio_vs_w1;
        if (local_minima) j["grid_local_minima"] = *local_minima;
        emit(args.out, out, j.dump(2) + "\n");
    } else {
        std::ostringstream csv;
        csv << "z_tilde,level,s2_over_s1,rho,w,bias_bound_over_s1,z_reference,"
               "length_ratio,length_ratio_vs_w1,degenerate\n";
        csv << fmt_csv(cal.z_tilde) << ',' << fmt_csv(cal.level) << ','
            << fmt_csv(cal.s2_over_s1) << ','
            << (cal.rho ? fmt_csv(*cal.rho) : std::string()) << ',' << fmt_csv(cal.w)
            << ',' << fmt_csv(cal.bias_bound_over_s1) << ',' << fmt_csv(z_reference)
            << ',' << fmt_csv(cal.z_tilde / z_reference) << ','
            << (ratio_vs_w1 ? fmt_csv(*ratio_vs_w1) : std::string()) << ','
            << (cal.degenerate ? "1" : "0") << '\n';
        emit(args.out, out, csv.str());
    }
    return kExitOk;
}

// ---- ci -----------------------------------------------------------------

struct CiArgs {
    std::optional<double> theta1;
    std::optional<double> theta2;
    double s1 = 0.0;
    double s2 = 0.0;
    std::optional<double> rho;
    double level = 0.95;
    std::string kinds = "CI1,CI2,CI5";
    bool shrink_rho = false;
    bool clip = false;
    OutputSpec out;
};

int run_ci(const CiArgs& args, std::ostream& out) {
    std::vector<CiKind> kinds = parse_kinds(args.kinds);
    ClipMode clip = args.clip ? ClipMode::clip : ClipMode::reject;
    auto need1 = [&]() -> double {
        if (!args.theta1) throw domain_error("ci: --theta1 required for this kind");
        return *args.theta1;
    };
    auto need2 = [&]() -> double {
        if (!args.theta2) throw domain_error("ci: --theta2 required for this kind");
        return *args.theta2;
    };
    auto need_rho = [&]() -> double {
        if (!args.rho) throw domain_error("ci: --rho required for CI6/CI6s");
        return *args.rho;
    };
    std::vector<Interval> intervals;
    for (CiKind kind : kinds) {
        switch (kind) {
            case CiKind::ci1:
                intervals.push_back(ci1(need1(), args.s1, args.level));
                break;
            case CiKind::ci2:
                intervals.push_back(ci2(need2(), args.s1, args.level));
                break;
            case CiKind::ci3:
                intervals.push_back(ci3(need1(), args.s2, args.level));
                break;
            case CiKind::ci4:
                intervals.push_back(ci4(need2(), args.s2, args.level));
                break;
            case CiKind::ci5:
                intervals.push_back(ci5(need2(), args.s1, args.s2, args.level, clip));
                break;
            case CiKind::ci6:
                intervals.push_back(ci6(need1(), need2(), args.s1, args.s2, need_rho(),
                                        args.level, args.shrink_rho, clip));
                break;
            case CiKind::ci6s:
                intervals.push_back(ci6(need1(), need2(), args.s1, args.s2, need_rho(),
                                        args.level, /*shrink_rho=*/true, clip));
                break;
        }
    }
    if (args.out.format == "json") {
        nlohmann::json j = nlohmann::json::array();
        for (const Interval& iv : intervals) j.push_back(to_json(iv));
        emit(args.out, out, j.dump(2) + "\n");
    } else {
        std::ostringstream csv;
        csv << "kind,level,center,lower,upper,half_width,critical_value,w,diagnostics\n";
        for (const Interval& iv : intervals) {
            csv << to_string(iv.kind) << ',' << fmt_csv(iv.level) << ','
                << fmt_csv(iv.center) << ',' << fmt_csv(iv.lower()) << ','
                << fmt_csv(iv.upper()) << ',' << fmt_csv(iv.half_width) << ','
                << fmt_csv(iv.critical_value) << ','
                << (iv.w ? fmt_csv(*iv.w) : std::string()) << ',' << flags_csv(iv.flags)
                << '\n';
        }
        emit(args.out, out, csv.str());
    }
    return kExitOk;
}

// ---- lengths ------------------------------------------------------------

struct LengthsArgs {
    double level = 0.95;
    std::string s2_grid;
    std::string rho_grid;
    OutputSpec out;
};

int run_lengths(const LengthsArgs& args, std::ostream& out) {
    std::vector<double> ratios = parse_grid(args.s2_grid);
    std::vector<double> rhos;
    if (!args.rho_grid.empty()) rhos = parse_grid(args.rho_grid);
    std::vector<LengthRatioRow> rows = length_ratio_table(args.level, ratios, rhos);
    if (args.out.format == "csv") {
        std::ostringstream csv;
        csv << "s2_over_s1,rho,ratio_ci5,ratio_ci6\n";
        for (const LengthRatioRow& row : rows) {
            csv << fmt_csv(row.s2_over_s1) << ','
                << (row.rho ? fmt_csv(*row.rho) : std::string()) << ','
                << fmt_csv(row.ratio_ci5) << ','
                << (row.ratio_ci6 ? fmt_csv(*row.ratio_ci6) : std::string()) << '\n';
        }
        emit(args.out, out, csv.str());
    } else {
        nlohmann::json j = nlohmann::json::array();
        for (const LengthRatioRow& row : rows) {
            nlohmann::json jr{{"s2_over_s1", row.s2_over_s1}, {"ratio_ci5", row.ratio_ci5}};
            if (row.rho) jr["rho"] = *row.rho;
            if (row.ratio_ci6) jr["ratio_ci6"] = *row.ratio_ci6;
            j.push_back(jr);
        }
        emit(args.out, out, j.dump(2) + "\n");
    }
    return kExitOk;
}

// ---- simulate -----------------------------------------------------------

struct SimulateArgs {
    std::string mode;
    double theta = 0.0;
    double b2 = 0.0;
    double s1 = 1.0;
    double s2 = 1.0;
    std::optional<double> rho;
    double level = 0.95;
    std::string kinds = "CI1,CI2,CI5";
    std::string n_grid = "100,200";
    std::string levels;
    std::size_t reps = 500;
    std::size_t boot = 399;
    std::uint64_t seed = 0;
    int threads = 0;
    OutputSpec out;
};

int run_simulate(const SimulateArgs& args, std::ostream& out) {
    if (args.mode == "joint-normal") {
        SimulationConfig cfg;
        cfg.model.theta = args.theta;
        cfg.model.b2 = args.b2;
        cfg.model.s1 = args.s1;
        cfg.model.s2 = args.s2;
        cfg.model.rho = args.rho;
        cfg.level = args.level;
        cfg.n_reps = args.reps;
        cfg.seed = Seed{args.seed};
        cfg.kinds = parse_kinds(args.kinds);
        cfg.n_threads = args.threads;
        SimulationResult result = simulate_joint_normal(cfg);
        if (args.out.format == "csv") {
            emit(args.out, out, simulation_csv(result));
        } else {
            emit(args.out, out, simulation_json(result).dump(2) + "\n");
        }
        return kExitOk;
    }
    if (args.mode == "demo") {
        std::vector<StudyCell> cells;
        std::vector<double> levels;
        for (const std::string& tok : split_list(args.levels.empty() ? std::to_string(args.level)
                                                                     : args.levels)) {
            levels.push_back(std::stod(tok));
        }
        for (const std::string& tok : split_list(args.n_grid)) {
            std::size_t n = 0;
            try {
                n = static_cast<std::size_t>(std::stoul(tok));
            } catch (const std::exception&) {
                throw domain_error("simulate: bad --n-grid entry '" + tok + "'");
            }
            for (double lv : levels) cells.push_back({n, lv});
        }
        std::vector<StudyRow> rows =
            run_study(cells, args.reps, args.boot, Seed{args.seed}, args.threads);
        if (args.out.format == "csv") {
            emit(args.out, out, study_csv(rows));
        } else {
            emit(args.out, out, study_json(rows).dump(2) + "\n");
        }
        return kExitOk;
    }
    throw domain_error("simulate: --mode must be joint-normal or demo");
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Confidence intervals centered at intentionally biased estimators"};
    app.require_subcommand(1);

    CpArgs cp_args;
    CLI::App* cp_cmd = app.add_subcommand("cp", "Coverage probability curve over the bias angle");
    cp_cmd->add_option("--level", cp_args.level, "Confidence level (sets z internally)");
    cp_cmd->add_option("--z", cp_args.z, "Critical value");
    cp_cmd->add_option("--t-grid", cp_args.t_grid, "Number of grid points on [0, pi/2]");
    cp_cmd->add_option("--w", cp_args.w, "Convex-combination weight (default 1)");
    cp_cmd->add_option("--rho", cp_args.rho, "Correlation (required when --w != 1)");
    add_output_options(cp_cmd, cp_args.out, "csv");

    CalibrateArgs cal_args;
    CLI::App* cal_cmd = app.add_subcommand("calibrate", "Solve the calibrated critical value");
    cal_cmd->add_option("--s1", cal_args.s1, "Unbiased estimator standard error")->required();
    cal_cmd->add_option("--s2", cal_args.s2, "Biased estimator standard error")->required();
    cal_cmd->add_option("--level", cal_args.level, "Confidence level")->required();
    cal_cmd->add_option("--rho", cal_args.rho, "Correlation of the estimator pair");
    cal_cmd->add_option("--w", cal_args.w, "Fix the convex weight");
    cal_cmd->add_flag("--optimize-w", cal_args.optimize_w, "Minimize z~_w over w in [0,1]");
    add_output_options(cal_cmd, cal_args.out, "json");

    CiArgs ci_args;
    CLI::App* ci_cmd = app.add_subcommand("ci", "Construct confidence intervals");
    ci_cmd->add_option("--theta1", ci_args.theta1, "Unbiased point estimate");
    ci_cmd->add_option("--theta2", ci_args.theta2, "Biased point estimate");
    ci_cmd->add_option("--s1", ci_args.s1, "Unbiased standard error")->required();
    ci_cmd->add_option("--s2", ci_args.s2, "Biased standard error")->required();
    ci_cmd->add_option("--rho", ci_args.rho, "Correlation (CI6/CI6s)");
    ci_cmd->add_option("--level", ci_args.level, "Confidence level")->required();
    ci_cmd->add_option("--kinds", ci_args.kinds, "Comma list from CI1..CI6,CI6s");
    ci_cmd->add_flag("--shrink-rho", ci_args.shrink_rho, "Use rho' = (1+rho)/2 for CI6");
    ci_cmd->add_flag("--clip", ci_args.clip, "Clip s2 to s1 instead of rejecting");
    add_output_options(ci_cmd, ci_args.out, "json");

    LengthsArgs len_args;
    CLI::App* len_cmd = app.add_subcommand("lengths", "Length-ratio table vs CI2");
    len_cmd->add_option("--level", len_args.level, "Confidence level")->required();
    len_cmd->add_option("--s2-grid", len_args.s2_grid, "s2/s1 grid as start:stop:count")
        ->required();
    len_cmd->add_option("--rho-grid", len_args.rho_grid, "rho grid as start:stop:count");
    add_output_options(len_cmd, len_args.out, "csv");

    SimulateArgs sim_args;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte Carlo validation runs");
    sim_cmd->add_option("--mode", sim_args.mode, "joint-normal or demo")->required();
    sim_cmd->add_option("--theta", sim_args.theta, "True parameter (joint-normal)");
    sim_cmd->add_option("--b2", sim_args.b2, "Bias of the second estimator (joint-normal)");
    sim_cmd->add_option("--s1", sim_args.s1, "s1 (joint-normal)");
    sim_cmd->add_option("--s2", sim_args.s2, "s2 (joint-normal)");
    sim_cmd->add_option("--rho", sim_args.rho, "Correlation (joint-normal)");
    sim_cmd->add_option("--level", sim_args.level, "Confidence level");
    sim_cmd->add_option("--kinds", sim_args.kinds, "Interval kinds (joint-normal)");
    sim_cmd->add_option("--n-grid", sim_args.n_grid, "Comma list of sample sizes (demo)");
    sim_cmd->add_option("--levels", sim_args.levels, "Comma list of levels (demo)");
    sim_cmd->add_option("--reps", sim_args.reps, "Simulation replications");
    sim_cmd->add_option("--boot", sim_args.boot, "Bootstrap replications (demo)");
    sim_cmd->add_option("--seed", sim_args.seed, "Master seed")->envname("BIASCI_SEED");
    sim_cmd->add_option("--threads", sim_args.threads, "Worker threads (0 = hardware)");
    add_output_options(sim_cmd, sim_args.out, "csv");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (cp_cmd->parsed()) return run_cp(cp_args, out);
        if (cal_cmd->parsed()) return run_calibrate(cal_args, out, err);
        if (ci_cmd->parsed()) return run_ci(ci_args, out);
        if (len_cmd->parsed()) return run_lengths(len_args, out);
        if (sim_cmd->parsed()) return run_simulate(sim_args, out);
        err << "error: no subcommand given\n";
        return kExitUsage;
    } catch (const assumption_error& e) {
        err << "assumption violation: " << e.what() << "\n";
        return kExitAssumption;
    } catch (const domain_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const numeric_error& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitNumeric;
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, out, err);
}

} // namespace biasci
