#include "drna/cli_app.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drna/experiments.hpp"

namespace drna::cli {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
    int k_per_pe = 256;
    std::uint64_t seed = 1;
    std::string topology = "havel-hakimi";
    int per_neighbor = -1;
    int workers = 0;
    std::string out_dir = "out";
    // model overrides
    double p1 = 0.9, p1_bar = 1e-2, mu = 7.0;
    double sigma_r2 = 1e-2, sigma_v2 = 1e-2, sigma_v02 = 2.5e-3;
    std::vector<double> region;  // xlo ylo xhi yhi
    std::string sensors_file;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--k", opt.k_per_pe, "Particles per PE")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", opt.seed, "Base seed; all streams derive from it");
    cmd->add_option("--topology", opt.topology, "PE graph family")
        ->check(CLI::IsMember({"havel-hakimi", "circular"}));
    cmd->add_option("--per-neighbor", opt.per_neighbor,
                    "Slots exchanged per neighbor (-1: default policy)");
    cmd->add_option("--workers", opt.workers, "Monte Carlo threads (0: all available)");
    cmd->add_option("--out", opt.out_dir, "Output directory");
    cmd->add_option("--p1", opt.p1, "In-range detection rate");
    cmd->add_option("--p1-bar", opt.p1_bar, "Out-of-range detection rate");
    cmd->add_option("--mu", opt.mu, "Sensing radius");
    cmd->add_option("--sigma-r2", opt.sigma_r2, "Position noise variance term");
    cmd->add_option("--sigma-v2", opt.sigma_v2, "Velocity noise variance");
    cmd->add_option("--sigma-v02", opt.sigma_v02, "Initial velocity variance");
    cmd->add_option("--region", opt.region, "Region as xlo ylo xhi yhi")->expected(4);
    cmd->add_option("--sensors", opt.sensors_file, "Sensor layout CSV (sensor_id,x,y)");
}

TrackingSetup make_setup(const CommonOptions& opt) {
    TrackingSetup setup;
    setup.model.p1 = opt.p1;
    setup.model.p1_bar = opt.p1_bar;
    setup.model.mu = opt.mu;
    setup.model.sigma_r2 = opt.sigma_r2;
    setup.model.sigma_v2 = opt.sigma_v2;
    setup.model.sigma_v0_2 = opt.sigma_v02;
    if (!opt.region.empty())
        setup.model.region = {{opt.region[0], opt.region[1]}, {opt.region[2], opt.region[3]}};
    if (!opt.sensors_file.empty()) setup.model.sensors = load_sensors_csv(opt.sensors_file);
    setup.k_per_pe = opt.k_per_pe;
    setup.topology = topology_from_name(opt.topology);
    setup.per_neighbor = opt.per_neighbor;
    setup.workers = opt.workers;
    return setup;
}

struct TrackingCmd {
    CommonOptions common;
    int m_pes = 32;
    int exchange_period = 10;
    int steps = 1000;
    int runs = 50;
    std::string reference = "true-state";
    int proxy_particles = 8192;
    bool full_state = false;
    bool export_topology = false;
};

int do_run_tracking(const TrackingCmd& cmd) {
    TrackingSetup setup = make_setup(cmd.common);
    ErrorSeriesConfig config;
    config.m_pes = cmd.m_pes;
    config.exchange_period = cmd.exchange_period;
    config.horizon = cmd.steps;
    config.runs = cmd.runs;
    config.full_state = cmd.full_state;
    if (cmd.reference == "proxy-posterior-mean") {
        config.reference = ReferenceType::proxy_posterior_mean;
        config.proxy_particles = cmd.proxy_particles;
    }
    const ErrorSeries series = l2_error_series(setup, config, cmd.common.seed);

    const fs::path out(cmd.common.out_dir);
    write_errors_csv(series, out / "errors.csv");
    write_run_summary_csv(series, out / "run_summary.csv");
    if (cmd.export_topology && cmd.m_pes > 1) {
        const TopologyBuild topo =
            build_topology(setup.topology, cmd.m_pes, setup.k_per_pe, setup.per_neighbor);
        if (topo.graph) write_edge_list_csv(*topo.graph, out / "topology.csv");
        write_map_csv(topo.map, out / "exchange_map.csv");
    }
    double mean = 0.0;
    for (double e : series.error) mean += e;
    mean /= series.error.size();
    std::cout << "run-tracking: M=" << cmd.m_pes << " K=" << setup.k_per_pe << " steps=" << cmd.steps
              << " runs=" << cmd.runs << " mean_error=" << mean << '\n';
    std::cout << "wrote " << (out / "errors.csv").string() << '\n';
    return kExitSuccess;
}

struct AssumptionCmd {
    CommonOptions common;
    AssumptionCheckParams params;
    int steps = 1000;
};

int do_run_assumption_check(const AssumptionCmd& cmd) {
    TrackingSetup setup = make_setup(cmd.common);
    const SupMomentSeries series =
        estimate_sup_moment(setup, cmd.params, cmd.steps, cmd.common.seed);
    const fs::path out(cmd.common.out_dir);
    write_sup_moment_csv(series, out / "sup_moment.csv");
    const bool ok = assumption_holds(series);
    double worst = 0.0;
    for (std::size_t n = 0; n < series.moment.size(); ++n)
        if (series.exchange_step[n]) worst = std::max(worst, series.moment[n]);
    std::cout << "run-assumption-check: M=" << cmd.params.m_pes << " K=" << setup.k_per_pe
              << " bound=" << series.bound << " worst_exchange_moment=" << worst << " -> "
              << (ok ? "PASS" : "FAIL") << '\n';
    std::cout << "wrote " << (out / "sup_moment.csv").string() << '\n';
    return ok ? kExitSuccess : kExitCheckFailed;
}

struct RateFitCmd {
    CommonOptions common;
    RateFitConfig config;
    std::optional<double> zeta_min;
    std::optional<double> zeta_max;
    bool fit_n_total = false;
};

int do_run_rate_fit(RateFitCmd& cmd) {
    if (cmd.config.m_values.size() < 2)
        throw std::invalid_argument("run-rate-fit: need at least two --pes-list values");
    TrackingSetup setup = make_setup(cmd.common);
    cmd.config.reading = cmd.fit_n_total ? RateNReading::total : RateNReading::per_pe;
    const RateFitOutcome outcome = run_rate_pipeline(setup, cmd.config, cmd.common.seed);
    const fs::path out(cmd.common.out_dir);
    write_rate_fit_csv(outcome, out / "rate_fit.csv");
    std::cout << "run-rate-fit: C=" << outcome.fit.c << " zeta=" << outcome.fit.zeta
              << " residual=" << outcome.fit.residual << '\n';
    std::cout << "wrote " << (out / "rate_fit.csv").string() << '\n';
    if (cmd.zeta_min && outcome.fit.zeta < *cmd.zeta_min) {
        std::cout << "zeta below requested band\n";
        return kExitCheckFailed;
    }
    if (cmd.zeta_max && outcome.fit.zeta > *cmd.zeta_max) {
        std::cout << "zeta above requested band\n";
        return kExitCheckFailed;
    }
    return kExitSuccess;
}

struct OracleCmd {
    CommonOptions common;
    OracleCheckConfig config;
    int steps = 50;
    double max_error = 0.05;
};

int do_run_oracle_check(OracleCmd& cmd) {
    cmd.config.horizon = cmd.steps;
    cmd.config.topology = topology_from_name(cmd.common.topology);
    cmd.config.per_neighbor = cmd.common.per_neighbor;
    cmd.config.workers = cmd.common.workers;
    const DiscreteHmmModel model = default_oracle_hmm();
    const OracleCheckResult result = run_oracle_check(model, cmd.config, cmd.common.seed);
    const fs::path out(cmd.common.out_dir);
    write_oracle_check_csv(result, out / "oracle_check.csv");
    bool decreasing = true;
    for (std::size_t i = 1; i < result.points.size(); ++i)
        if (!(result.points[i].max_abs_error < result.points[i - 1].max_abs_error))
            decreasing = false;
    const double last = result.points.back().max_abs_error;
    for (const auto& p : result.points)
        std::cout << "run-oracle-check: K=" << p.k_per_pe << " MK=" << p.total_particles
                  << " max_abs_error=" << p.max_abs_error << '\n';
    std::cout << "wrote " << (out / "oracle_check.csv").string() << '\n';
    if (!decreasing) {
        std::cout << "error does not decrease with MK\n";
        return kExitCheckFailed;
    }
    if (!(last <= cmd.max_error)) {
        std::cout << "error at largest MK above " << cmd.max_error << '\n';
        return kExitCheckFailed;
    }
    return kExitSuccess;
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Distributed particle filter experiments"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI file");

    TrackingCmd tracking;
    auto* cmd_tracking =
        app.add_subcommand("run-tracking", "Filter a simulated target, write error series");
    add_common(cmd_tracking, tracking.common);
    cmd_tracking->add_option("--pes", tracking.m_pes, "Number of processing elements")
        ->check(CLI::PositiveNumber);
    cmd_tracking->add_option("--n0", tracking.exchange_period,
                             "Steps between exchanges (0: never)");
    cmd_tracking->add_option("--steps", tracking.steps, "Time horizon")->check(CLI::PositiveNumber);
    cmd_tracking->add_option("--runs", tracking.runs, "Monte Carlo runs")
        ->check(CLI::PositiveNumber);
    cmd_tracking->add_option("--reference", tracking.reference, "Error reference")
        ->check(CLI::IsMember({"true-state", "proxy-posterior-mean"}));
    cmd_tracking->add_option("--proxy-particles", tracking.proxy_particles,
                             "Centralized reference size (proxy reference only)");
    cmd_tracking->add_flag("--full-state-error", tracking.full_state,
                           "Error over position and velocity instead of position");
    cmd_tracking->add_flag("--export-topology", tracking.export_topology,
                           "Also write topology.csv and exchange_map.csv");

    AssumptionCmd assumption;
    auto* cmd_assumption = app.add_subcommand(
        "run-assumption-check", "Estimate the sup aggregate-weight moment against its bound");
    add_common(cmd_assumption, assumption.common);
    cmd_assumption->add_option("--pes", assumption.params.m_pes, "Number of processing elements")
        ->check(CLI::PositiveNumber);
    cmd_assumption->add_option("--n0", assumption.params.exchange_period,
                               "Steps between exchanges")
        ->check(CLI::PositiveNumber);
    cmd_assumption->add_option("--steps", assumption.steps, "Time horizon")
        ->check(CLI::PositiveNumber);
    cmd_assumption->add_option("--runs", assumption.params.runs, "Monte Carlo runs")
        ->check(CLI::PositiveNumber);
    cmd_assumption->add_option("--c", assumption.params.c, "Bound constant c");
    cmd_assumption->add_option("--q", assumption.params.q, "Moment order q");
    cmd_assumption->add_option("--epsilon", assumption.params.epsilon, "Bound slack epsilon");

    RateFitCmd rate;
    auto* cmd_rate = app.add_subcommand("run-rate-fit",
                                        "Fit the error decay exponent across a PE-count sweep");
    add_common(cmd_rate, rate.common);
    cmd_rate->add_option("--pes-list", rate.config.m_values, "PE counts to sweep");
    cmd_rate->add_option("--n0", rate.config.exchange_period, "Steps between exchanges (0: never)");
    cmd_rate->add_option("--steps", rate.config.horizon, "Error is measured at this step")
        ->check(CLI::PositiveNumber);
    cmd_rate->add_option("--runs", rate.config.runs, "Monte Carlo runs")
        ->check(CLI::PositiveNumber);
    cmd_rate->add_option("--proxy-particles", rate.config.proxy_particles,
                         "Centralized reference size")
        ->check(CLI::PositiveNumber);
    cmd_rate->add_flag("--fit-n-total", rate.fit_n_total,
                       "Read the particle count in the error law as M*K instead of K");
    double zmin = 0.0, zmax = 0.0;
    auto* zmin_opt = cmd_rate->add_option("--zeta-min", zmin, "Fail (exit 2) if zeta falls below");
    auto* zmax_opt = cmd_rate->add_option("--zeta-max", zmax, "Fail (exit 2) if zeta rises above");

    OracleCmd oracle;
    auto* cmd_oracle = app.add_subcommand(
        "run-oracle-check", "Compare the filter against the exact forward filter on a small HMM");
    add_common(cmd_oracle, oracle.common);
    cmd_oracle->add_option("--pes", oracle.config.m_pes, "Number of processing elements")
        ->check(CLI::PositiveNumber);
    cmd_oracle->add_option("--n0", oracle.config.exchange_period, "Steps between exchanges")
        ->check(CLI::PositiveNumber);
    cmd_oracle->add_option("--steps", oracle.steps, "Time horizon")->check(CLI::PositiveNumber);
    cmd_oracle->add_option("--runs", oracle.config.runs, "Monte Carlo runs")
        ->check(CLI::PositiveNumber);
    cmd_oracle->add_option("--k-grid", oracle.config.k_grid, "Per-PE particle counts to sweep");
    cmd_oracle->add_option("--max-error", oracle.max_error,
                           "Largest admissible error at the largest MK");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (cmd_tracking->parsed()) return do_run_tracking(tracking);
        if (cmd_assumption->parsed()) return do_run_assumption_check(assumption);
        if (cmd_rate->parsed()) {
            if (zmin_opt->count()) rate.zeta_min = zmin;
            if (zmax_opt->count()) rate.zeta_max = zmax;
            return do_run_rate_fit(rate);
        }
        if (cmd_oracle->parsed()) return do_run_oracle_check(oracle);
        std::cerr << "no subcommand selected\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace drna::cli
