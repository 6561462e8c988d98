#include "drna/experiments.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

#include "drna/engine.hpp"
#include "drna/exact_oracle.hpp"

namespace drna {

namespace {

/// Runs f(r) for r in [0, runs) with per-run isolation. Results must be
/// written to per-run slots; reductions happen after the join, so output is
/// independent of thread count.
template <typename F>
void parallel_runs(int runs, int workers, F&& f) {
    const int threads = workers > 0 ? workers : omp_get_max_threads();
    std::atomic<bool> failed{false};
    std::string message;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int r = 0; r < runs; ++r) {
        try {
            f(r);
        } catch (const std::exception& e) {
            bool expected = false;
            if (failed.compare_exchange_strong(expected, true)) {
#pragma omp critical(drna_parallel_runs_message)
                message = e.what();
            }
        }
    }
    if (failed.load()) throw std::runtime_error("run failed: " + message);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::ofstream open_csv(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

double squared_position_error(const std::array<double, 4>& est, const std::array<double, 4>& ref,
                              bool full_state) {
    double acc = 0.0;
    const int dims = full_state ? 4 : 2;
    for (int d = 0; d < dims; ++d) {
        const double diff = est[d] - ref[d];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace

TopologyKind topology_from_name(const std::string& name) {
    if (name == "havel-hakimi") return TopologyKind::havel_hakimi;
    if (name == "circular") return TopologyKind::circular;
    throw std::invalid_argument("unknown topology: " + name);
}

std::string topology_name(TopologyKind kind) {
    return kind == TopologyKind::havel_hakimi ? "havel-hakimi" : "circular";
}

TopologyBuild build_topology(TopologyKind kind, int m_pes, int k_per_pe, int per_neighbor) {
    TopologyBuild build;
    if (m_pes == 1) {
        build.map = identity_map(1, k_per_pe);
        return build;
    }
    if (kind == TopologyKind::circular) {
        build.map = circular_map(m_pes, k_per_pe);
        return build;
    }
    build.degree = default_degree(m_pes);
    build.per_neighbor =
        per_neighbor >= 0 ? per_neighbor : default_per_neighbor(k_per_pe, m_pes, build.degree);
    build.graph = havel_hakimi_regular(m_pes, build.degree);
    build.map = block_exchange_map(*build.graph, k_per_pe, build.per_neighbor);
    return build;
}

double assumption_bound(const AssumptionCheckParams& params) {
    if (!(params.c > 0.0)) throw std::invalid_argument("assumption check: c must be > 0");
    if (!(params.q >= 4.0)) throw std::invalid_argument("assumption check: q must be >= 4");
    if (!(params.epsilon >= 0.0 && params.epsilon < 1.0))
        throw std::invalid_argument("assumption check: need 0 <= epsilon < 1");
    if (params.m_pes < 1) throw std::invalid_argument("assumption check: m_pes must be >= 1");
    return std::pow(params.c, params.q) /
           std::pow(static_cast<double>(params.m_pes), params.q - params.epsilon);
}

SupMomentSeries estimate_sup_moment(const TrackingSetup& setup,
                                    const AssumptionCheckParams& params, int horizon,
                                    std::uint64_t seed) {
    if (horizon < 1) throw std::invalid_argument("estimate_sup_moment: horizon must be >= 1");
    if (params.runs < 1) throw std::invalid_argument("estimate_sup_moment: runs must be >= 1");
    const double bound = assumption_bound(params);
    if (params.exchange_period < 1)
        throw std::invalid_argument("estimate_sup_moment: exchange_period must be >= 1");

    const TrackingModel model(setup.model);
    const TopologyBuild topo =
        build_topology(setup.topology, params.m_pes, setup.k_per_pe, setup.per_neighbor);

    std::vector<std::vector<double>> sup_q(params.runs);
    parallel_runs(params.runs, setup.workers, [&](int r) {
        RandomStream traj_rng(stream_seed(seed, StreamRole::trajectory, r, 0));
        const Trajectory traj = model.simulate_trajectory(horizon + 1, traj_rng);
        DrnaFilter<TrackingModel> filter(model, params.m_pes, setup.k_per_pe,
                                         params.exchange_period, &topo.map,
                                         make_pe_streams(seed, StreamRole::filter, r, params.m_pes));
        auto& series = sup_q[r];
        series.resize(horizon + 1);
        series[0] = std::pow(filter.sup_normalized_aggregate(), params.q);
        for (int n = 1; n <= horizon; ++n) {
            filter.step(traj.observations[n]);
            series[n] = std::pow(filter.sup_normalized_aggregate(), params.q);
        }
    });

    SupMomentSeries out;
    out.bound = bound;
    out.moment.assign(horizon + 1, 0.0);
    out.exchange_step.assign(horizon + 1, 0);
    for (int n = 0; n <= horizon; ++n) {
        double acc = 0.0;
        for (int r = 0; r < params.runs; ++r) acc += sup_q[r][n];
        out.moment[n] = acc / params.runs;
        out.exchange_step[n] = (n > 0 && n % params.exchange_period == 0) ? 1 : 0;
    }
    return out;
}

bool assumption_holds(const SupMomentSeries& series) {
    for (std::size_t n = 0; n < series.moment.size(); ++n)
        if (series.exchange_step[n] && !(series.moment[n] < series.bound)) return false;
    return true;
}

std::string reference_type_name(ReferenceType type) {
    return type == ReferenceType::true_state ? "true-state" : "proxy-posterior-mean";
}

std::vector<double> rms_error_series(const std::vector<std::vector<double>>& sq_err_by_run) {
    if (sq_err_by_run.empty()) throw std::invalid_argument("rms_error_series: no runs");
    const std::size_t len = sq_err_by_run.front().size();
    for (const auto& run : sq_err_by_run)
        if (run.size() != len) throw std::invalid_argument("rms_error_series: ragged input");
    std::vector<double> out(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
        double acc = 0.0;
        for (const auto& run : sq_err_by_run) acc += run[i];
        out[i] = std::sqrt(acc / sq_err_by_run.size());
    }
    return out;
}

std::vector<std::array<double, 4>> proxy_reference(const TrackingModel& model, int k_total,
                                                   std::span<const Observation> observations,
                                                   std::uint64_t stream_seed_value) {
    if (k_total < 1) throw std::invalid_argument("proxy_reference: k_total must be >= 1");
    std::vector<RandomStream> streams;
    streams.emplace_back(stream_seed_value);
    DrnaFilter<TrackingModel> filter(model, 1, k_total, 0, nullptr, std::move(streams));
    std::vector<std::array<double, 4>> estimates;
    estimates.reserve(observations.size());
    for (const Observation& y : observations) {
        filter.step(y);
        estimates.push_back(filter.estimate_mean());
    }
    return estimates;
}

ErrorSeries l2_error_series(const TrackingSetup& setup, const ErrorSeriesConfig& config,
                            std::uint64_t seed) {
    if (config.horizon < 1) throw std::invalid_argument("l2_error_series: horizon must be >= 1");
    if (config.runs < 1) throw std::invalid_argument("l2_error_series: runs must be >= 1");
    if (config.reference == ReferenceType::proxy_posterior_mean && config.proxy_particles < 1)
        throw std::invalid_argument("l2_error_series: proxy reference needs proxy_particles");

    const TrackingModel model(setup.model);
    const TopologyBuild topo =
        build_topology(setup.topology, config.m_pes, setup.k_per_pe, setup.per_neighbor);

    std::vector<std::vector<double>> sq_err(config.runs);
    parallel_runs(config.runs, setup.workers, [&](int r) {
        RandomStream traj_rng(stream_seed(seed, StreamRole::trajectory, r, 0));
        const Trajectory traj = model.simulate_trajectory(config.horizon + 1, traj_rng);
        const std::span<const Observation> assimilated(traj.observations.data() + 1,
                                                       config.horizon);

        std::vector<std::array<double, 4>> proxy;
        if (config.reference == ReferenceType::proxy_posterior_mean) {
            proxy = proxy_reference(model, config.proxy_particles, assimilated,
                                    stream_seed(seed, StreamRole::reference, r, 0));
        }

        DrnaFilter<TrackingModel> filter(
            model, config.m_pes, setup.k_per_pe, config.m_pes > 1 ? config.exchange_period : 0,
            &topo.map, make_pe_streams(seed, config.filter_role, r, config.m_pes));
        auto& series = sq_err[r];
        series.resize(config.horizon);
        for (int n = 1; n <= config.horizon; ++n) {
            filter.step(traj.observations[n]);
            const auto est = filter.estimate_mean();
            const auto ref = config.reference == ReferenceType::true_state
                                 ? traj.states[n].coords()
                                 : proxy[n - 1];
            series[n - 1] = squared_position_error(est, ref, config.full_state);
        }
    });

    ErrorSeries out;
    out.error = rms_error_series(sq_err);
    out.per_run_rms.reserve(config.runs);
    for (const auto& run : sq_err) {
        double acc = 0.0;
        for (double v : run) acc += v;
        out.per_run_rms.push_back(std::sqrt(acc / run.size()));
    }
    out.reference = config.reference;
    out.m_pes = config.m_pes;
    out.k_per_pe = setup.k_per_pe;
    out.runs = config.runs;
    return out;
}

RateFitResult fit_rate(std::span<const std::pair<int, double>> errors_by_m, int k_per_pe,
                       RateNReading reading) {
    if (errors_by_m.size() < 2)
        throw std::invalid_argument("fit_rate: need at least two (M, error) points");
    if (k_per_pe < 1) throw std::invalid_argument("fit_rate: k_per_pe must be >= 1");
    const double half_log_k = 0.5 * std::log(static_cast<double>(k_per_pe));
    std::vector<double> xs, ys;
    for (const auto& [m, err] : errors_by_m) {
        if (m < 1) throw std::invalid_argument("fit_rate: M values must be >= 1");
        if (!(err > 0.0)) throw std::invalid_argument("fit_rate: errors must be positive");
        xs.push_back(std::log(static_cast<double>(m)));
        ys.push_back(std::log(err) + half_log_k);
    }
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw std::invalid_argument("fit_rate: M values must not all coincide");
    // Regression y = log C - slope * x; under the total-count reading half of
    // the M dependence belongs to N^(1/2), not to M^zeta.
    const double slope = -sxy / sxx;
    const double log_c = my + slope * mx;
    RateFitResult fit;
    fit.c = std::exp(log_c);
    fit.zeta = reading == RateNReading::per_pe ? slope : slope - 0.5;
    fit.residual = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double resid = ys[i] - (log_c - slope * xs[i]);
        fit.residual += resid * resid;
    }
    return fit;
}

RateFitOutcome run_rate_pipeline(const TrackingSetup& setup, const RateFitConfig& config,
                                 std::uint64_t seed) {
    if (config.m_values.size() < 2)
        throw std::invalid_argument("rate pipeline: need at least two M values");
    if (config.horizon < 1) throw std::invalid_argument("rate pipeline: horizon must be >= 1");
    if (config.runs < 1) throw std::invalid_argument("rate pipeline: runs must be >= 1");
    if (config.proxy_particles < 1)
        throw std::invalid_argument("rate pipeline: proxy_particles must be >= 1");

    const TrackingModel model(setup.model);
    const int n_m = static_cast<int>(config.m_values.size());
    std::vector<TopologyBuild> topos;
    topos.reserve(n_m);
    for (int m_pes : config.m_values)
        topos.push_back(build_topology(setup.topology, m_pes, setup.k_per_pe, setup.per_neighbor));

    // sq_err[i][r]: squared position error of the M = m_values[i] filter
    // against the proxy at the final step of run r.
    std::vector<std::vector<double>> sq_err(n_m, std::vector<double>(config.runs, 0.0));
    parallel_runs(config.runs, setup.workers, [&](int r) {
        RandomStream traj_rng(stream_seed(seed, StreamRole::trajectory, r, 0));
        const Trajectory traj = model.simulate_trajectory(config.horizon + 1, traj_rng);
        const std::span<const Observation> assimilated(traj.observations.data() + 1,
                                                       config.horizon);
        const auto proxy = proxy_reference(model, config.proxy_particles, assimilated,
                                           stream_seed(seed, StreamRole::reference, r, 0));
        const auto& ref = proxy.back();
        for (int i = 0; i < n_m; ++i) {
            const int m_pes = config.m_values[i];
            DrnaFilter<TrackingModel> filter(
                model, m_pes, setup.k_per_pe, m_pes > 1 ? config.exchange_period : 0,
                &topos[i].map,
                make_pe_streams(mix_seed(seed, static_cast<std::uint64_t>(m_pes)),
                                StreamRole::filter, r, m_pes));
            for (int n = 1; n <= config.horizon; ++n) filter.step(traj.observations[n]);
            sq_err[i][r] = squared_position_error(filter.estimate_mean(), ref, false);
        }
    });

    RateFitOutcome outcome;
    outcome.k_per_pe = setup.k_per_pe;
    std::vector<std::pair<int, double>> points;
    for (int i = 0; i < n_m; ++i) {
        double acc = 0.0;
        for (double v : sq_err[i]) acc += v;
        points.emplace_back(config.m_values[i], std::sqrt(acc / config.runs));
    }
    outcome.fit = fit_rate(points, setup.k_per_pe, config.reading);
    const double half_log_k = 0.5 * std::log(static_cast<double>(setup.k_per_pe));
    const double slope =
        config.reading == RateNReading::per_pe ? outcome.fit.zeta : outcome.fit.zeta + 0.5;
    for (const auto& [m, err] : points) {
        RatePoint p;
        p.m_pes = m;
        p.error = err;
        p.fitted = std::exp(std::log(outcome.fit.c) - slope * std::log(static_cast<double>(m)) -
                            half_log_k);
        outcome.points.push_back(p);
    }
    return outcome;
}

DiscreteHmmModel default_oracle_hmm() {
    return DiscreteHmmModel({1.0 / 3, 1.0 / 3, 1.0 / 3},
                            {{0.80, 0.15, 0.05}, {0.10, 0.80, 0.10}, {0.05, 0.15, 0.80}},
                            {{0.70, 0.15, 0.15}, {0.15, 0.70, 0.15}, {0.15, 0.15, 0.70}});
}

OracleCheckResult run_oracle_check(const DiscreteHmmModel& model, const OracleCheckConfig& config,
                                   std::uint64_t seed) {
    if (config.horizon < 1) throw std::invalid_argument("oracle check: horizon must be >= 1");
    if (config.runs < 1) throw std::invalid_argument("oracle check: runs must be >= 1");
    if (config.k_grid.empty()) throw std::invalid_argument("oracle check: empty K grid");
    const int n_states = model.num_states();
    const int n_k = static_cast<int>(config.k_grid.size());

    std::vector<TopologyBuild> topos;
    topos.reserve(n_k);
    for (int k : config.k_grid)
        topos.push_back(build_topology(config.topology, config.m_pes, k, config.per_neighbor));

    // sq_err[i][r] holds, flattened over (step, state), the squared
    // probability errors of the K = k_grid[i] filter in run r.
    std::vector<std::vector<std::vector<double>>> sq_err(
        n_k, std::vector<std::vector<double>>(config.runs));
    parallel_runs(config.runs, config.workers, [&](int r) {
        RandomStream traj_rng(stream_seed(seed, StreamRole::trajectory, r, 0));
        const auto [states, symbols] = model.sample_and_observe(config.horizon + 1, traj_rng);
        const std::span<const int> assimilated(symbols.data() + 1, config.horizon);
        const auto exact = exact_filter_sequence(model, assimilated);
        for (int i = 0; i < n_k; ++i) {
            const int k = config.k_grid[i];
            DrnaFilter<DiscreteHmmModel> filter(
                model, config.m_pes, k, config.m_pes > 1 ? config.exchange_period : 0,
                &topos[i].map,
                make_pe_streams(mix_seed(seed, static_cast<std::uint64_t>(k)), StreamRole::filter,
                                r, config.m_pes));
            auto& flat = sq_err[i][r];
            flat.reserve(static_cast<std::size_t>(config.horizon) * n_states);
            for (int n = 1; n <= config.horizon; ++n) {
                filter.step(symbols[n]);
                std::vector<double> probs(n_states, 0.0);
                for (const auto& entry : filter.global_measure().entries)
                    probs[entry.state] += entry.weight;
                for (int s = 0; s < n_states; ++s) {
                    const double diff = probs[s] - exact[n].p[s];
                    flat.push_back(diff * diff);
                }
            }
        }
    });

    OracleCheckResult result;
    for (int i = 0; i < n_k; ++i) {
        const auto rms = rms_error_series(sq_err[i]);
        OracleCheckPoint point;
        point.k_per_pe = config.k_grid[i];
        point.total_particles = config.m_pes * config.k_grid[i];
        point.max_abs_error = *std::max_element(rms.begin(), rms.end());
        result.points.push_back(point);
    }
    return result;
}

void write_sup_moment_csv(const SupMomentSeries& series, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "n,is_exchange_step,moment_estimate,bound\n";
    for (std::size_t n = 0; n < series.moment.size(); ++n) {
        out << n << ',' << int(series.exchange_step[n]) << ',' << fmt_double(series.moment[n])
            << ',' << fmt_double(series.bound) << '\n';
    }
}

void write_errors_csv(const ErrorSeries& series, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "n,error,reference_type,M,K,runs\n";
    const std::string ref = reference_type_name(series.reference);
    for (std::size_t i = 0; i < series.error.size(); ++i) {
        out << (i + 1) << ',' << fmt_double(series.error[i]) << ',' << ref << ',' << series.m_pes
            << ',' << series.k_per_pe << ',' << series.runs << '\n';
    }
}

void write_run_summary_csv(const ErrorSeries& series, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "run,rms_error\n";
    for (std::size_t r = 0; r < series.per_run_rms.size(); ++r)
        out << r << ',' << fmt_double(series.per_run_rms[r]) << '\n';
}

void write_rate_fit_csv(const RateFitOutcome& outcome, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "M,error,fitted_value\n";
    for (const auto& p : outcome.points)
        out << p.m_pes << ',' << fmt_double(p.error) << ',' << fmt_double(p.fitted) << '\n';
    out << "C,zeta,residual\n";
    out << fmt_double(outcome.fit.c) << ',' << fmt_double(outcome.fit.zeta) << ','
        << fmt_double(outcome.fit.residual) << '\n';
}

void write_oracle_check_csv(const OracleCheckResult& result, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "k_per_pe,mk,max_abs_error\n";
    for (const auto& p : result.points)
        out << p.k_per_pe << ',' << p.total_particles << ',' << fmt_double(p.max_abs_error)
            << '\n';
}

}  // namespace drna
