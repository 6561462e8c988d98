#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "drna/engine.hpp"
#include "drna/experiments.hpp"

using namespace drna;

namespace {

int count_data_rows(const std::filesystem::path& path, std::string* header = nullptr) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    if (header) *header = line;
    int rows = 0;
    while (std::getline(in, line)) rows += !line.empty();
    return rows;
}

}  // namespace

TEST_CASE("assumption_bound: frozen values") {
    AssumptionCheckParams p;  // c=4, q=4, epsilon=0.5, M=32
    CHECK(assumption_bound(p) == doctest::Approx(0.0013810679320049755).epsilon(1e-12));
    p.m_pes = 8;
    CHECK(assumption_bound(p) == doctest::Approx(0.17677669529663687).epsilon(1e-12));
    p.m_pes = 1;
    CHECK(assumption_bound(p) == doctest::Approx(256.0).epsilon(1e-12));
    p.m_pes = 32;
    p.epsilon = 0.0;
    CHECK(assumption_bound(p) == doctest::Approx(0.000244140625).epsilon(1e-12));
}

TEST_CASE("assumption_bound: validation") {
    AssumptionCheckParams p;
    p.c = 0.0;
    CHECK_THROWS_AS(assumption_bound(p), std::invalid_argument);
    p = {};
    p.q = 3.5;
    CHECK_THROWS_AS(assumption_bound(p), std::invalid_argument);
    p = {};
    p.epsilon = 1.0;
    CHECK_THROWS_AS(assumption_bound(p), std::invalid_argument);
    p = {};
    p.epsilon = -0.1;
    CHECK_THROWS_AS(assumption_bound(p), std::invalid_argument);
    p = {};
    p.m_pes = 0;
    CHECK_THROWS_AS(assumption_bound(p), std::invalid_argument);
}

TEST_CASE("assumption_holds reads only the exchange steps") {
    SupMomentSeries s;
    s.bound = 0.5;
    s.moment = {0.1, 0.9, 0.2, 0.9, 0.2};
    s.exchange_step = {0, 0, 1, 0, 1};
    CHECK(assumption_holds(s));  // violations only off-exchange
    s.moment[2] = 0.6;
    CHECK_FALSE(assumption_holds(s));
    s.moment[2] = 0.5;  // not strictly below the bound
    CHECK_FALSE(assumption_holds(s));
}

TEST_CASE("estimate_sup_moment: single PE is identically one") {
    TrackingSetup setup;
    setup.k_per_pe = 16;
    AssumptionCheckParams params;
    params.m_pes = 1;
    params.exchange_period = 2;
    params.runs = 2;
    const SupMomentSeries s = estimate_sup_moment(setup, params, 6, 42);
    REQUIRE(s.moment.size() == 7);
    for (double m : s.moment) CHECK(m == 1.0);
    CHECK(s.bound == doctest::Approx(256.0).epsilon(1e-12));
    CHECK(assumption_holds(s));
}

TEST_CASE("estimate_sup_moment: initial moment and exchange flags") {
    TrackingSetup setup;
    setup.k_per_pe = 32;
    AssumptionCheckParams params;
    params.m_pes = 4;
    params.exchange_period = 3;
    params.runs = 3;
    const SupMomentSeries s = estimate_sup_moment(setup, params, 7, 4242);
    REQUIRE(s.moment.size() == 8);
    REQUIRE(s.exchange_step.size() == 8);
    // Fresh filter: sup share is exactly 1/M, so the q-th moment is M^-q.
    CHECK(s.moment[0] == doctest::Approx(std::pow(0.25, 4.0)).epsilon(1e-10));
    for (int n = 0; n <= 7; ++n) CHECK(int(s.exchange_step[n]) == ((n == 3 || n == 6) ? 1 : 0));
    for (double m : s.moment) {
        CHECK(m > 0.0);
        CHECK(m <= 1.0);
    }
}

TEST_CASE("estimate_sup_moment: moderate setup passes its own bound") {
    TrackingSetup setup;
    setup.k_per_pe = 64;
    AssumptionCheckParams params;
    params.m_pes = 8;
    params.exchange_period = 5;
    params.runs = 4;
    const SupMomentSeries s = estimate_sup_moment(setup, params, 40, 7);
    CHECK(s.bound == doctest::Approx(0.17677669529663687).epsilon(1e-12));
    CHECK(assumption_holds(s));
}

TEST_CASE("rms_error_series: known values and validation") {
    const std::vector<std::vector<double>> sq{{1.0, 4.0}, {9.0, 16.0}};
    const auto rms = rms_error_series(sq);
    REQUIRE(rms.size() == 2);
    CHECK(rms[0] == doctest::Approx(std::sqrt(5.0)).epsilon(1e-14));
    CHECK(rms[1] == doctest::Approx(std::sqrt(10.0)).epsilon(1e-14));

    const std::vector<std::vector<double>> zeros{{0.0, 0.0, 0.0}};
    for (double v : rms_error_series(zeros)) CHECK(v == 0.0);

    CHECK_THROWS_AS(rms_error_series({}), std::invalid_argument);
    CHECK_THROWS_AS(rms_error_series({{1.0}, {1.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("proxy_reference: deterministic in the seed, shape per observation") {
    const TrackingModel model{TrackingModelParams{}};
    RandomStream traj_rng(stream_seed(9, StreamRole::trajectory, 0, 0));
    const Trajectory traj = model.simulate_trajectory(6, traj_rng);
    const std::span<const Observation> obs(traj.observations.data() + 1, 5);

    const auto a = proxy_reference(model, 32, obs, 555);
    const auto b = proxy_reference(model, 32, obs, 555);
    const auto c = proxy_reference(model, 32, obs, 556);
    REQUIRE(a.size() == 5);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (int d = 0; d < 4; ++d) {
            CHECK(a[i][d] == b[i][d]);
            any_diff = any_diff || a[i][d] != c[i][d];
        }
    }
    CHECK(any_diff);
    CHECK_THROWS_AS(proxy_reference(model, 0, obs, 1), std::invalid_argument);
}

TEST_CASE("l2_error_series: single run recomputed by hand") {
    TrackingSetup setup;
    setup.k_per_pe = 8;
    ErrorSeriesConfig config;
    config.m_pes = 1;
    config.horizon = 1;
    config.runs = 1;
    config.reference = ReferenceType::true_state;
    const std::uint64_t seed = 321;
    const ErrorSeries series = l2_error_series(setup, config, seed);
    REQUIRE(series.error.size() == 1);
    REQUIRE(series.per_run_rms.size() == 1);

    const TrackingModel model(setup.model);
    RandomStream traj_rng(stream_seed(seed, StreamRole::trajectory, 0, 0));
    const Trajectory traj = model.simulate_trajectory(2, traj_rng);
    DrnaFilter<TrackingModel> filter(model, 1, 8, 0, nullptr,
                                     make_pe_streams(seed, StreamRole::filter, 0, 1));
    filter.step(traj.observations[1]);
    const auto est = filter.estimate_mean();
    const auto ref = traj.states[1].coords();
    const double dx = est[0] - ref[0], dy = est[1] - ref[1];
    const double expected = std::sqrt(dx * dx + dy * dy);
    CHECK(series.error[0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(series.per_run_rms[0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(series.m_pes == 1);
    CHECK(series.k_per_pe == 8);
    CHECK(series.runs == 1);
}

TEST_CASE("l2_error_series: full-state error includes the velocity gap") {
    TrackingSetup setup;
    setup.k_per_pe = 16;
    ErrorSeriesConfig config;
    config.m_pes = 2;
    config.exchange_period = 2;
    config.horizon = 10;
    config.runs = 2;
    config.full_state = true;
    const ErrorSeries full = l2_error_series(setup, config, 77);
    config.full_state = false;
    const ErrorSeries pos = l2_error_series(setup, config, 77);
    REQUIRE(full.error.size() == pos.error.size());
    for (std::size_t i = 0; i < full.error.size(); ++i) {
        CHECK(full.error[i] >= pos.error[i] - 1e-12);  // extra nonnegative terms
        CHECK(pos.error[i] > 0.0);
    }
}

TEST_CASE("l2_error_series: a filter tracks a centralized filter more closely than the truth") {
    TrackingSetup setup;
    setup.k_per_pe = 128;
    ErrorSeriesConfig config;
    config.m_pes = 8;
    config.exchange_period = 10;
    config.horizon = 150;
    config.runs = 4;
    config.reference = ReferenceType::proxy_posterior_mean;
    config.proxy_particles = 1024;
    const ErrorSeries vs_proxy = l2_error_series(setup, config, 1001);

    config.reference = ReferenceType::true_state;
    const ErrorSeries vs_truth = l2_error_series(setup, config, 1001);

    auto mean_of = [](const std::vector<double>& v) {
        double acc = 0.0;
        for (double x : v) acc += x;
        return acc / v.size();
    };
    const double proxy_mean = mean_of(vs_proxy.error);
    const double truth_mean = mean_of(vs_truth.error);
    CHECK(proxy_mean > 0.0);
    // Two posterior-mean estimators sit far closer to each other than either
    // sits to the hidden state.
    CHECK(proxy_mean < truth_mean);
}

TEST_CASE("l2_error_series: validation") {
    TrackingSetup setup;
    ErrorSeriesConfig config;
    config.horizon = 0;
    CHECK_THROWS_AS(l2_error_series(setup, config, 1), std::invalid_argument);
    config = {};
    config.runs = 0;
    CHECK_THROWS_AS(l2_error_series(setup, config, 1), std::invalid_argument);
    config = {};
    config.reference = ReferenceType::proxy_posterior_mean;
    config.proxy_particles = 0;
    CHECK_THROWS_AS(l2_error_series(setup, config, 1), std::invalid_argument);
}

TEST_CASE("fit_rate: exact recovery of a synthetic power law") {
    const double c_true = 2.0, zeta_true = 0.5;
    const int k = 100;
    std::vector<std::pair<int, double>> points;
    for (int m : {4, 8, 16, 32})
        points.emplace_back(m, c_true / (std::pow(m, zeta_true) * std::sqrt(double(k))));
    const RateFitResult fit = fit_rate(points, k);
    CHECK(fit.c == doctest::Approx(c_true).epsilon(1e-10));
    CHECK(fit.zeta == doctest::Approx(zeta_true).epsilon(1e-10));
    CHECK(fit.residual < 1e-20);
}

TEST_CASE("fit_rate: total-count reading shifts the exponent by one half") {
    const int k = 64;
    std::vector<std::pair<int, double>> points;
    for (int m : {2, 4, 8, 16})
        points.emplace_back(m, 3.0 / (std::pow(m, 1.0) * std::sqrt(double(k))));
    const RateFitResult per_pe = fit_rate(points, k, RateNReading::per_pe);
    const RateFitResult total = fit_rate(points, k, RateNReading::total);
    CHECK(per_pe.zeta == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(total.zeta == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(per_pe.c == doctest::Approx(total.c).epsilon(1e-12));
}

TEST_CASE("fit_rate: flat errors give a zero exponent") {
    const std::vector<std::pair<int, double>> points{{4, 0.125}, {8, 0.125}, {16, 0.125}};
    const RateFitResult fit = fit_rate(points, 16);
    CHECK(fit.zeta == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(fit.c == doctest::Approx(0.125 * 4.0).epsilon(1e-12));  // err * sqrt(K)
}

TEST_CASE("fit_rate: validation") {
    CHECK_THROWS_AS(fit_rate(std::vector<std::pair<int, double>>{{4, 0.1}}, 16),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_rate(std::vector<std::pair<int, double>>{{4, 0.1}, {4, 0.2}}, 16),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_rate(std::vector<std::pair<int, double>>{{4, 0.1}, {8, 0.0}}, 16),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_rate(std::vector<std::pair<int, double>>{{4, 0.1}, {8, 0.2}}, 0),
                    std::invalid_argument);
}

TEST_CASE("run_rate_pipeline: deterministic smoke run") {
    TrackingSetup setup;
    setup.k_per_pe = 16;
    RateFitConfig config;
    config.m_values = {2, 4};
    config.exchange_period = 2;
    config.horizon = 5;
    config.runs = 2;
    config.proxy_particles = 64;
    const RateFitOutcome a = run_rate_pipeline(setup, config, 31337);
    const RateFitOutcome b = run_rate_pipeline(setup, config, 31337);
    REQUIRE(a.points.size() == 2);
    CHECK(a.k_per_pe == 16);
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i].m_pes == config.m_values[i]);
        CHECK(a.points[i].error > 0.0);
        CHECK(a.points[i].fitted > 0.0);
        CHECK(a.points[i].error == b.points[i].error);
    }
    CHECK(a.fit.c == b.fit.c);
    CHECK(a.fit.zeta == b.fit.zeta);
    // With two points the fit is exact: fitted values reproduce the errors.
    for (const auto& p : a.points) CHECK(p.fitted == doctest::Approx(p.error).epsilon(1e-10));

    config.m_values = {4};
    CHECK_THROWS_AS(run_rate_pipeline(setup, config, 1), std::invalid_argument);
}

TEST_CASE("run_oracle_check: error shrinks with the particle budget") {
    const DiscreteHmmModel model = default_oracle_hmm();
    OracleCheckConfig config;
    config.m_pes = 2;
    config.exchange_period = 5;
    config.horizon = 10;
    config.runs = 6;
    config.k_grid = {4, 128};
    const OracleCheckResult a = run_oracle_check(model, config, 99);
    const OracleCheckResult b = run_oracle_check(model, config, 99);
    REQUIRE(a.points.size() == 2);
    CHECK(a.points[0].k_per_pe == 4);
    CHECK(a.points[0].total_particles == 8);
    CHECK(a.points[1].total_particles == 256);
    CHECK(a.points[0].max_abs_error > 0.0);
    CHECK(a.points[1].max_abs_error < a.points[0].max_abs_error);
    CHECK(a.points[0].max_abs_error == b.points[0].max_abs_error);
    CHECK(a.points[1].max_abs_error == b.points[1].max_abs_error);
}

TEST_CASE("build_topology policies") {
    const TopologyBuild single = build_topology(TopologyKind::havel_hakimi, 1, 32, -1);
    CHECK_FALSE(single.graph.has_value());
    CHECK(single.map.is_identity());

    const TopologyBuild ring = build_topology(TopologyKind::circular, 4, 8, -1);
    CHECK_FALSE(ring.graph.has_value());
    CHECK_FALSE(ring.map.is_identity());
    for (int m = 0; m < 4; ++m) CHECK(ring.map.non_identity_slots(m) == 2);

    const TopologyBuild hh = build_topology(TopologyKind::havel_hakimi, 8, 32, -1);
    REQUIRE(hh.graph.has_value());
    CHECK(hh.degree == 2);
    CHECK(hh.per_neighbor == 14);  // min(floor(3.6*32/8), 32/2)
    for (int m = 0; m < 8; ++m) CHECK(hh.map.non_identity_slots(m) == 28);

    const TopologyBuild forced = build_topology(TopologyKind::havel_hakimi, 8, 32, 3);
    CHECK(forced.per_neighbor == 3);
    for (int m = 0; m < 8; ++m) CHECK(forced.map.non_identity_slots(m) == 6);

    CHECK(topology_from_name("havel-hakimi") == TopologyKind::havel_hakimi);
    CHECK(topology_from_name("circular") == TopologyKind::circular);
    CHECK_THROWS_AS(topology_from_name("ring"), std::invalid_argument);
    CHECK(topology_name(TopologyKind::circular) == "circular");
}

TEST_CASE("csv writers: schemas and determinism") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "drna_exp_csv";
    fs::create_directories(dir);
    std::string header;

    SupMomentSeries s;
    s.bound = 0.125;
    s.moment = {0.001, 0.002, 0.003};
    s.exchange_step = {0, 0, 1};
    write_sup_moment_csv(s, dir / "sup_moment.csv");
    CHECK(count_data_rows(dir / "sup_moment.csv", &header) == 3);
    CHECK(header == "n,is_exchange_step,moment_estimate,bound");
    {
        std::ifstream in(dir / "sup_moment.csv");
        std::string line;
        std::getline(in, line);
        int bound_cols = 0;
        while (std::getline(in, line)) {
            const auto pos = line.rfind(',');
            REQUIRE(pos != std::string::npos);
            bound_cols += line.substr(pos + 1) == "0.125";
        }
        CHECK(bound_cols == 3);  // the bound column is constant
    }

    ErrorSeries e;
    e.error = {0.5, 0.25};
    e.per_run_rms = {0.4, 0.3, 0.2};
    e.reference = ReferenceType::proxy_posterior_mean;
    e.m_pes = 16;
    e.k_per_pe = 128;
    e.runs = 3;
    write_errors_csv(e, dir / "errors.csv");
    CHECK(count_data_rows(dir / "errors.csv", &header) == 2);
    CHECK(header == "n,error,reference_type,M,K,runs");
    {
        std::ifstream in(dir / "errors.csv");
        std::string line;
        std::getline(in, line);
        std::getline(in, line);
        CHECK(line == "1,0.5,proxy-posterior-mean,16,128,3");
    }
    write_run_summary_csv(e, dir / "run_summary.csv");
    CHECK(count_data_rows(dir / "run_summary.csv", &header) == 3);
    CHECK(header == "run,rms_error");

    RateFitOutcome rate;
    rate.k_per_pe = 64;
    rate.points = {{8, 0.5, 0.5}, {16, 0.25, 0.25}};
    rate.fit = {2.0, 0.5, 0.25};
    write_rate_fit_csv(rate, dir / "rate_fit.csv");
    {
        std::ifstream in(dir / "rate_fit.csv");
        std::string line;
        std::getline(in, line);
        CHECK(line == "M,error,fitted_value");
        std::getline(in, line);
        CHECK(line == "8,0.5,0.5");
        std::getline(in, line);
        std::getline(in, line);
        CHECK(line == "C,zeta,residual");
        std::getline(in, line);
        CHECK(line == "2,0.5,0.25");
    }

    OracleCheckResult oracle;
    oracle.points = {{64, 256, 0.04}, {256, 1024, 0.02}};
    write_oracle_check_csv(oracle, dir / "oracle_check.csv");
    CHECK(count_data_rows(dir / "oracle_check.csv", &header) == 2);
    CHECK(header == "k_per_pe,mk,max_abs_error");

    fs::remove_all(dir);
}
