#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drna/discrete_hmm.hpp"
#include "drna/topology.hpp"
#include "drna/tracking_model.hpp"

namespace drna {

enum class TopologyKind { havel_hakimi, circular };

TopologyKind topology_from_name(const std::string& name);
std::string topology_name(TopologyKind kind);

/// Graph + exchange map construction for one filter configuration.
/// per_neighbor < 0 selects the default policy. The circular topology has no
/// neighbor graph; its map moves one boundary slot per ring direction.
struct TopologyBuild {
    std::optional<PeGraph> graph;
    ExchangeMap map;
    int degree = 0;
    int per_neighbor = 0;
};

TopologyBuild build_topology(TopologyKind kind, int m_pes, int k_per_pe, int per_neighbor);

/// Model and per-PE sizing shared by the experiment pipelines.
struct TrackingSetup {
    TrackingModelParams model{};
    int k_per_pe = 256;
    TopologyKind topology = TopologyKind::havel_hakimi;
    int per_neighbor = -1;  // -1: default policy
    int workers = 0;        // Monte Carlo threads; 0: library default
};

/// Parameters of the aggregate-weight moment check: the q-th moment of the
/// largest normalized PE aggregate is compared against c^q / M^(q-epsilon)
/// at exchange steps.
struct AssumptionCheckParams {
    double c = 4.0;
    double q = 4.0;
    double epsilon = 0.5;
    int m_pes = 32;
    int exchange_period = 10;
    int runs = 50;
};

double assumption_bound(const AssumptionCheckParams& params);

struct SupMomentSeries {
    std::vector<double> moment;              // index n = 0..horizon, run average
    std::vector<std::uint8_t> exchange_step; // 1 where an exchange happened
    double bound = 0.0;
};

/// Monte Carlo estimate of E[(sup_m W^(m))^q] after every step.
SupMomentSeries estimate_sup_moment(const TrackingSetup& setup,
                                    const AssumptionCheckParams& params, int horizon,
                                    std::uint64_t seed);

/// True at every exchange step the estimated moment is below the bound.
bool assumption_holds(const SupMomentSeries& series);

enum class ReferenceType { true_state, proxy_posterior_mean };

std::string reference_type_name(ReferenceType type);

struct ErrorSeriesConfig {
    int m_pes = 32;
    int exchange_period = 10;
    int horizon = 1000;
    int runs = 50;
    ReferenceType reference = ReferenceType::true_state;
    int proxy_particles = 0;  // required when reference is the proxy
    bool full_state = false;  // position-only error by default
    StreamRole filter_role = StreamRole::filter;
};

struct ErrorSeries {
    std::vector<double> error;        // index n-1 for steps n = 1..horizon
    std::vector<double> per_run_rms;  // time-averaged RMS error of each run
    ReferenceType reference = ReferenceType::true_state;
    int m_pes = 0;
    int k_per_pe = 0;
    int runs = 0;
};

/// L2 estimation error per step: the root of the run-averaged squared
/// distance between the filter's posterior-mean estimate and the reference
/// (true state, or a single large centralized filter on the same data).
ErrorSeries l2_error_series(const TrackingSetup& setup, const ErrorSeriesConfig& config,
                            std::uint64_t seed);

/// Root of the elementwise run average of squared errors; every run series
/// must have equal length.
std::vector<double> rms_error_series(const std::vector<std::vector<double>>& sq_err_by_run);

/// Posterior-mean sequence of a centralized bootstrap filter with k_total
/// particles, one entry per assimilated observation. Deterministic in
/// stream_seed_value.
std::vector<std::array<double, 4>> proxy_reference(const TrackingModel& model, int k_total,
                                                   std::span<const Observation> observations,
                                                   std::uint64_t stream_seed_value);

/// How the fitted error law reads the particle count: per-PE (error scales
/// with K^-1/2) or total (error scales with (M*K)^-1/2).
enum class RateNReading { per_pe, total };

struct RateFitResult {
    double c = 0.0;
    double zeta = 0.0;
    double residual = 0.0;  // sum of squared log-domain residuals
};

/// Least-squares fit of error ~ C / (M^zeta * K^(1/2)) in the log domain
/// over (M, error) points at fixed K.
RateFitResult fit_rate(std::span<const std::pair<int, double>> errors_by_m, int k_per_pe,
                       RateNReading reading = RateNReading::per_pe);

struct RateFitConfig {
    std::vector<int> m_values{8, 16, 32};
    int exchange_period = 10;
    int horizon = 1000;  // error measured at this step
    int runs = 60;
    int proxy_particles = 8192;
    RateNReading reading = RateNReading::per_pe;
};

struct RatePoint {
    int m_pes = 0;
    double error = 0.0;
    double fitted = 0.0;
};

struct RateFitOutcome {
    std::vector<RatePoint> points;
    RateFitResult fit;
    int k_per_pe = 0;
};

/// Full rate experiment: per run one trajectory, one proxy pass, one filter
/// per M; the proxy's posterior mean at the final step is the reference.
RateFitOutcome run_rate_pipeline(const TrackingSetup& setup, const RateFitConfig& config,
                                 std::uint64_t seed);

/// 3-state, 3-symbol ergodic chain with strictly positive emissions, the
/// default subject of filter-vs-exact-oracle comparisons.
DiscreteHmmModel default_oracle_hmm();

struct OracleCheckConfig {
    int m_pes = 4;
    int exchange_period = 5;
    int horizon = 50;
    int runs = 32;
    std::vector<int> k_grid{64, 256, 1024};
    TopologyKind topology = TopologyKind::havel_hakimi;
    int per_neighbor = -1;
    int workers = 0;
};

struct OracleCheckPoint {
    int k_per_pe = 0;
    int total_particles = 0;
    /// max over steps and states of the across-run RMS of the absolute
    /// difference between estimated and exact state probabilities.
    double max_abs_error = 0.0;
};

struct OracleCheckResult {
    std::vector<OracleCheckPoint> points;
};

/// Filter-vs-exact-forward-filter error on a finite HMM across a grid of
/// per-PE particle counts.
OracleCheckResult run_oracle_check(const DiscreteHmmModel& model, const OracleCheckConfig& config,
                                   std::uint64_t seed);

// CSV writers. Doubles are written with %.17g, so equal inputs give
// byte-identical files.
void write_sup_moment_csv(const SupMomentSeries& series, const std::filesystem::path& path);
void write_errors_csv(const ErrorSeries& series, const std::filesystem::path& path);
void write_run_summary_csv(const ErrorSeries& series, const std::filesystem::path& path);
void write_rate_fit_csv(const RateFitOutcome& outcome, const std::filesystem::path& path);
void write_oracle_check_csv(const OracleCheckResult& result, const std::filesystem::path& path);

}  // namespace drna
