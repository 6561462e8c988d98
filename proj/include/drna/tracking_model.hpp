#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "drna/random.hpp"
#include "drna/state.hpp"

namespace drna {

/// Binary readings of all range sensors for one time step.
struct Observation {
    std::vector<std::uint8_t> bits;
};

/// Parameters of the bounded-region tracking model with binary range sensors.
///
/// Motion is near-constant-velocity: r' = r + kappa*v + noise, v' = v + noise,
/// with the position noise variance kappa^2*sigma_v2 + sigma_r2 per axis and
/// velocity noise variance sigma_v2 per axis. A proposed position outside
/// `region` is rejected: the particle keeps its previous position and redraws
/// its velocity from the initial velocity distribution.
///
/// Each sensor j reports 1 with probability p1 when the target is within
/// radius mu of it (boundary inclusive) and with probability p1_bar otherwise.
struct TrackingModelParams {
    Rect region{{-20.0, -10.0}, {20.0, 10.0}};
    double kappa = 1.0;
    double sigma_r2 = 1e-2;     // position noise variance contribution
    double sigma_v2 = 1e-2;     // velocity noise variance
    double sigma_v0_2 = 2.5e-3; // initial-velocity variance (std 5e-2)
    std::vector<Vec2> sensors;  // empty selects the default grid
    double mu = 7.0;            // sensing radius
    double p1 = 0.9;            // hit rate in range
    double p1_bar = 1e-2;       // false-alarm rate out of range
};

/// Evenly spaced nx-by-ny sensor grid covering `region` (cell centers).
std::vector<Vec2> default_sensor_grid(const Rect& region, int nx = 6, int ny = 3);

/// Sensor positions from a CSV file with header `sensor_id,x,y`.
std::vector<Vec2> load_sensors_csv(const std::filesystem::path& path);

struct Trajectory {
    std::vector<StateVector> states;         // states[0] is the initial draw
    std::vector<Observation> observations;   // observations[n] senses states[n]
};

/// State-space model used by the filter; validates parameters on construction.
class TrackingModel {
public:
    using State = StateVector;
    using Obs = Observation;
    static constexpr int kStateDim = 4;

    explicit TrackingModel(TrackingModelParams params);

    const TrackingModelParams& params() const { return params_; }
    const std::vector<Vec2>& sensors() const { return params_.sensors; }

    static std::array<double, 4> state_coords(const State& x) { return x.coords(); }

    /// Initial draw: position uniform on the region, velocity centered normal.
    /// Consumes 4 uniforms (2 position, 2 velocity).
    State sample_prior(RandomStream& rng) const {
        State x;
        x.r.x = rng.uniform(params_.region.lo.x, params_.region.hi.x);
        x.r.y = rng.uniform(params_.region.lo.y, params_.region.hi.y);
        auto [g0, g1] = rng.normal_pair();
        x.v = {v0_std_ * g0, v0_std_ * g1};
        return x;
    }

    /// One motion step. Consumes 4 uniforms (position noise pair, velocity
    /// noise pair) plus 2 more only when the out-of-region reset triggers.
    State sample_transition(const State& x, RandomStream& rng) const {
        auto [pr0, pr1] = rng.normal_pair();
        auto [pv0, pv1] = rng.normal_pair();
        Vec2 r{x.r.x + params_.kappa * x.v.x + pos_std_ * pr0,
               x.r.y + params_.kappa * x.v.y + pos_std_ * pr1};
        if (params_.region.contains(r)) {
            return {r, {x.v.x + vel_std_ * pv0, x.v.y + vel_std_ * pv1}};
        }
        auto [g0, g1] = rng.normal_pair();
        return {x.r, {v0_std_ * g0, v0_std_ * g1}};
    }

    /// Joint log-likelihood of one observation vector given the state.
    double log_likelihood(const State& x, const Obs& y) const {
        const double mu2 = params_.mu * params_.mu;
        double acc = 0.0;
        for (std::size_t j = 0; j < params_.sensors.size(); ++j) {
            const bool in = squared_distance(x.r, params_.sensors[j]) <= mu2;
            acc += log_table_[(in ? 2 : 0) + (y.bits[j] ? 1 : 0)];
        }
        return acc;
    }

    /// Draw a sensor reading vector for the state. Consumes J uniforms, one
    /// per sensor, in sensor order; bit j is 1 iff the draw is below the rate.
    Obs observe(const State& x, RandomStream& rng) const;

    /// Simulate n_steps states (the first from the prior, the rest chained
    /// through the transition) and one observation per state.
    Trajectory simulate_trajectory(int n_steps, RandomStream& rng) const;

private:
    TrackingModelParams params_;
    double pos_std_, vel_std_, v0_std_;
    // log of (miss, false alarm, in-range miss, hit) indexed by in*2 + bit
    std::array<double, 4> log_table_;
};

}  // namespace drna
