#include "drna/tracking_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace drna {

std::vector<Vec2> default_sensor_grid(const Rect& region, int nx, int ny) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("sensor grid: nx, ny must be positive");
    std::vector<Vec2> sensors;
    sensors.reserve(static_cast<std::size_t>(nx) * ny);
    const double w = region.hi.x - region.lo.x;
    const double h = region.hi.y - region.lo.y;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            sensors.push_back({region.lo.x + w * (i + 0.5) / nx,
                               region.lo.y + h * (j + 0.5) / ny});
        }
    }
    return sensors;
}

std::vector<Vec2> load_sensors_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open sensors file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("sensors file is empty: " + path.string());
    std::vector<Vec2> sensors;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string id, xs, ys;
        if (!std::getline(row, id, ',') || !std::getline(row, xs, ',') || !std::getline(row, ys, ','))
            throw std::runtime_error("sensors file: malformed row '" + line + "'");
        sensors.push_back({std::stod(xs), std::stod(ys)});
    }
    if (sensors.empty()) throw std::runtime_error("sensors file has no data rows: " + path.string());
    return sensors;
}

TrackingModel::TrackingModel(TrackingModelParams params) : params_(std::move(params)) {
    const Rect& reg = params_.region;
    if (!(reg.lo.x < reg.hi.x && reg.lo.y < reg.hi.y))
        throw std::invalid_argument("tracking model: region must have positive area");
    if (!(params_.sigma_r2 >= 0.0 && params_.sigma_v2 >= 0.0 && params_.sigma_v0_2 >= 0.0))
        throw std::invalid_argument("tracking model: noise variances must be non-negative");
    if (!(params_.mu > 0.0))
        throw std::invalid_argument("tracking model: sensing radius must be positive");
    // The endpoints are admitted so deterministic sensors (p1=1, p1_bar=0)
    // stay constructible for simulation-only use.
    if (!(params_.p1_bar >= 0.0 && params_.p1_bar < params_.p1 && params_.p1 <= 1.0))
        throw std::invalid_argument("tracking model: need 0 <= p1_bar < p1 <= 1");
    if (params_.sensors.empty()) params_.sensors = default_sensor_grid(reg);

    pos_std_ = std::sqrt(params_.kappa * params_.kappa * params_.sigma_v2 + params_.sigma_r2);
    vel_std_ = std::sqrt(params_.sigma_v2);
    v0_std_ = std::sqrt(params_.sigma_v0_2);
    log_table_ = {std::log(1.0 - params_.p1_bar), std::log(params_.p1_bar),
                  std::log(1.0 - params_.p1), std::log(params_.p1)};
}

Observation TrackingModel::observe(const State& x, RandomStream& rng) const {
    const double mu2 = params_.mu * params_.mu;
    Observation y;
    y.bits.resize(params_.sensors.size());
    for (std::size_t j = 0; j < params_.sensors.size(); ++j) {
        const bool in = squared_distance(x.r, params_.sensors[j]) <= mu2;
        const double rate = in ? params_.p1 : params_.p1_bar;
        y.bits[j] = rng.bernoulli(rate) ? 1 : 0;
    }
    return y;
}

Trajectory TrackingModel::simulate_trajectory(int n_steps, RandomStream& rng) const {
    if (n_steps < 1) throw std::invalid_argument("simulate_trajectory: n_steps must be >= 1");
    Trajectory t;
    t.states.reserve(n_steps);
    t.observations.reserve(n_steps);
    t.states.push_back(sample_prior(rng));
    t.observations.push_back(observe(t.states.back(), rng));
    for (int n = 1; n < n_steps; ++n) {
        t.states.push_back(sample_transition(t.states.back(), rng));
        t.observations.push_back(observe(t.states.back(), rng));
    }
    return t;
}

}  // namespace drna
