#include "drna/discrete_hmm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace drna {

namespace {

void check_distribution(const std::vector<double>& p, const char* what) {
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw std::invalid_argument(std::string(what) + ": negative entry");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument(std::string(what) + ": entries must sum to 1");
}

}  // namespace

DiscreteHmmModel::DiscreteHmmModel(std::vector<double> prior,
                                   std::vector<std::vector<double>> transition,
                                   std::vector<std::vector<double>> emission)
    : prior_(std::move(prior)), transition_(std::move(transition)), emission_(std::move(emission)) {
    const std::size_t s = prior_.size();
    if (s == 0) throw std::invalid_argument("hmm: empty prior");
    if (transition_.size() != s || emission_.size() != s)
        throw std::invalid_argument("hmm: transition/emission row count must match state count");
    check_distribution(prior_, "hmm prior");
    const std::size_t symbols = emission_[0].size();
    if (symbols == 0) throw std::invalid_argument("hmm: no observation symbols");
    for (std::size_t i = 0; i < s; ++i) {
        if (transition_[i].size() != s)
            throw std::invalid_argument("hmm: transition matrix must be square");
        if (emission_[i].size() != symbols)
            throw std::invalid_argument("hmm: ragged emission matrix");
        check_distribution(transition_[i], "hmm transition row");
        check_distribution(emission_[i], "hmm emission row");
    }
    log_emission_.resize(s);
    for (std::size_t i = 0; i < s; ++i) {
        log_emission_[i].reserve(symbols);
        for (double e : emission_[i]) log_emission_[i].push_back(std::log(e));
    }
}

int DiscreteHmmModel::pick(const std::vector<double>& dist, RandomStream& rng) {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < dist.size(); ++i) {
        acc += dist[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(dist.size()) - 1;
}

std::pair<std::vector<int>, std::vector<int>> DiscreteHmmModel::sample_and_observe(
    int n_steps, RandomStream& rng) const {
    if (n_steps < 1) throw std::invalid_argument("sample_and_observe: n_steps must be >= 1");
    std::vector<int> states, symbols;
    states.reserve(n_steps);
    symbols.reserve(n_steps);
    states.push_back(sample_prior(rng));
    symbols.push_back(sample_observation(states.back(), rng));
    for (int n = 1; n < n_steps; ++n) {
        states.push_back(sample_transition(states.back(), rng));
        symbols.push_back(sample_observation(states.back(), rng));
    }
    return {std::move(states), std::move(symbols)};
}

double DiscreteHmmModel::likelihood_bound() const {
    double bound = 1.0;
    for (const auto& row : emission_) {
        for (double e : row) {
            if (e <= 0.0) return std::numeric_limits<double>::infinity();
            bound = std::max(bound, std::max(e, 1.0 / e));
        }
    }
    return bound;
}

}  // namespace drna
