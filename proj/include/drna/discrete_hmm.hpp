#pragma once

#include <array>
#include <vector>

#include "drna/random.hpp"

namespace drna {

/// Finite-state hidden Markov model. Row-stochastic transition matrix,
/// row-stochastic per-state emission distribution over symbols. Doubles as a
/// state-space model for the particle filter and as the substrate for the
/// exact forward filter, which is what makes filter-vs-oracle comparisons
/// possible.
class DiscreteHmmModel {
public:
    using State = int;
    using Obs = int;
    static constexpr int kStateDim = 1;

    DiscreteHmmModel(std::vector<double> prior,
                     std::vector<std::vector<double>> transition,
                     std::vector<std::vector<double>> emission);

    int num_states() const { return static_cast<int>(prior_.size()); }
    int num_symbols() const { return static_cast<int>(emission_[0].size()); }

    const std::vector<double>& prior() const { return prior_; }
    const std::vector<std::vector<double>>& transition() const { return transition_; }
    const std::vector<std::vector<double>>& emission() const { return emission_; }

    static std::array<double, 1> state_coords(const State& s) {
        return {static_cast<double>(s)};
    }

    /// One draw: inverse-CDF over the prior.
    State sample_prior(RandomStream& rng) const { return pick(prior_, rng); }

    /// One draw: inverse-CDF over the transition row of s.
    State sample_transition(const State& s, RandomStream& rng) const {
        return pick(transition_[s], rng);
    }

    double log_likelihood(const State& s, const Obs& y) const {
        return log_emission_[s][y];
    }

    /// One draw: inverse-CDF over the emission row of s.
    Obs sample_observation(const State& s, RandomStream& rng) const {
        return pick(emission_[s], rng);
    }

    /// Simulate n_steps states (the first from the prior) and one observed
    /// symbol per state.
    std::pair<std::vector<int>, std::vector<int>> sample_and_observe(int n_steps,
                                                                     RandomStream& rng) const;

    /// Smallest a with 1/a <= emission probability <= a over all entries;
    /// infinite when some entry is zero.
    double likelihood_bound() const;

private:
    static int pick(const std::vector<double>& dist, RandomStream& rng);

    std::vector<double> prior_;
    std::vector<std::vector<double>> transition_;
    std::vector<std::vector<double>> emission_;
    std::vector<std::vector<double>> log_emission_;
};

}  // namespace drna
