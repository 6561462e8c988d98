#pragma once

#include <span>
#include <vector>

#include "drna/discrete_hmm.hpp"

namespace drna {

/// Probability vector over HMM states.
struct DiscreteDistribution {
    std::vector<double> p;
};

/// One exact forward-filter update: predict through the transition matrix,
/// weight by the observation likelihood, normalize. Throws if the predicted
/// likelihood of the observation is zero.
DiscreteDistribution forward_update(const DiscreteDistribution& prior,
                                    const DiscreteHmmModel& model, int obs);

/// Exact filtering distributions [pi_0, pi_1, ..., pi_n] for an observation
/// sequence (y_1, ..., y_n): pi_0 is the model prior, each subsequent entry
/// one forward_update.
std::vector<DiscreteDistribution> exact_filter_sequence(const DiscreteHmmModel& model,
                                                        std::span<const int> observations);

}  // namespace drna
