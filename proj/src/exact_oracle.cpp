#include "drna/exact_oracle.hpp"

#include <stdexcept>

namespace drna {

DiscreteDistribution forward_update(const DiscreteDistribution& prior,
                                    const DiscreteHmmModel& model, int obs) {
    const int s = model.num_states();
    if (static_cast<int>(prior.p.size()) != s)
        throw std::invalid_argument("forward_update: prior dimension mismatch");
    if (obs < 0 || obs >= model.num_symbols())
        throw std::invalid_argument("forward_update: observation symbol out of range");
    DiscreteDistribution post;
    post.p.assign(s, 0.0);
    double total = 0.0;
    for (int j = 0; j < s; ++j) {
        double predicted = 0.0;
        for (int i = 0; i < s; ++i) predicted += prior.p[i] * model.transition()[i][j];
        post.p[j] = predicted * model.emission()[j][obs];
        total += post.p[j];
    }
    if (total <= 0.0)
        throw std::runtime_error("forward_update: observation has zero predicted likelihood");
    for (double& v : post.p) v /= total;
    return post;
}

std::vector<DiscreteDistribution> exact_filter_sequence(const DiscreteHmmModel& model,
                                                        std::span<const int> observations) {
    std::vector<DiscreteDistribution> out;
    out.reserve(observations.size() + 1);
    out.push_back({model.prior()});
    for (int y : observations) out.push_back(forward_update(out.back(), model, y));
    return out;
}

}  // namespace drna
