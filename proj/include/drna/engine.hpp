#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "drna/random.hpp"
#include "drna/topology.hpp"

namespace drna {

/// Max-shifted log of the sum of exponentials; -inf for an empty or
/// all- -inf input.
inline double log_sum_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

template <typename M>
concept StateSpaceModel = requires(const M m, const typename M::State& s,
                                   const typename M::Obs& y, RandomStream& rng) {
    { m.sample_prior(rng) } -> std::same_as<typename M::State>;
    { m.sample_transition(s, rng) } -> std::same_as<typename M::State>;
    { m.log_likelihood(s, y) } -> std::convertible_to<double>;
    { M::state_coords(s) };
    { M::kStateDim } -> std::convertible_to<int>;
};

/// The particle population of one processing element. Weights are kept in
/// log domain, unnormalized; log_aggregate tracks log-sum-exp(log_weights)
/// so the PE's share of the global measure survives local normalization.
template <typename State>
struct PeEnsemble {
    std::vector<State> particles;
    std::vector<double> log_weights;
    double log_aggregate = 0.0;
};

/// A PE whose weights all underflowed; the filter cannot continue.
class FilterDegeneracyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename State>
struct ResampleScratch {
    std::vector<double> cdf;
    std::vector<State> picked;
};

/// Multinomial resampling within one PE: K inverse-CDF lookups on the
/// cumulative local weights (one uniform per draw, binary search), then all
/// local weights are reset to aggregate/K. log_aggregate is untouched, so
/// the PE's aggregate weight is conserved exactly.
template <typename State>
void local_resample(PeEnsemble<State>& e, RandomStream& rng, ResampleScratch<State>& scratch) {
    const std::size_t k = e.particles.size();
    scratch.cdf.resize(k);
    scratch.picked.resize(k);
    double shift = -std::numeric_limits<double>::infinity();
    for (double lw : e.log_weights) shift = std::max(shift, lw);
    if (!std::isfinite(shift)) throw FilterDegeneracyError("all local weights are zero");
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        acc += std::exp(e.log_weights[i] - shift);
        scratch.cdf[i] = acc;
    }
    const double total = scratch.cdf.back();
    for (std::size_t i = 0; i < k; ++i) {
        const double u = rng.uniform01() * total;
        const auto it = std::upper_bound(scratch.cdf.begin(), scratch.cdf.end(), u);
        const std::size_t j = std::min<std::size_t>(it - scratch.cdf.begin(), k - 1);
        scratch.picked[i] = e.particles[j];
    }
    std::swap(e.particles, scratch.picked);
    const double uniform_lw = e.log_aggregate - std::log(static_cast<double>(k));
    std::fill(e.log_weights.begin(), e.log_weights.end(), uniform_lw);
}

template <typename State>
void local_resample(PeEnsemble<State>& e, RandomStream& rng) {
    ResampleScratch<State> scratch;
    local_resample(e, rng, scratch);
}

/// Snapshot of the filter's particle approximation: globally normalized
/// weights, one entry per particle, in (pe, slot) order.
template <typename State>
struct WeightedSampleSet {
    struct Entry {
        State state;
        double weight;
    };
    std::vector<Entry> entries;
};

enum class Execution {
    serial,   // reference path: plain loops
    parallel  // OpenMP team across PEs; identical output by construction
};

/// Per-PE streams for one filter instance.
inline std::vector<RandomStream> make_pe_streams(std::uint64_t seed, StreamRole role,
                                                 std::uint64_t run, int m_pes) {
    std::vector<RandomStream> streams;
    streams.reserve(m_pes);
    for (int m = 0; m < m_pes; ++m)
        streams.emplace_back(stream_seed(seed, role, run, static_cast<std::uint64_t>(m)));
    return streams;
}

/// Distributed particle filter: M processing elements of K particles each,
/// every step resampled locally, slots exchanged along a fixed map every
/// exchange_period steps. exchange_period = 0 disables exchanges (the M = 1
/// configuration is a standard bootstrap filter). Each PE draws from its own
/// stream, so results do not depend on the execution policy.
template <StateSpaceModel Model>
class DrnaFilter {
public:
    using State = typename Model::State;
    using Obs = typename Model::Obs;

    DrnaFilter(const Model& model, int m_pes, int k_per_pe, int exchange_period,
               const ExchangeMap* exchange_map, std::vector<RandomStream> pe_streams,
               Execution exec = Execution::serial)
        : model_(&model),
          m_pes_(m_pes),
          k_per_pe_(k_per_pe),
          exchange_period_(exchange_period),
          map_(exchange_map),
          streams_(std::move(pe_streams)),
          exec_(exec) {
        if (m_pes_ < 1 || k_per_pe_ < 1)
            throw std::invalid_argument("filter: m_pes and k_per_pe must be >= 1");
        if (exchange_period_ < 0) throw std::invalid_argument("filter: exchange_period < 0");
        if (exchange_period_ > 0 && m_pes_ > 1) {
            if (map_ == nullptr)
                throw std::invalid_argument("filter: exchanges enabled but no exchange map");
            if (map_->m_pes != m_pes_ || map_->k_per_pe != k_per_pe_)
                throw std::invalid_argument("filter: exchange map dimensions mismatch");
        }
        if (static_cast<int>(streams_.size()) != m_pes_)
            throw std::invalid_argument("filter: need exactly one stream per PE");
        init();
    }

    int m_pes() const { return m_pes_; }
    int k_per_pe() const { return k_per_pe_; }
    int step_index() const { return step_; }
    int exchange_count() const { return exchanges_; }
    const PeEnsemble<State>& ensemble(int m) const { return ensembles_[m]; }
    PeEnsemble<State>& mutable_ensemble(int m) { return ensembles_[m]; }

    /// One full filter step: propagate and weight, resample locally, then
    /// exchange if this step index is a multiple of the exchange period.
    void step(const Obs& y) {
        const int n = step_ + 1;
        propagate_and_weight(y);
        local_resample_all();
        if (exchange_period_ > 0 && n % exchange_period_ == 0) apply_exchange();
        step_ = n;
    }

    /// Propagate every particle one step and fold the observation's log
    /// likelihood into its weight; aggregates are recomputed.
    void propagate_and_weight(const Obs& y) {
        for_each_pe([&](int m) {
            auto& e = ensembles_[m];
            auto& rng = streams_[m];
            for (int k = 0; k < k_per_pe_; ++k) {
                e.particles[k] = model_->sample_transition(e.particles[k], rng);
                e.log_weights[k] += model_->log_likelihood(e.particles[k], y);
            }
            e.log_aggregate = log_sum_exp(e.log_weights);
            if (!std::isfinite(e.log_aggregate))
                throw FilterDegeneracyError("PE aggregate weight underflowed to zero");
        });
    }

    void local_resample_all() {
        for_each_pe([&](int m) { local_resample(ensembles_[m], streams_[m], scratch_[m]); });
    }

    /// Permute slot contents along the exchange map. Consumes no randomness
    /// and leaves the global measure unchanged.
    void apply_exchange() {
        if (map_ == nullptr || m_pes_ == 1) {
            ++exchanges_;
            return;
        }
        const std::size_t n = static_cast<std::size_t>(m_pes_) * k_per_pe_;
        flat_states_.resize(n);
        flat_lw_.resize(n);
        for (int m = 0; m < m_pes_; ++m) {
            const auto& e = ensembles_[m];
            for (int k = 0; k < k_per_pe_; ++k) {
                const std::size_t dst = map_->forward[static_cast<std::size_t>(m) * k_per_pe_ + k];
                flat_states_[dst] = e.particles[k];
                flat_lw_[dst] = e.log_weights[k];
            }
        }
        for (int m = 0; m < m_pes_; ++m) {
            auto& e = ensembles_[m];
            const std::size_t base = static_cast<std::size_t>(m) * k_per_pe_;
            for (int k = 0; k < k_per_pe_; ++k) {
                e.particles[k] = flat_states_[base + k];
                e.log_weights[k] = flat_lw_[base + k];
            }
            e.log_aggregate = log_sum_exp(e.log_weights);
        }
        ++exchanges_;
    }

    /// Globally normalized aggregate weight of each PE; sums to 1.
    std::vector<double> normalized_aggregates() const {
        std::vector<double> w(m_pes_);
        const double total = total_log_aggregate();
        for (int m = 0; m < m_pes_; ++m) w[m] = std::exp(ensembles_[m].log_aggregate - total);
        return w;
    }

    double sup_normalized_aggregate() const {
        const double total = total_log_aggregate();
        double sup = 0.0;
        for (const auto& e : ensembles_) sup = std::max(sup, std::exp(e.log_aggregate - total));
        return sup;
    }

    /// Snapshot of the global measure; entry weight for slot (m, k) is the
    /// PE's normalized aggregate times the particle's locally normalized
    /// weight.
    WeightedSampleSet<State> global_measure() const {
        WeightedSampleSet<State> out;
        out.entries.reserve(static_cast<std::size_t>(m_pes_) * k_per_pe_);
        const double total = total_log_aggregate();
        for (const auto& e : ensembles_) {
            const double pe_weight = std::exp(e.log_aggregate - total);
            for (int k = 0; k < k_per_pe_; ++k) {
                out.entries.push_back(
                    {e.particles[k], pe_weight * std::exp(e.log_weights[k] - e.log_aggregate)});
            }
        }
        return out;
    }

    /// Integral of h under the current particle approximation.
    template <typename H>
    double estimate_integral(H&& h) const {
        const double total = total_log_aggregate();
        double acc = 0.0;
        for (const auto& e : ensembles_) {
            const double pe_weight = std::exp(e.log_aggregate - total);
            for (int k = 0; k < k_per_pe_; ++k)
                acc += pe_weight * std::exp(e.log_weights[k] - e.log_aggregate) * h(e.particles[k]);
        }
        return acc;
    }

    /// Posterior-mean estimate. Single pass, but each coordinate accumulates
    /// in the same order as estimate_integral of its projection, so the two
    /// agree bit for bit.
    std::array<double, Model::kStateDim> estimate_mean() const {
        std::array<double, Model::kStateDim> mean{};
        const double total = total_log_aggregate();
        for (const auto& e : ensembles_) {
            const double pe_weight = std::exp(e.log_aggregate - total);
            for (int k = 0; k < k_per_pe_; ++k) {
                const double w = pe_weight * std::exp(e.log_weights[k] - e.log_aggregate);
                const auto coords = Model::state_coords(e.particles[k]);
                for (int d = 0; d < Model::kStateDim; ++d) mean[d] += w * coords[d];
            }
        }
        return mean;
    }

private:
    void init() {
        ensembles_.resize(m_pes_);
        scratch_.resize(m_pes_);
        const double lw0 = -std::log(static_cast<double>(m_pes_) * k_per_pe_);
        for_each_pe([&](int m) {
            auto& e = ensembles_[m];
            e.particles.resize(k_per_pe_);
            e.log_weights.assign(k_per_pe_, lw0);
            for (int k = 0; k < k_per_pe_; ++k) e.particles[k] = model_->sample_prior(streams_[m]);
            e.log_aggregate = log_sum_exp(e.log_weights);
        });
    }

    double total_log_aggregate() const {
        agg_buf_.resize(m_pes_);
        for (int m = 0; m < m_pes_; ++m) agg_buf_[m] = ensembles_[m].log_aggregate;
        return log_sum_exp(agg_buf_);
    }

    /// Runs f over PE indices; the parallel path must not leak exceptions
    /// out of the team, so failures are latched and rethrown after the join.
    template <typename F>
    void for_each_pe(F&& f) {
        if (exec_ == Execution::parallel) {
            std::atomic<bool> degenerate{false};
#pragma omp parallel for schedule(static)
            for (int m = 0; m < m_pes_; ++m) {
                try {
                    f(m);
                } catch (...) {
                    degenerate.store(true);
                }
            }
            if (degenerate.load())
                throw FilterDegeneracyError("PE aggregate weight underflowed to zero");
        } else {
            for (int m = 0; m < m_pes_; ++m) f(m);
        }
    }

    const Model* model_;
    int m_pes_, k_per_pe_, exchange_period_;
    const ExchangeMap* map_;
    std::vector<RandomStream> streams_;
    Execution exec_;
    int step_ = 0;
    int exchanges_ = 0;
    std::vector<PeEnsemble<State>> ensembles_;
    std::vector<ResampleScratch<State>> scratch_;
    std::vector<State> flat_states_;
    std::vector<double> flat_lw_;
    mutable std::vector<double> agg_buf_;
};

}  // namespace drna
