#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace drna {

/// Undirected simple graph over processing elements, adjacency sorted.
struct PeGraph {
    int m_pes = 0;
    std::vector<std::vector<int>> adjacency;

    int degree_of(int m) const { return static_cast<int>(adjacency[m].size()); }
    bool is_connected() const;
    bool is_regular(int degree) const;
    /// Symmetric, no self-loops, no duplicate edges, indices in range.
    void validate() const;
    /// Edges as (a, b) with a < b, lexicographically sorted.
    std::vector<std::pair<int, int>> edges() const;
};

/// Deterministic Havel-Hakimi construction of a degree-regular graph,
/// followed by deterministic 2-opt edge swaps that merge components while
/// preserving degrees. Throws if the degree sequence is infeasible or the
/// repair cannot reach a connected graph (e.g. degree 1 with more than two
/// vertices).
PeGraph havel_hakimi_regular(int m_pes, int degree);

/// Writes header `pe_a,pe_b` and one row per edge (a < b), 0-based.
void write_edge_list_csv(const PeGraph& graph, const std::filesystem::path& path);

/// Deterministic bijection on particle slots (pe, k), pe in [0, M),
/// k in [0, K). Applying it to a particle set permutes slot contents only.
struct ExchangeMap {
    int m_pes = 0;
    int k_per_pe = 0;
    std::vector<std::uint32_t> forward;  // flat: m * k_per_pe + k -> u * k_per_pe + v

    std::pair<int, int> apply(int m, int k) const {
        const std::uint32_t t = forward[static_cast<std::size_t>(m) * k_per_pe + k];
        return {static_cast<int>(t) / k_per_pe, static_cast<int>(t) % k_per_pe};
    }

    /// Exhaustive audit: bijectivity and per-slot-count preservation.
    void validate() const;
    bool is_identity() const;
    /// Number of slots a given PE sends to a different PE.
    int non_identity_slots(int m) const;
};

ExchangeMap identity_map(int m_pes, int k_per_pe);

/// Ring map: slot 0 of each PE goes to the last slot of the previous PE,
/// the last slot goes to slot 0 of the next PE, interior slots stay.
/// Requires k_per_pe >= 2 (and m_pes >= 1).
ExchangeMap circular_map(int m_pes, int k_per_pe);

/// Per-edge block swaps on a neighbor graph: for each PE the first
/// `per_neighbor` contiguous slots of each neighbor block (neighbors in
/// ascending order) swap pairwise with the matching block on the other side.
/// Requires per_neighbor * degree <= k_per_pe for every PE. per_neighbor = 0
/// yields the identity. The result is an involution.
ExchangeMap block_exchange_map(const PeGraph& graph, int k_per_pe, int per_neighbor);

/// Writes header `m,k,u,v` and one row per slot, 0-based.
void write_map_csv(const ExchangeMap& map, const std::filesystem::path& path);

/// Neighbor count policy: M/4 rounded down, raised to the connectivity
/// minimum (2 when M >= 3, else 1) and bumped by one when M*degree is odd.
int default_degree(int m_pes);

/// Per-neighbor slot count policy: floor(3.6 * K / M), capped at K/degree so
/// the blocks fit.
int default_per_neighbor(int k_per_pe, int m_pes, int degree);

}  // namespace drna
