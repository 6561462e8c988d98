#include "drna/topology.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace drna {

bool PeGraph::is_connected() const {
    if (m_pes <= 1) return true;
    std::vector<char> seen(m_pes, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int visited = 1;
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        for (int w : adjacency[v]) {
            if (!seen[w]) {
                seen[w] = 1;
                ++visited;
                stack.push_back(w);
            }
        }
    }
    return visited == m_pes;
}

bool PeGraph::is_regular(int degree) const {
    for (int m = 0; m < m_pes; ++m)
        if (degree_of(m) != degree) return false;
    return true;
}

void PeGraph::validate() const {
    if (static_cast<int>(adjacency.size()) != m_pes)
        throw std::invalid_argument("graph: adjacency size mismatch");
    for (int m = 0; m < m_pes; ++m) {
        const auto& nbrs = adjacency[m];
        if (!std::is_sorted(nbrs.begin(), nbrs.end()))
            throw std::invalid_argument("graph: adjacency lists must be sorted");
        if (std::adjacent_find(nbrs.begin(), nbrs.end()) != nbrs.end())
            throw std::invalid_argument("graph: duplicate edge");
        for (int w : nbrs) {
            if (w < 0 || w >= m_pes) throw std::invalid_argument("graph: neighbor out of range");
            if (w == m) throw std::invalid_argument("graph: self-loop");
            if (!std::binary_search(adjacency[w].begin(), adjacency[w].end(), m))
                throw std::invalid_argument("graph: asymmetric edge");
        }
    }
}

std::vector<std::pair<int, int>> PeGraph::edges() const {
    std::vector<std::pair<int, int>> out;
    for (int m = 0; m < m_pes; ++m)
        for (int w : adjacency[m])
            if (m < w) out.emplace_back(m, w);
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

PeGraph graph_from_edges(int m_pes, const std::set<std::pair<int, int>>& edges) {
    PeGraph g;
    g.m_pes = m_pes;
    g.adjacency.assign(m_pes, {});
    for (auto [a, b] : edges) {
        g.adjacency[a].push_back(b);
        g.adjacency[b].push_back(a);
    }
    for (auto& nbrs : g.adjacency) std::sort(nbrs.begin(), nbrs.end());
    return g;
}

std::vector<int> component_ids(const PeGraph& g) {
    std::vector<int> comp(g.m_pes, -1);
    int next = 0;
    for (int s = 0; s < g.m_pes; ++s) {
        if (comp[s] >= 0) continue;
        comp[s] = next;
        std::vector<int> stack{s};
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int w : g.adjacency[v]) {
                if (comp[w] < 0) {
                    comp[w] = next;
                    stack.push_back(w);
                }
            }
        }
        ++next;
    }
    return comp;
}

}  // namespace

PeGraph havel_hakimi_regular(int m_pes, int degree) {
    if (m_pes < 1) throw std::invalid_argument("havel_hakimi_regular: m_pes must be >= 1");
    if (degree < 1 || degree >= m_pes)
        throw std::invalid_argument("havel_hakimi_regular: need 1 <= degree < m_pes");
    if ((static_cast<long long>(m_pes) * degree) % 2 != 0)
        throw std::invalid_argument("havel_hakimi_regular: m_pes * degree must be even");

    // Havel-Hakimi with deterministic tie-breaking: highest residual first,
    // lowest index first among equals.
    std::vector<int> residual(m_pes, degree);
    std::set<std::pair<int, int>> edges;
    std::vector<int> order(m_pes);
    std::iota(order.begin(), order.end(), 0);
    for (int round = 0; round < m_pes; ++round) {
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return residual[a] != residual[b] ? residual[a] > residual[b] : a < b;
        });
        const int v = order[0];
        const int need = residual[v];
        if (need == 0) break;
        if (need > m_pes - 1) throw std::invalid_argument("havel_hakimi_regular: infeasible sequence");
        int taken = 0;
        for (int i = 1; i < m_pes && taken < need; ++i) {
            const int w = order[i];
            if (residual[w] == 0) break;  // sorted: the rest are zero too
            --residual[w];
            ++taken;
            edges.insert({std::min(v, w), std::max(v, w)});
        }
        if (taken < need) throw std::invalid_argument("havel_hakimi_regular: infeasible sequence");
        residual[v] = 0;
    }

    PeGraph g = graph_from_edges(m_pes, edges);

    // Components are merged two at a time by a degree-preserving 2-opt swap:
    // remove one edge from each component, reconnect across. Each pass must
    // reduce the component count or the sequence cannot be connected.
    for (int pass = 0; pass < m_pes; ++pass) {
        const auto comp = component_ids(g);
        const int n_comps = 1 + *std::max_element(comp.begin(), comp.end());
        if (n_comps == 1) break;
        auto smallest_edge_in = [&](int c) -> std::pair<int, int> {
            for (auto e : g.edges())
                if (comp[e.first] == c) return e;
            throw std::invalid_argument("havel_hakimi_regular: cannot connect (isolated vertex)");
        };
        const auto [a1, a2] = smallest_edge_in(comp[0]);
        int other = -1;
        for (int m = 0; m < g.m_pes; ++m)
            if (comp[m] != comp[0]) { other = comp[m]; break; }
        const auto [b1, b2] = smallest_edge_in(other);
        edges.erase({a1, a2});
        edges.erase({b1, b2});
        edges.insert({std::min(a1, b1), std::max(a1, b1)});
        edges.insert({std::min(a2, b2), std::max(a2, b2)});
        PeGraph merged = graph_from_edges(m_pes, edges);
        const auto comp2 = component_ids(merged);
        if (1 + *std::max_element(comp2.begin(), comp2.end()) >= n_comps)
            throw std::invalid_argument(
                "havel_hakimi_regular: cannot produce a connected graph for this degree");
        g = std::move(merged);
    }

    g.validate();
    if (!g.is_regular(degree) || !g.is_connected())
        throw std::invalid_argument("havel_hakimi_regular: construction failed");
    return g;
}

void write_edge_list_csv(const PeGraph& graph, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "pe_a,pe_b\n";
    for (auto [a, b] : graph.edges()) out << a << ',' << b << '\n';
}

void ExchangeMap::validate() const {
    const std::size_t n = static_cast<std::size_t>(m_pes) * k_per_pe;
    if (forward.size() != n) throw std::invalid_argument("exchange map: size mismatch");
    std::vector<char> hit(n, 0);
    std::vector<int> incoming(m_pes, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t t = forward[i];
        if (t >= n) throw std::invalid_argument("exchange map: target out of range");
        if (hit[t]) throw std::invalid_argument("exchange map: not a bijection");
        hit[t] = 1;
        ++incoming[t / k_per_pe];
    }
    // Bijectivity on a product of equal-size slot sets forces equal counts,
    // checked anyway as a direct audit of slot-count preservation.
    for (int m = 0; m < m_pes; ++m)
        if (incoming[m] != k_per_pe)
            throw std::invalid_argument("exchange map: per-PE slot count not preserved");
}

bool ExchangeMap::is_identity() const {
    for (std::size_t i = 0; i < forward.size(); ++i)
        if (forward[i] != i) return false;
    return true;
}

int ExchangeMap::non_identity_slots(int m) const {
    int count = 0;
    for (int k = 0; k < k_per_pe; ++k) {
        const std::size_t i = static_cast<std::size_t>(m) * k_per_pe + k;
        if (forward[i] / static_cast<std::uint32_t>(k_per_pe) != static_cast<std::uint32_t>(m))
            ++count;
    }
    return count;
}

namespace {

ExchangeMap make_identity(int m_pes, int k_per_pe) {
    if (m_pes < 1 || k_per_pe < 1)
        throw std::invalid_argument("exchange map: m_pes and k_per_pe must be >= 1");
    ExchangeMap map;
    map.m_pes = m_pes;
    map.k_per_pe = k_per_pe;
    map.forward.resize(static_cast<std::size_t>(m_pes) * k_per_pe);
    std::iota(map.forward.begin(), map.forward.end(), 0u);
    return map;
}

}  // namespace

ExchangeMap identity_map(int m_pes, int k_per_pe) { return make_identity(m_pes, k_per_pe); }

ExchangeMap circular_map(int m_pes, int k_per_pe) {
    if (k_per_pe < 2) throw std::invalid_argument("circular_map: k_per_pe must be >= 2");
    ExchangeMap map = make_identity(m_pes, k_per_pe);
    const auto flat = [k_per_pe](int m, int k) {
        return static_cast<std::uint32_t>(m) * k_per_pe + k;
    };
    for (int m = 0; m < m_pes; ++m) {
        const int prev = (m - 1 + m_pes) % m_pes;
        const int next = (m + 1) % m_pes;
        map.forward[flat(m, 0)] = flat(prev, k_per_pe - 1);
        map.forward[flat(m, k_per_pe - 1)] = flat(next, 0);
    }
    map.validate();
    return map;
}

ExchangeMap block_exchange_map(const PeGraph& graph, int k_per_pe, int per_neighbor) {
    graph.validate();
    if (per_neighbor < 0) throw std::invalid_argument("block_exchange_map: per_neighbor < 0");
    for (int m = 0; m < graph.m_pes; ++m) {
        if (static_cast<long long>(per_neighbor) * graph.degree_of(m) > k_per_pe)
            throw std::invalid_argument(
                "block_exchange_map: per_neighbor * degree exceeds k_per_pe at PE " +
                std::to_string(m));
    }
    ExchangeMap map = make_identity(graph.m_pes, k_per_pe);
    if (per_neighbor == 0) return map;
    const auto flat = [k_per_pe](int m, int k) {
        return static_cast<std::uint32_t>(m) * k_per_pe + k;
    };
    // Block b of PE m (neighbors ascending) pairs with the block that points
    // back at m on the other side, making the map an involution.
    auto block_index = [&graph](int m, int neighbor) {
        const auto& nbrs = graph.adjacency[m];
        return static_cast<int>(std::lower_bound(nbrs.begin(), nbrs.end(), neighbor) -
                                nbrs.begin());
    };
    for (int m = 0; m < graph.m_pes; ++m) {
        for (int u : graph.adjacency[m]) {
            if (m > u) continue;
            const int bm = block_index(m, u);
            const int bu = block_index(u, m);
            for (int i = 0; i < per_neighbor; ++i) {
                const auto src = flat(m, bm * per_neighbor + i);
                const auto dst = flat(u, bu * per_neighbor + i);
                map.forward[src] = dst;
                map.forward[dst] = src;
            }
        }
    }
    map.validate();
    return map;
}

void write_map_csv(const ExchangeMap& map, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "m,k,u,v\n";
    for (int m = 0; m < map.m_pes; ++m) {
        for (int k = 0; k < map.k_per_pe; ++k) {
            const auto [u, v] = map.apply(m, k);
            out << m << ',' << k << ',' << u << ',' << v << '\n';
        }
    }
}

int default_degree(int m_pes) {
    if (m_pes < 2) throw std::invalid_argument("default_degree: need at least 2 PEs");
    if (m_pes == 2) return 1;
    // A connected regular graph on 3+ vertices needs degree >= 2; odd
    // m_pes * degree is infeasible, bump once.
    int degree = std::max(2, m_pes / 4);
    if ((static_cast<long long>(m_pes) * degree) % 2 != 0) ++degree;
    return std::min(degree, m_pes - 1);
}

int default_per_neighbor(int k_per_pe, int m_pes, int degree) {
    if (degree < 1) throw std::invalid_argument("default_per_neighbor: degree must be >= 1");
    const int target = static_cast<int>(3.6 * k_per_pe / m_pes);
    return std::min(target, k_per_pe / degree);
}

}  // namespace drna
