#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "jsls/graph.hpp"

namespace jsls {
namespace toposort {

// Message value for nodes not yet reached by any source. Saturating: one more
// round keeps an unreached node unreached.
inline constexpr std::int64_t kUnreached = std::numeric_limits<std::int64_t>::min();

// Disjoint union of DAGs with a flat arc list; lets one pass rank many graphs.
struct BatchedDag {
    int num_nodes = 0;
    std::vector<int> graph_of;                 // node -> member graph index
    std::vector<std::pair<int, int>> arcs;     // (from, to), no cross-graph arcs
    int num_graphs = 0;

    // Appends a member graph; returns the node-id offset assigned to it.
    int append(int nodes, const std::vector<std::pair<int, int>>& graph_arcs) {
        const int offset = num_nodes;
        num_nodes += nodes;
        graph_of.resize(static_cast<std::size_t>(num_nodes), num_graphs);
        for (const auto& [u, v] : graph_arcs) arcs.emplace_back(u + offset, v + offset);
        ++num_graphs;
        return offset;
    }

    int append(const OrientedGraph& g) { return append(g.num_nodes(), g.arcs()); }

    BatchedDag reversed() const {
        BatchedDag r;
        r.num_nodes = num_nodes;
        r.graph_of = graph_of;
        r.num_graphs = num_graphs;
        r.arcs.reserve(arcs.size());
        for (const auto& [u, v] : arcs) r.arcs.emplace_back(v, u);
        return r;
    }
};

// Forward and backward topological ranks, indexed by batched node id.
struct TopoRanks {
    std::vector<std::int64_t> fwd;
    std::vector<std::int64_t> bwd;
};

namespace detail {
inline std::vector<int> in_degrees(const BatchedDag& dag) {
    std::vector<int> indeg(static_cast<std::size_t>(dag.num_nodes), 0);
    for (const auto& [u, v] : dag.arcs) {
        (void)u;
        ++indeg[static_cast<std::size_t>(v)];
    }
    return indeg;
}
}  // namespace detail

// Messages for round zero: sources at 0, everything else unreached.
inline std::vector<std::int64_t> initial_messages(const BatchedDag& dag) {
    const auto indeg = detail::in_degrees(dag);
    std::vector<std::int64_t> msg(static_cast<std::size_t>(dag.num_nodes));
    for (int v = 0; v < dag.num_nodes; ++v) {
        msg[static_cast<std::size_t>(v)] = indeg[static_cast<std::size_t>(v)] == 0 ? 0 : kUnreached;
    }
    return msg;
}

// One synchronous round: new(x) = max over in-neighbors y of (msg(y) + 1),
// with in-degree-0 nodes pinned at 0. All node updates read the old messages,
// so a data-parallel evaluation gives bit-identical results.
inline std::vector<std::int64_t> mpo_round(const BatchedDag& dag, const std::vector<std::int64_t>& messages) {
    const auto indeg = detail::in_degrees(dag);
    std::vector<std::int64_t> next(static_cast<std::size_t>(dag.num_nodes));
    for (int v = 0; v < dag.num_nodes; ++v) {
        next[static_cast<std::size_t>(v)] = indeg[static_cast<std::size_t>(v)] == 0 ? 0 : kUnreached;
    }
    for (const auto& [u, v] : dag.arcs) {
        const std::int64_t m = messages[static_cast<std::size_t>(u)];
        if (m == kUnreached) continue;
        next[static_cast<std::size_t>(v)] = std::max(next[static_cast<std::size_t>(v)], m + 1);
    }
    return next;
}

// Iterates mpo_round to its fixpoint. The resulting rank of x is the length in
// arcs of the longest path from any zero-in-degree node to x, which is a valid
// topological sort of each member graph. Throws CyclicGraphError when no
// fixpoint is reached within num_nodes rounds or a node stays unreached.
inline std::vector<std::int64_t> forward_ranks(const BatchedDag& dag, int* rounds_to_fixpoint = nullptr) {
    std::vector<std::int64_t> msg = initial_messages(dag);
    int rounds = 0;
    for (;;) {
        std::vector<std::int64_t> next = mpo_round(dag, msg);
        ++rounds;
        if (next == msg) break;
        msg = std::move(next);
        if (rounds > dag.num_nodes) throw CyclicGraphError("forward_ranks: no fixpoint, graph has a cycle");
    }
    for (std::int64_t m : msg) {
        if (m == kUnreached) throw CyclicGraphError("forward_ranks: unreachable node, graph has a cycle");
    }
    if (rounds_to_fixpoint) *rounds_to_fixpoint = rounds;
    return msg;
}

inline std::vector<std::int64_t> backward_ranks(const BatchedDag& dag, int* rounds_to_fixpoint = nullptr) {
    return forward_ranks(dag.reversed(), rounds_to_fixpoint);
}

inline TopoRanks ranks(const BatchedDag& dag) {
    TopoRanks r;
    r.fwd = forward_ranks(dag);
    r.bwd = backward_ranks(dag);
    return r;
}

// Both rank views for a single solution graph, indexed by graph node id.
inline TopoRanks ranks_for_graph(const OrientedGraph& g) {
    BatchedDag dag;
    dag.append(g);
    return ranks(dag);
}

}  // namespace toposort
}  // namespace jsls
