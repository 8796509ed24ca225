#pragma once

#include <vector>

#include "jsls/graph.hpp"

namespace jsls {

// An adjacent swap of two critical operations on one machine.
struct Move {
    OpId first;
    OpId second;
    int machine = 0;

    bool operator==(const Move&) const = default;
};

// N5 neighborhood of one critical path: for each block, the first and last
// adjacent pair, except the first pair of the initial block and the last pair
// of the final block. Size-2 blocks contribute a single pair.
inline std::vector<Move> generate_moves(const OrientedGraph& g, const CriticalPath& cp) {
    std::vector<Move> moves;
    const std::size_t nblocks = cp.blocks.size();
    for (std::size_t b = 0; b < nblocks; ++b) {
        const auto& block = cp.blocks[b];
        if (block.size() < 2) continue;
        const int machine = cp.block_machines[b];
        const bool is_first_block = b == 0;
        const bool is_last_block = b == nblocks - 1;
        const bool same_pair = block.size() == 2;

        if (!is_first_block) {
            moves.push_back(Move{g.opid_of(block[0]), g.opid_of(block[1]), machine});
        }
        if (!is_last_block && !(same_pair && !is_first_block)) {
            moves.push_back(Move{g.opid_of(block[block.size() - 2]), g.opid_of(block[block.size() - 1]), machine});
        }
    }
    return moves;
}

// Returns a new graph with the pair swapped on its machine. The two ops must
// be adjacent there; either orientation is accepted, so applying the same
// move twice restores the original graph.
inline OrientedGraph apply_move(const OrientedGraph& g, const Move& move) {
    if (move.machine < 0 || move.machine >= g.num_machines()) {
        throw BuildError(BuildError::Kind::InvalidMove, "machine " + std::to_string(move.machine) + " out of range");
    }
    const auto& order = g.machine_orders()[static_cast<std::size_t>(move.machine)];
    const int a = g.node_of(move.first);
    const int b = g.node_of(move.second);
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        if ((order[i] == a && order[i + 1] == b) || (order[i] == b && order[i + 1] == a)) {
            OrientedGraph out = g;
            out.swap_adjacent(move.machine, i);
            return out;
        }
    }
    throw BuildError(BuildError::Kind::InvalidMove,
                     to_string(move.first) + "," + to_string(move.second) + " not adjacent on machine " +
                         std::to_string(move.machine));
}

}  // namespace jsls
