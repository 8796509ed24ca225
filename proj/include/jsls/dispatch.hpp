#pragma once

#include <vector>

#include "jsls/graph.hpp"

namespace jsls {

namespace detail {

// Serial schedule generation: one dispatchable op per iteration, placed at its
// earliest feasible start. `pick` chooses among the jobs with work left.
template <typename Pick>
OrientedGraph dispatch_schedule(const Instance& inst, Pick pick) {
    const int J = inst.num_jobs;
    const int M = inst.num_machines;
    std::vector<int> next_step(static_cast<std::size_t>(J), 0);
    std::vector<Time> job_ready(static_cast<std::size_t>(J), 0);
    std::vector<Time> mach_ready(static_cast<std::size_t>(M), 0);
    std::vector<std::vector<OpId>> orders(static_cast<std::size_t>(M));

    for (int scheduled = 0; scheduled < J * M; ++scheduled) {
        const int j = pick(next_step, job_ready, mach_ready);
        const int s = next_step[static_cast<std::size_t>(j)];
        const auto& e = inst.at(j, s);
        const Time start = std::max(job_ready[static_cast<std::size_t>(j)],
                                    mach_ready[static_cast<std::size_t>(e.machine)]);
        job_ready[static_cast<std::size_t>(j)] = start + e.processing;
        mach_ready[static_cast<std::size_t>(e.machine)] = start + e.processing;
        orders[static_cast<std::size_t>(e.machine)].push_back(OpId::op(j, s));
        ++next_step[static_cast<std::size_t>(j)];
    }
    return OrientedGraph::build(inst, orders);
}

}  // namespace detail

// Priority dispatching by minimum ratio of flow due date to most work
// remaining: FDD(O_ji) = sum of processing through step i, MWKR(O_ji) = sum of
// processing from step i to the end of the job. Ties go to the smallest job
// id, so the construction is deterministic. Ratios are compared by integer
// cross-multiplication.
inline OrientedGraph fdd_mwkr_init(const Instance& inst) {
    const int M = inst.num_machines;
    // prefix[j][s] = sum of processing times of job j through step s inclusive.
    std::vector<std::vector<Time>> prefix(static_cast<std::size_t>(inst.num_jobs));
    std::vector<Time> total(static_cast<std::size_t>(inst.num_jobs), 0);
    for (int j = 0; j < inst.num_jobs; ++j) {
        auto& row = prefix[static_cast<std::size_t>(j)];
        row.resize(static_cast<std::size_t>(M));
        Time acc = 0;
        for (int s = 0; s < M; ++s) {
            acc += inst.at(j, s).processing;
            row[static_cast<std::size_t>(s)] = acc;
        }
        total[static_cast<std::size_t>(j)] = acc;
    }

    auto pick = [&](const std::vector<int>& next_step, const std::vector<Time>&, const std::vector<Time>&) {
        int best = -1;
        Time best_fdd = 0, best_mwkr = 1;
        for (int j = 0; j < inst.num_jobs; ++j) {
            const int s = next_step[static_cast<std::size_t>(j)];
            if (s >= M) continue;
            const Time fdd = prefix[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)];
            const Time mwkr = total[static_cast<std::size_t>(j)] -
                              (s > 0 ? prefix[static_cast<std::size_t>(j)][static_cast<std::size_t>(s - 1)] : 0);
            if (best < 0 || fdd * best_mwkr < best_fdd * mwkr) {
                best = j;
                best_fdd = fdd;
                best_mwkr = mwkr;
            }
        }
        return best;
    };
    return detail::dispatch_schedule(inst, pick);
}

// Feasible orientation from randomized dispatching: each iteration picks a
// uniformly random job among those with work left.
inline OrientedGraph random_init(const Instance& inst, Rng& rng) {
    auto pick = [&](const std::vector<int>& next_step, const std::vector<Time>&, const std::vector<Time>&) {
        std::vector<int> open;
        for (int j = 0; j < inst.num_jobs; ++j) {
            if (next_step[static_cast<std::size_t>(j)] < inst.num_machines) open.push_back(j);
        }
        return open[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(open.size())))];
    };
    return detail::dispatch_schedule(inst, pick);
}

}  // namespace jsls
