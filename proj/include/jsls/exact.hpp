#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "jsls/dispatch.hpp"
#include "jsls/graph.hpp"

namespace jsls {
namespace exact {

// Optimum makespan by enumerating every acyclic orientation, i.e. every
// combination of per-machine job permutations. Cost is (J!)^M; intended for
// instances up to 3x3.
inline Time exhaustive_optimum(const Instance& inst) {
    std::vector<std::vector<int>> perms;
    std::vector<int> base(static_cast<std::size_t>(inst.num_jobs));
    std::iota(base.begin(), base.end(), 0);
    std::vector<int> perm = base;
    do {
        perms.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));

    Time best = -1;
    std::vector<std::size_t> choice(static_cast<std::size_t>(inst.num_machines), 0);
    std::vector<std::vector<int>> orders(static_cast<std::size_t>(inst.num_machines));
    for (;;) {
        for (int m = 0; m < inst.num_machines; ++m) orders[static_cast<std::size_t>(m)] = perms[choice[static_cast<std::size_t>(m)]];
        OrientedGraph g = OrientedGraph::from_job_permutations(inst, orders);
        if (is_acyclic(g)) {
            const Time mk = compute_times(g).makespan;
            if (best < 0 || mk < best) best = mk;
        }
        int m = 0;
        while (m < inst.num_machines) {
            if (++choice[static_cast<std::size_t>(m)] < perms.size()) break;
            choice[static_cast<std::size_t>(m)] = 0;
            ++m;
        }
        if (m == inst.num_machines) break;
    }
    return best;
}

namespace detail {

struct BbContext {
    const Instance* inst;
    Time upper;
    long long nodes = 0;
    long long node_limit;
    // Static per-op data: remaining work from (and including) each step.
    std::vector<std::vector<Time>> tail;  // tail[j][s] = sum p of steps >= s
};

// max over machines of: min head + total remaining work on machine + min tail.
// Heads are earliest starts of the not-yet-scheduled ops given current ready
// times and the job chain; tails likewise toward the sink.
inline Time machine_bound(const BbContext& ctx, const std::vector<int>& next_step,
                          const std::vector<Time>& job_ready, const std::vector<Time>& mach_ready) {
    const Instance& inst = *ctx.inst;
    Time best = 0;
    for (int j = 0; j < inst.num_jobs; ++j) {
        if (next_step[static_cast<std::size_t>(j)] < inst.num_machines) {
            best = std::max(best, job_ready[static_cast<std::size_t>(j)] +
                                      ctx.tail[static_cast<std::size_t>(j)]
                                              [static_cast<std::size_t>(next_step[static_cast<std::size_t>(j)])]);
        } else {
            best = std::max(best, job_ready[static_cast<std::size_t>(j)]);
        }
    }
    for (int m = 0; m < inst.num_machines; ++m) {
        Time head = -1, rem = 0, tail_min = -1;
        for (int j = 0; j < inst.num_jobs; ++j) {
            Time job_head = job_ready[static_cast<std::size_t>(j)];
            for (int s = next_step[static_cast<std::size_t>(j)]; s < inst.num_machines; ++s) {
                const auto& e = inst.at(j, s);
                if (e.machine == m) {
                    rem += e.processing;
                    if (head < 0 || job_head < head) head = job_head;
                    const Time t = ctx.tail[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)] - e.processing;
                    if (tail_min < 0 || t < tail_min) tail_min = t;
                    break;
                }
                job_head += e.processing;
            }
        }
        if (rem > 0) {
            best = std::max(best, std::max(head, mach_ready[static_cast<std::size_t>(m)]) + rem + tail_min);
        } else {
            best = std::max(best, mach_ready[static_cast<std::size_t>(m)]);
        }
    }
    return best;
}

inline void bb_dfs(BbContext& ctx, std::vector<int>& next_step, std::vector<Time>& job_ready,
                   std::vector<Time>& mach_ready, int remaining) {
    if (++ctx.nodes > ctx.node_limit) throw Error("bb_optimum: node limit exceeded");
    const Instance& inst = *ctx.inst;
    if (remaining == 0) {
        Time mk = 0;
        for (Time r : job_ready) mk = std::max(mk, r);
        ctx.upper = std::min(ctx.upper, mk);
        return;
    }
    if (machine_bound(ctx, next_step, job_ready, mach_ready) >= ctx.upper) return;

    // Giffler-Thompson branching: take the machine of the earliest completing
    // eligible op and branch on its conflict set. Enumerates active schedules.
    Time cmin = -1;
    int star_machine = -1;
    for (int j = 0; j < inst.num_jobs; ++j) {
        const int s = next_step[static_cast<std::size_t>(j)];
        if (s >= inst.num_machines) continue;
        const auto& e = inst.at(j, s);
        const Time start = std::max(job_ready[static_cast<std::size_t>(j)], mach_ready[static_cast<std::size_t>(e.machine)]);
        const Time done = start + e.processing;
        if (cmin < 0 || done < cmin) {
            cmin = done;
            star_machine = e.machine;
        }
    }

    std::vector<std::pair<Time, int>> conflict;  // (completion, job) on star machine
    for (int j = 0; j < inst.num_jobs; ++j) {
        const int s = next_step[static_cast<std::size_t>(j)];
        if (s >= inst.num_machines) continue;
        const auto& e = inst.at(j, s);
        if (e.machine != star_machine) continue;
        const Time start = std::max(job_ready[static_cast<std::size_t>(j)], mach_ready[static_cast<std::size_t>(e.machine)]);
        if (start < cmin) conflict.emplace_back(start + e.processing, j);
    }
    std::sort(conflict.begin(), conflict.end());

    for (const auto& [done, j] : conflict) {
        const int s = next_step[static_cast<std::size_t>(j)];
        const Time old_job = job_ready[static_cast<std::size_t>(j)];
        const Time old_mach = mach_ready[static_cast<std::size_t>(star_machine)];
        job_ready[static_cast<std::size_t>(j)] = done;
        mach_ready[static_cast<std::size_t>(star_machine)] = done;
        next_step[static_cast<std::size_t>(j)] = s + 1;
        bb_dfs(ctx, next_step, job_ready, mach_ready, remaining - 1);
        job_ready[static_cast<std::size_t>(j)] = old_job;
        mach_ready[static_cast<std::size_t>(star_machine)] = old_mach;
        next_step[static_cast<std::size_t>(j)] = s;
    }
}

}  // namespace detail

// Optimal makespan by depth-first branch and bound over active schedules,
// pruned with single-machine relaxation bounds. Practical up to about 6x6.
inline Time bb_optimum(const Instance& inst, long long node_limit = 200'000'000) {
    detail::BbContext ctx;
    ctx.inst = &inst;
    ctx.node_limit = node_limit;
    ctx.tail.resize(static_cast<std::size_t>(inst.num_jobs));
    for (int j = 0; j < inst.num_jobs; ++j) {
        auto& t = ctx.tail[static_cast<std::size_t>(j)];
        t.assign(static_cast<std::size_t>(inst.num_machines), 0);
        Time acc = 0;
        for (int s = inst.num_machines - 1; s >= 0; --s) {
            acc += inst.at(j, s).processing;
            t[static_cast<std::size_t>(s)] = acc;
        }
    }
    ctx.upper = compute_times(fdd_mwkr_init(inst)).makespan;

    std::vector<int> next_step(static_cast<std::size_t>(inst.num_jobs), 0);
    std::vector<Time> job_ready(static_cast<std::size_t>(inst.num_jobs), 0);
    std::vector<Time> mach_ready(static_cast<std::size_t>(inst.num_machines), 0);
    detail::bb_dfs(ctx, next_step, job_ready, mach_ready, inst.num_jobs * inst.num_machines);
    return ctx.upper;
}

}  // namespace exact
}  // namespace jsls
