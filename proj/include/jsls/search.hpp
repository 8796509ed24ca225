#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "jsls/dispatch.hpp"
#include "jsls/moves.hpp"
#include "jsls/tbgat.hpp"
#include "jsls/toposort.hpp"

namespace jsls {
namespace search {

enum class Mode { Sample, Greedy };

inline Mode mode_from_string(const std::string& s) {
    if (s == "sample") return Mode::Sample;
    if (s == "greedy") return Mode::Greedy;
    throw Error("unknown mode '" + s + "' (expected sample|greedy)");
}

// Scores a non-empty move list into probabilities.
using PolicyFn = std::function<tbgat::ActionDistribution(
    const OrientedGraph&, const ScheduleTimes&, const toposort::TopoRanks&, const std::vector<Move>&)>;

inline PolicyFn uniform_policy() {
    return [](const OrientedGraph&, const ScheduleTimes&, const toposort::TopoRanks&,
              const std::vector<Move>& moves) {
        tbgat::ActionDistribution d;
        const double p = 1.0 / static_cast<double>(moves.size());
        d.probs.assign(moves.size(), p);
        d.log_probs.assign(moves.size(), std::log(p));
        d.entropy = std::log(static_cast<double>(moves.size()));
        return d;
    };
}

inline PolicyFn tbgat_policy(const tbgat::PolicyParams& params) {
    return [&params](const OrientedGraph& g, const ScheduleTimes& t, const toposort::TopoRanks& ranks,
                     const std::vector<Move>& moves) {
        return tbgat::evaluate_policy(params, g, t, ranks, moves);
    };
}

// Seed solution plus everything derived from it, and the incumbent.
struct SearchState {
    OrientedGraph graph;
    ScheduleTimes times;
    toposort::TopoRanks ranks;
    OrientedGraph incumbent_graph;
    Time incumbent_makespan = 0;
    int step_count = 0;
    bool terminal = false;
    Rng rng;

    SearchState(OrientedGraph g, std::uint64_t seed) : graph(std::move(g)), rng(seed) {
        times = compute_times(graph);
        ranks = toposort::ranks_for_graph(graph);
        incumbent_graph = graph;
        incumbent_makespan = times.makespan;
    }
};

struct StepRecord {
    int move_index = -1;
    Time reward = 0;
    double log_prob = 0.0;
    double entropy = 0.0;
    bool terminal = false;
    Time makespan_after = 0;
    Move move;
};

inline SearchState init_state(const Instance& inst, const std::string& init_rule, std::uint64_t seed) {
    if (init_rule == "fdd-mwkr") {
        return SearchState(fdd_mwkr_init(inst), mix_seed(seed, 1));
    }
    if (init_rule == "random") {
        Rng init_rng(mix_seed(seed, 2));
        return SearchState(random_init(inst, init_rng), mix_seed(seed, 1));
    }
    throw Error("unknown init rule '" + init_rule + "' (expected fdd-mwkr|random)");
}

// One MDP transition: sample a critical path, enumerate its N5 moves, pick one
// by the policy, apply it, recompute the derived data, update the incumbent.
// An empty move set marks the state terminal and leaves it unchanged.
inline StepRecord step(SearchState& state, const PolicyFn& policy, Mode mode) {
    StepRecord rec;
    const CriticalPath cp = critical_path(state.graph, state.times, state.rng);
    const std::vector<Move> moves = generate_moves(state.graph, cp);
    if (moves.empty()) {
        state.terminal = true;
        rec.terminal = true;
        rec.makespan_after = state.times.makespan;
        return rec;
    }
    const tbgat::ActionDistribution dist = policy(state.graph, state.times, state.ranks, moves);
    int idx = 0;
    if (mode == Mode::Sample) {
        idx = state.rng.sample_categorical(dist.probs);
    } else {
        for (std::size_t i = 1; i < dist.probs.size(); ++i) {
            if (dist.probs[i] > dist.probs[static_cast<std::size_t>(idx)]) idx = static_cast<int>(i);
        }
    }

    const Time incumbent_before = state.incumbent_makespan;
    state.graph = apply_move(state.graph, moves[static_cast<std::size_t>(idx)]);
    state.times = compute_times(state.graph);
    state.ranks = toposort::ranks_for_graph(state.graph);
    state.step_count += 1;

    rec.move_index = idx;
    rec.move = moves[static_cast<std::size_t>(idx)];
    rec.log_prob = dist.log_probs[static_cast<std::size_t>(idx)];
    rec.entropy = dist.entropy;
    rec.makespan_after = state.times.makespan;
    rec.reward = std::max<Time>(incumbent_before - state.times.makespan, 0);
    if (state.times.makespan < state.incumbent_makespan) {
        state.incumbent_makespan = state.times.makespan;
        state.incumbent_graph = state.graph;
    }
    return rec;
}

struct SearchResult {
    Time initial_makespan = 0;
    Time best_makespan = 0;
    OrientedGraph best_graph;
    std::vector<StepRecord> trace;
    bool terminal = false;
    double wall_seconds = 0.0;
};

inline SearchResult run_from_state(SearchState& state, const PolicyFn& policy, int max_steps, Mode mode) {
    SearchResult res;
    res.initial_makespan = state.times.makespan;
    const auto start = std::chrono::steady_clock::now();
    for (int t = 0; t < max_steps && !state.terminal; ++t) {
        StepRecord rec = step(state, policy, mode);
        if (rec.terminal) break;
        res.trace.push_back(std::move(rec));
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.best_makespan = state.incumbent_makespan;
    res.best_graph = state.incumbent_graph;
    res.terminal = state.terminal;
    return res;
}

inline SearchResult run_search(const Instance& inst, const PolicyFn& policy, int max_steps, std::uint64_t seed,
                               Mode mode, const std::string& init_rule = "fdd-mwkr") {
    SearchState state = init_state(inst, init_rule, seed);
    return run_from_state(state, policy, max_steps, mode);
}

// One JSON object per executed step.
inline std::string trace_jsonl(const SearchResult& res) {
    std::ostringstream out;
    Time incumbent = res.initial_makespan;
    for (std::size_t i = 0; i < res.trace.size(); ++i) {
        const StepRecord& r = res.trace[i];
        incumbent = std::min(incumbent, r.makespan_after);
        nlohmann::json row = {
            {"step", i},
            {"makespan", r.makespan_after},
            {"incumbent", incumbent},
            {"reward", r.reward},
            {"move",
             {{"first", {r.move.first.job, r.move.first.step}},
              {"second", {r.move.second.job, r.move.second.step}},
              {"machine", r.move.machine}}},
        };
        out << row.dump() << "\n";
    }
    return out.str();
}

}  // namespace search
}  // namespace jsls
