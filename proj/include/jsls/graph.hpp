#pragma once

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "jsls/instance.hpp"

namespace jsls {

class BuildError : public Error {
public:
    enum class Kind { WrongMachineAssignment, MissingOp, DuplicateOp, InvalidMove };
    BuildError(Kind kind, const std::string& msg) : Error(msg), kind(kind) {}
    Kind kind;
};

class CyclicGraphError : public Error {
public:
    explicit CyclicGraphError(const std::string& msg) : Error(msg) {}
};

// A complete solution: one processing order per machine, inducing a directed
// graph over operations plus artificial source/sink. Nodes are dense ints:
// op (j,s) -> j*M+s, source -> J*M, sink -> J*M+1. The graph references the
// instance; the instance must outlive every graph built from it.
class OrientedGraph {
public:
    OrientedGraph() = default;

    static OrientedGraph build(const Instance& inst, const std::vector<std::vector<OpId>>& machine_orders) {
        if (static_cast<int>(machine_orders.size()) != inst.num_machines) {
            throw BuildError(BuildError::Kind::MissingOp, "expected one order per machine");
        }
        OrientedGraph g;
        g.inst_ = &inst;
        g.orders_.assign(static_cast<std::size_t>(inst.num_machines), {});
        std::vector<int> seen(static_cast<std::size_t>(inst.num_ops()), 0);
        for (int m = 0; m < inst.num_machines; ++m) {
            auto& order = g.orders_[static_cast<std::size_t>(m)];
            for (const OpId& id : machine_orders[static_cast<std::size_t>(m)]) {
                if (!id.is_op() || id.job < 0 || id.job >= inst.num_jobs || id.step < 0 ||
                    id.step >= inst.num_machines) {
                    throw BuildError(BuildError::Kind::WrongMachineAssignment,
                                     "invalid op " + to_string(id) + " in order of machine " + std::to_string(m));
                }
                if (inst.at(id.job, id.step).machine != m) {
                    throw BuildError(BuildError::Kind::WrongMachineAssignment,
                                     to_string(id) + " does not run on machine " + std::to_string(m));
                }
                const int node = id.job * inst.num_machines + id.step;
                if (++seen[static_cast<std::size_t>(node)] == 2) {
                    throw BuildError(BuildError::Kind::DuplicateOp, to_string(id) + " listed twice");
                }
                order.push_back(node);
            }
        }
        for (int j = 0; j < inst.num_jobs; ++j) {
            for (int s = 0; s < inst.num_machines; ++s) {
                if (!seen[static_cast<std::size_t>(j * inst.num_machines + s)]) {
                    throw BuildError(BuildError::Kind::MissingOp,
                                     to_string(OpId::op(j, s)) + " missing from its machine order");
                }
            }
        }
        g.rebuild_machine_adjacency();
        return g;
    }

    // Convenience: orders given as job permutations per machine (each job runs
    // exactly once on every machine, so the job id identifies the op).
    static OrientedGraph from_job_permutations(const Instance& inst, const std::vector<std::vector<int>>& perms) {
        std::vector<std::vector<OpId>> orders(static_cast<std::size_t>(inst.num_machines));
        for (int m = 0; m < inst.num_machines; ++m) {
            for (int job : perms[static_cast<std::size_t>(m)]) {
                if (job < 0 || job >= inst.num_jobs) {
                    throw BuildError(BuildError::Kind::WrongMachineAssignment,
                                     "job " + std::to_string(job) + " out of range");
                }
                const int step = inst.step_of_machine(job, m);
                if (step < 0) {
                    throw BuildError(BuildError::Kind::WrongMachineAssignment,
                                     "job " + std::to_string(job) + " never visits machine " + std::to_string(m));
                }
                orders[static_cast<std::size_t>(m)].push_back(OpId::op(job, step));
            }
        }
        return build(inst, orders);
    }

    const Instance& instance() const { return *inst_; }
    int num_machines() const { return inst_->num_machines; }
    int num_jobs() const { return inst_->num_jobs; }
    int num_nodes() const { return inst_->num_ops() + 2; }
    int source() const { return inst_->num_ops(); }
    int sink() const { return inst_->num_ops() + 1; }

    int node_of(const OpId& id) const {
        if (id.is_source()) return source();
        if (id.is_sink()) return sink();
        return id.job * inst_->num_machines + id.step;
    }
    OpId opid_of(int node) const {
        if (node == source()) return OpId::source();
        if (node == sink()) return OpId::sink();
        return OpId::op(node / inst_->num_machines, node % inst_->num_machines);
    }

    Time processing(int node) const {
        if (node >= inst_->num_ops()) return 0;
        const OpId id = opid_of(node);
        return inst_->at(id.job, id.step).processing;
    }
    int machine_of(int node) const {
        const OpId id = opid_of(node);
        return inst_->at(id.job, id.step).machine;
    }

    const std::vector<std::vector<int>>& machine_orders() const { return orders_; }

    int job_pred(int node) const { return node % inst_->num_machines == 0 ? -1 : node - 1; }
    int job_succ(int node) const { return node % inst_->num_machines == inst_->num_machines - 1 ? -1 : node + 1; }
    int mach_pred(int node) const { return mach_pred_[static_cast<std::size_t>(node)]; }
    int mach_succ(int node) const { return mach_succ_[static_cast<std::size_t>(node)]; }

    // In-neighbors of a node, source/sink arcs included.
    void predecessors(int node, std::vector<int>& out) const {
        out.clear();
        if (node == source()) return;
        if (node == sink()) {
            for (int j = 0; j < inst_->num_jobs; ++j) out.push_back(j * inst_->num_machines + inst_->num_machines - 1);
            return;
        }
        const int jp = job_pred(node);
        out.push_back(jp < 0 ? source() : jp);
        const int mp = mach_pred(node);
        if (mp >= 0) out.push_back(mp);
    }

    void successors(int node, std::vector<int>& out) const {
        out.clear();
        if (node == sink()) return;
        if (node == source()) {
            for (int j = 0; j < inst_->num_jobs; ++j) out.push_back(j * inst_->num_machines);
            return;
        }
        const int js = job_succ(node);
        out.push_back(js < 0 ? sink() : js);
        const int ms = mach_succ(node);
        if (ms >= 0) out.push_back(ms);
    }

    // All arcs of the oriented graph, as (from, to) node pairs.
    std::vector<std::pair<int, int>> arcs() const {
        std::vector<std::pair<int, int>> out;
        const int M = inst_->num_machines;
        out.reserve(static_cast<std::size_t>(inst_->num_jobs * (M + 1) + M * (inst_->num_jobs - 1)));
        for (int j = 0; j < inst_->num_jobs; ++j) {
            out.emplace_back(source(), j * M);
            for (int s = 0; s + 1 < M; ++s) out.emplace_back(j * M + s, j * M + s + 1);
            out.emplace_back(j * M + M - 1, sink());
        }
        for (const auto& order : orders_) {
            for (std::size_t i = 0; i + 1 < order.size(); ++i) out.emplace_back(order[i], order[i + 1]);
        }
        return out;
    }

    // Swaps two machine-adjacent entries. Callers go through moves.hpp.
    void swap_adjacent(int machine, std::size_t pos) {
        auto& order = orders_[static_cast<std::size_t>(machine)];
        std::swap(order[pos], order[pos + 1]);
        const int a = order[pos];
        const int b = order[pos + 1];
        const int before = pos > 0 ? order[pos - 1] : -1;
        const int after = pos + 2 < order.size() ? order[pos + 2] : -1;
        set_mach_link(before, a);
        set_mach_link(a, b);
        set_mach_link(b, after);
    }

    bool operator==(const OrientedGraph& other) const { return orders_ == other.orders_; }

private:
    void rebuild_machine_adjacency() {
        mach_pred_.assign(static_cast<std::size_t>(inst_->num_ops()), -1);
        mach_succ_.assign(static_cast<std::size_t>(inst_->num_ops()), -1);
        for (const auto& order : orders_) {
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                mach_succ_[static_cast<std::size_t>(order[i])] = order[i + 1];
                mach_pred_[static_cast<std::size_t>(order[i + 1])] = order[i];
            }
        }
    }

    void set_mach_link(int from, int to) {
        if (from >= 0) mach_succ_[static_cast<std::size_t>(from)] = to;
        if (to >= 0) mach_pred_[static_cast<std::size_t>(to)] = from;
    }

    const Instance* inst_ = nullptr;
    std::vector<std::vector<int>> orders_;
    std::vector<int> mach_pred_;
    std::vector<int> mach_succ_;
};

// Kahn's algorithm; also used to detect cycles.
inline std::optional<std::vector<int>> topological_order(const OrientedGraph& g) {
    const int n = g.num_nodes();
    std::vector<int> indeg(static_cast<std::size_t>(n), 0);
    std::vector<int> nbr;
    for (int v = 0; v < n; ++v) {
        g.predecessors(v, nbr);
        indeg[static_cast<std::size_t>(v)] = static_cast<int>(nbr.size());
    }
    std::vector<int> stack;
    for (int v = 0; v < n; ++v)
        if (indeg[static_cast<std::size_t>(v)] == 0) stack.push_back(v);
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n));
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        order.push_back(v);
        g.successors(v, nbr);
        for (int w : nbr)
            if (--indeg[static_cast<std::size_t>(w)] == 0) stack.push_back(w);
    }
    if (static_cast<int>(order.size()) != n) return std::nullopt;
    return order;
}

inline bool is_acyclic(const OrientedGraph& g) { return topological_order(g).has_value(); }

// Earliest/latest start times plus the makespan. Indexed by node id; the
// artificial nodes carry est(source)=0 and est(sink)=makespan.
struct ScheduleTimes {
    std::vector<Time> est;
    std::vector<Time> lst;
    Time makespan = 0;
};

// Single forward and backward pass in topological order.
inline ScheduleTimes compute_times(const OrientedGraph& g) {
    auto order = topological_order(g);
    if (!order) throw CyclicGraphError("compute_times: graph has a cycle");

    const int n = g.num_nodes();
    ScheduleTimes t;
    t.est.assign(static_cast<std::size_t>(n), 0);
    t.lst.assign(static_cast<std::size_t>(n), 0);
    std::vector<int> nbr;
    for (int v : *order) {
        Time best = 0;
        g.predecessors(v, nbr);
        for (int p : nbr) best = std::max(best, t.est[static_cast<std::size_t>(p)] + g.processing(p));
        t.est[static_cast<std::size_t>(v)] = best;
    }
    t.makespan = t.est[static_cast<std::size_t>(g.sink())];
    for (auto it = order->rbegin(); it != order->rend(); ++it) {
        const int v = *it;
        Time best = t.makespan;
        g.successors(v, nbr);
        for (int s : nbr) best = std::min(best, t.lst[static_cast<std::size_t>(s)]);
        t.lst[static_cast<std::size_t>(v)] = best - g.processing(v);
        if (v == g.sink()) t.lst[static_cast<std::size_t>(v)] = t.makespan;
    }
    return t;
}

// A longest source-to-sink path together with its maximal same-machine runs.
struct CriticalPath {
    std::vector<int> nodes;                // source ... sink
    std::vector<std::vector<int>> blocks;  // real ops only
    std::vector<int> block_machines;
};

// Walks backwards from the sink, picking uniformly among predecessors that
// realize the earliest start of the current node.
inline CriticalPath critical_path(const OrientedGraph& g, const ScheduleTimes& t, Rng& rng) {
    CriticalPath cp;
    std::vector<int> rev;
    std::vector<int> nbr;
    std::vector<int> tight;
    int cur = g.sink();
    rev.push_back(cur);
    while (cur != g.source()) {
        g.predecessors(cur, nbr);
        tight.clear();
        for (int p : nbr) {
            if (t.est[static_cast<std::size_t>(p)] + g.processing(p) == t.est[static_cast<std::size_t>(cur)]) {
                tight.push_back(p);
            }
        }
        cur = tight.size() == 1 ? tight[0] : tight[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(tight.size())))];
        rev.push_back(cur);
    }
    cp.nodes.assign(rev.rbegin(), rev.rend());

    for (std::size_t i = 1; i + 1 < cp.nodes.size(); ++i) {
        const int node = cp.nodes[i];
        const int m = g.machine_of(node);
        if (cp.blocks.empty() || cp.block_machines.back() != m) {
            cp.blocks.push_back({node});
            cp.block_machines.push_back(m);
        } else {
            cp.blocks.back().push_back(node);
        }
    }
    return cp;
}

// ---------------------------------------------------------------------------
// Solution serialization: one line per machine listing job ids in processing
// order. Schedule export: CSV rows `job,step,machine,start,processing`.
// ---------------------------------------------------------------------------

inline std::string serialize_orders(const OrientedGraph& g) {
    std::ostringstream out;
    for (const auto& order : g.machine_orders()) {
        for (std::size_t i = 0; i < order.size(); ++i) out << (i ? " " : "") << g.opid_of(order[i]).job;
        out << "\n";
    }
    return out.str();
}

inline OrientedGraph parse_orders(const Instance& inst, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<int>> perms;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') continue;
        std::istringstream ls(line);
        std::vector<int> jobs;
        int j;
        while (ls >> j) jobs.push_back(j);
        if (!jobs.empty()) perms.push_back(std::move(jobs));
    }
    if (static_cast<int>(perms.size()) != inst.num_machines) {
        throw BuildError(BuildError::Kind::MissingOp,
                         "expected " + std::to_string(inst.num_machines) + " machine lines, found " +
                             std::to_string(perms.size()));
    }
    return OrientedGraph::from_job_permutations(inst, perms);
}

inline std::string schedule_csv(const OrientedGraph& g, const ScheduleTimes& t) {
    std::ostringstream out;
    out << "job,step,machine,start,processing\n";
    for (int j = 0; j < g.num_jobs(); ++j) {
        for (int s = 0; s < g.num_machines(); ++s) {
            const int node = j * g.num_machines() + s;
            const auto& e = g.instance().at(j, s);
            out << j << "," << s << "," << e.machine << "," << t.est[static_cast<std::size_t>(node)] << ","
                << e.processing << "\n";
        }
    }
    return out.str();
}

// Gantt data for external plotting: per machine, the ops in processing order
// with their start times.
inline nlohmann::json gantt_json(const OrientedGraph& g, const ScheduleTimes& t) {
    nlohmann::json machines = nlohmann::json::array();
    for (int m = 0; m < g.num_machines(); ++m) {
        nlohmann::json ops = nlohmann::json::array();
        for (int node : g.machine_orders()[static_cast<std::size_t>(m)]) {
            const OpId id = g.opid_of(node);
            ops.push_back({{"job", id.job},
                           {"step", id.step},
                           {"start", t.est[static_cast<std::size_t>(node)]},
                           {"duration", g.processing(node)}});
        }
        machines.push_back({{"machine", m}, {"ops", ops}});
    }
    return {{"makespan", t.makespan}, {"machines", machines}};
}

}  // namespace jsls
