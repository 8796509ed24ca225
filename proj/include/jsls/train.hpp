#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "jsls/exact.hpp"
#include "jsls/search.hpp"
#include "jsls/tbgat.hpp"

namespace jsls {
namespace train {

class TrainError : public Error {
public:
    enum class Kind { MissingTrace };
    TrainError(Kind kind, const std::string& msg) : Error(msg), kind(kind) {}
    Kind kind;
};

struct TrainConfig {
    int jobs = 10;
    int machines = 10;
    int batch = 64;
    int horizon = 500;        // T
    int update_period = 10;   // n
    double lr = 1e-5;
    double entropy_coef = 1e-5;
    double gamma = 1.0;
    long long total_instances = 128000;
    std::uint64_t seed = 0;
    std::string init_rule = "fdd-mwkr";
    int validation_instances = 20;
    int validation_steps = 100;
    int validate_every = 10;  // batches between validation passes; 0 disables
    int workers = 1;
    tbgat::Config arch;

    void check() const {
        if (batch < 1 || horizon < 1 || update_period < 1 || total_instances < 1) {
            throw Error("train config: B, T, n and I must be >= 1");
        }
        if (update_period > horizon) throw Error("train config: n must be <= T");
        if (entropy_coef < 0) throw Error("train config: EC must be >= 0");
        if (gamma <= 0 || gamma > 1) throw Error("train config: gamma must be in (0, 1]");
        arch.check();
    }
};

// One stored rollout step: the policy trace for the visited state, the action
// sampled from it, and the reward received.
struct SegmentStep {
    std::unique_ptr<tbgat::PolicyTrace> trace;
    int action = 0;
    Time reward = 0;
};

// Per-instance buffer of at most `update_period` steps; cleared on update.
using Segment = std::vector<SegmentStep>;

// Discounted suffix sums within one segment: R_j = sum_k gamma^(k-j) r_k.
inline std::vector<double> segment_returns(const std::vector<Time>& rewards, double gamma) {
    std::vector<double> returns(rewards.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        acc = static_cast<double>(rewards[i]) + gamma * acc;
        returns[i] = acc;
    }
    return returns;
}

// Accumulates d/d(theta) of one instance's segment objective
//   sum_j log pi(a_j|s_j) * R_j + EC * mean_j H(pi(.|s_j))
// into the parameter store the traces are bound to, scaled by `scale`.
// Consumes the traces.
inline void accumulate_segment(Segment& segment, double entropy_coef, double gamma, double scale) {
    if (segment.empty()) return;
    std::vector<Time> rewards;
    rewards.reserve(segment.size());
    for (const auto& s : segment) {
        if (!s.trace) throw TrainError(TrainError::Kind::MissingTrace, "segment step has no policy trace");
        rewards.push_back(s.reward);
    }
    const std::vector<double> returns = segment_returns(rewards, gamma);
    const double entropy_weight = entropy_coef / static_cast<double>(segment.size());
    for (std::size_t j = 0; j < segment.size(); ++j) {
        auto& step = segment[j];
        engine::Tape& tape = step.trace->tape.tape();
        const auto chosen = tape.gather_rows(step.trace->scored.log_probs, {step.action});
        const auto objective = tape.add(tape.scale(chosen, returns[j]),
                                        tape.scale(step.trace->scored.entropy, entropy_weight));
        // Gradient ascent: feed the negated objective to the reverse pass.
        step.trace->tape.backward_accumulate(tape.neg(objective), scale);
        step.trace.reset();
    }
    segment.clear();
}

// One REINFORCE update over a batch of segments: the objective is averaged
// over instances and applied with a single adaptive-moment step. Buffers are
// cleared.
inline void reinforce_update(tbgat::PolicyParams& params, std::vector<Segment>& segments, double lr,
                             double entropy_coef, double gamma = 1.0) {
    bool any = false;
    for (const auto& s : segments) any = any || !s.empty();
    const double scale = 1.0 / static_cast<double>(segments.empty() ? 1 : segments.size());
    for (auto& s : segments) accumulate_segment(s, entropy_coef, gamma, scale);
    if (any) engine::optimizer_step(params.store, lr);
}

// ---------------------------------------------------------------------------
// Rollout machinery shared by train_loop.
// ---------------------------------------------------------------------------
namespace detail {

struct RolloutState {
    // Graphs reference the instance, so each rollout owns its copy at a
    // stable address.
    RolloutState(std::shared_ptr<const Instance> inst, search::SearchState s)
        : instance(std::move(inst)), state(std::move(s)) {}
    std::shared_ptr<const Instance> instance;
    search::SearchState state;
    Segment segment;
    Time total_reward = 0;
    double entropy_sum = 0.0;
    long entropy_count = 0;
};

// Like search::step but keeps the policy trace alive for the update.
inline bool traced_step(tbgat::PolicyParams& params, RolloutState& rs) {
    search::SearchState& st = rs.state;
    const CriticalPath cp = critical_path(st.graph, st.times, st.rng);
    const std::vector<Move> moves = generate_moves(st.graph, cp);
    if (moves.empty()) {
        st.terminal = true;
        return false;
    }
    tbgat::PolicyInput input;
    input.append(st.graph, st.times, st.ranks, moves);
    auto trace = tbgat::run_policy(params, input);
    const int action = st.rng.sample_categorical(trace->dist.probs);

    const Time incumbent_before = st.incumbent_makespan;
    st.graph = apply_move(st.graph, moves[static_cast<std::size_t>(action)]);
    st.times = compute_times(st.graph);
    st.ranks = toposort::ranks_for_graph(st.graph);
    st.step_count += 1;
    const Time reward = std::max<Time>(incumbent_before - st.times.makespan, 0);
    if (st.times.makespan < st.incumbent_makespan) {
        st.incumbent_makespan = st.times.makespan;
        st.incumbent_graph = st.graph;
    }

    rs.total_reward += reward;
    rs.entropy_sum += trace->dist.entropy;
    rs.entropy_count += 1;
    rs.segment.push_back(SegmentStep{std::move(trace), action, reward});
    return true;
}

}  // namespace detail

struct CurvePoint {
    int batch = 0;
    double mean_reward = 0.0;
    double mean_entropy = 0.0;
    std::optional<double> validation_gap;
};

struct TrainResult {
    tbgat::PolicyParams params;       // final parameters
    tbgat::PolicyParams best_params;  // best validation gap seen
    std::vector<CurvePoint> curve;
    long long updates = 0;
    long long steps_collected = 0;
};

inline std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream out;
    out << "batch,mean_reward,mean_entropy,validation_gap\n";
    out.precision(17);
    for (const auto& p : curve) {
        out << p.batch << "," << p.mean_reward << "," << p.mean_entropy << ",";
        if (p.validation_gap) out << *p.validation_gap;
        out << "\n";
    }
    return out.str();
}

namespace detail {

struct ValidationSet {
    std::vector<Instance> instances;
    std::vector<Time> references;
};

// Held-out instances with fixed references: the exact optimum at sizes up to
// 3x3, otherwise the best of the dispatch solution and a 200-step random
// search.
inline ValidationSet make_validation_set(const TrainConfig& cfg) {
    ValidationSet vs;
    for (int i = 0; i < cfg.validation_instances; ++i) {
        Instance inst = generate_random(cfg.jobs, cfg.machines, mix_seed(cfg.seed, 0xa110ULL + static_cast<std::uint64_t>(i)));
        Time ref;
        if (cfg.jobs <= 3 && cfg.machines <= 3) {
            ref = exact::exhaustive_optimum(inst);
        } else {
            const Time dispatch_mk = compute_times(fdd_mwkr_init(inst)).makespan;
            const search::SearchResult rnd =
                search::run_search(inst, search::uniform_policy(), 200,
                                   mix_seed(cfg.seed, 0x0ef0ULL + static_cast<std::uint64_t>(i)),
                                   search::Mode::Sample, cfg.init_rule);
            ref = std::min(dispatch_mk, rnd.best_makespan);
        }
        vs.references.push_back(ref);
        vs.instances.push_back(std::move(inst));
    }
    return vs;
}

inline double validation_gap(const TrainConfig& cfg, tbgat::PolicyParams& params, const ValidationSet& vs) {
    double gap_sum = 0.0;
    const search::PolicyFn policy = search::tbgat_policy(params);
    for (std::size_t i = 0; i < vs.instances.size(); ++i) {
        const search::SearchResult res =
            search::run_search(vs.instances[i], policy, cfg.validation_steps,
                               mix_seed(cfg.seed, 0x9a11dULL + i), search::Mode::Greedy, cfg.init_rule);
        gap_sum += static_cast<double>(res.best_makespan - vs.references[i]) /
                   static_cast<double>(vs.references[i]) * 100.0;
    }
    return gap_sum / static_cast<double>(vs.instances.size());
}

}  // namespace detail

// Entropy-regularized REINFORCE over batches of freshly generated instances.
// Every instance runs the local-search MDP for `horizon` steps (terminal
// states freeze early); parameters update every `update_period` steps with
// segment-local returns. Single-threaded runs are bit-reproducible; workers
// only parallelize rollouts, so results match the single-threaded ones.
inline TrainResult train_loop(const TrainConfig& cfg,
                              const std::function<void(const CurvePoint&)>& on_batch = nullptr) {
    cfg.check();
    TrainResult result;
    result.params = tbgat::PolicyParams::init(cfg.arch, cfg.seed);
    result.best_params = result.params;
    const detail::ValidationSet vs = cfg.validate_every > 0 ? detail::make_validation_set(cfg) : detail::ValidationSet{};
    double best_gap = std::numeric_limits<double>::infinity();

    const long long num_batches = (cfg.total_instances + cfg.batch - 1) / cfg.batch;
    long long instance_counter = 0;
    for (long long batch_idx = 0; batch_idx < num_batches; ++batch_idx) {
        std::vector<detail::RolloutState> rollouts;
        rollouts.reserve(static_cast<std::size_t>(cfg.batch));
        for (int b = 0; b < cfg.batch; ++b) {
            auto inst = std::make_shared<const Instance>(generate_random(
                cfg.jobs, cfg.machines, mix_seed(cfg.seed, 0x1257ULL + static_cast<std::uint64_t>(instance_counter))));
            search::SearchState st = search::init_state(
                *inst, cfg.init_rule, mix_seed(cfg.seed, 0x5717ULL + static_cast<std::uint64_t>(instance_counter)));
            rollouts.emplace_back(std::move(inst), std::move(st));
            ++instance_counter;
        }

        for (int seg_start = 0; seg_start < cfg.horizon; seg_start += cfg.update_period) {
            const int seg_len = std::min(cfg.update_period, cfg.horizon - seg_start);
            bool any = false;

            auto roll_one = [&](detail::RolloutState& rs) {
                for (int t = 0; t < seg_len && !rs.state.terminal; ++t) {
                    if (!detail::traced_step(result.params, rs)) break;
                }
            };
            if (cfg.workers <= 1) {
                // Stream: roll one instance's segment, fold its gradient in,
                // free the traces before touching the next instance.
                for (auto& rs : rollouts) {
                    roll_one(rs);
                    any = any || !rs.segment.empty();
                    result.steps_collected += static_cast<long long>(rs.segment.size());
                    accumulate_segment(rs.segment, cfg.entropy_coef, cfg.gamma,
                                       1.0 / static_cast<double>(cfg.batch));
                }
            } else {
                for (std::size_t chunk = 0; chunk < rollouts.size(); chunk += static_cast<std::size_t>(cfg.workers)) {
                    const std::size_t end = std::min(rollouts.size(), chunk + static_cast<std::size_t>(cfg.workers));
                    std::vector<std::thread> pool;
                    for (std::size_t i = chunk; i < end; ++i) pool.emplace_back(roll_one, std::ref(rollouts[i]));
                    for (auto& th : pool) th.join();
                    for (std::size_t i = chunk; i < end; ++i) {
                        any = any || !rollouts[i].segment.empty();
                        result.steps_collected += static_cast<long long>(rollouts[i].segment.size());
                        accumulate_segment(rollouts[i].segment, cfg.entropy_coef, cfg.gamma,
                                           1.0 / static_cast<double>(cfg.batch));
                    }
                }
            }
            if (any) {
                engine::optimizer_step(result.params.store, cfg.lr);
                result.updates += 1;
            }
        }

        CurvePoint point;
        point.batch = static_cast<int>(batch_idx);
        Time reward_sum = 0;
        double entropy_sum = 0.0;
        long entropy_count = 0;
        for (const auto& rs : rollouts) {
            reward_sum += rs.total_reward;
            entropy_sum += rs.entropy_sum;
            entropy_count += rs.entropy_count;
        }
        point.mean_reward = static_cast<double>(reward_sum) / static_cast<double>(cfg.batch);
        point.mean_entropy = entropy_count > 0 ? entropy_sum / static_cast<double>(entropy_count) : 0.0;
        if (cfg.validate_every > 0 &&
            (batch_idx % cfg.validate_every == cfg.validate_every - 1 || batch_idx == num_batches - 1)) {
            point.validation_gap = detail::validation_gap(cfg, result.params, vs);
            if (*point.validation_gap < best_gap) {
                best_gap = *point.validation_gap;
                result.best_params.store = result.params.store;
            }
        }
        result.curve.push_back(point);
        if (on_batch) on_batch(result.curve.back());
    }
    if (!std::isfinite(best_gap)) result.best_params.store = result.params.store;
    return result;
}

}  // namespace train
}  // namespace jsls
