#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

#include "jsls/engine.hpp"
#include "jsls/moves.hpp"
#include "jsls/toposort.hpp"

namespace jsls {
namespace tbgat {

class PolicyError : public Error {
public:
    enum class Kind { EmptyActionSet };
    PolicyError(Kind kind, const std::string& msg) : Error(msg), kind(kind) {}
    Kind kind;
};

struct Config {
    int layers = 3;
    int heads = 4;
    int hidden = 128;               // total width; heads get hidden/heads each
    int action_hidden_layers = 4;   // action net depth; widths halve per layer
    double leaky_slope = 0.2;

    static constexpr int feature_dim = 3;

    int head_dim() const { return hidden / heads; }
    int merged_dim() const { return 2 * hidden; }
    int final_dim() const { return 2 * merged_dim(); }
    int action_input_dim() const { return 2 * final_dim(); }

    void check() const {
        if (layers < 1 || heads < 1 || hidden < 1 || action_hidden_layers < 1) {
            throw Error("tbgat config: all sizes must be >= 1");
        }
        if (hidden % heads != 0) throw Error("tbgat config: hidden must be divisible by heads");
    }

    nlohmann::json to_json() const {
        return {{"layers", layers},
                {"heads", heads},
                {"hidden", hidden},
                {"action_hidden_layers", action_hidden_layers},
                {"leaky_slope", leaky_slope}};
    }
    static Config from_json(const nlohmann::json& j) {
        Config c;
        c.layers = j.at("layers").get<int>();
        c.heads = j.at("heads").get<int>();
        c.hidden = j.at("hidden").get<int>();
        c.action_hidden_layers = j.at("action_hidden_layers").get<int>();
        c.leaky_slope = j.at("leaky_slope").get<double>();
        c.check();
        return c;
    }

    bool operator==(const Config&) const = default;
};

namespace detail {

// Tensor names and shapes in checkpoint order, derived from the config.
inline std::vector<std::pair<std::string, std::pair<int, int>>> tensor_layout(const Config& cfg) {
    std::vector<std::pair<std::string, std::pair<int, int>>> layout;
    for (const std::string module : {"fem", "bem"}) {
        for (int l = 0; l < cfg.layers; ++l) {
            const int in_dim = l == 0 ? Config::feature_dim : cfg.hidden;
            for (int h = 0; h < cfg.heads; ++h) {
                const std::string base = module + ".l" + std::to_string(l) + ".h" + std::to_string(h) + ".";
                layout.push_back({base + "w_ag", {in_dim, cfg.head_dim()}});
                layout.push_back({base + "w_at", {in_dim, cfg.head_dim()}});
                layout.push_back({base + "a", {2 * cfg.head_dim(), 1}});
            }
        }
    }
    int in_dim = cfg.action_input_dim();
    for (int l = 0; l <= cfg.action_hidden_layers; ++l) {
        const int out_dim = l == cfg.action_hidden_layers ? 1 : in_dim / 2;
        const std::string base = "net_a.l" + std::to_string(l) + ".";
        layout.push_back({base + "w", {in_dim, out_dim}});
        layout.push_back({base + "b", {1, out_dim}});
        in_dim = out_dim;
    }
    return layout;
}

}  // namespace detail

// All learnable tensors of the policy plus its architecture config.
struct PolicyParams {
    Config config;
    engine::ParamStore store;

    // Uniform init in +-(fan_in)^{-1/2}, fan_in being each tensor's input width.
    static PolicyParams init(const Config& cfg, std::uint64_t seed) {
        cfg.check();
        PolicyParams p;
        p.config = cfg;
        Rng rng(mix_seed(seed, 0x7b6a));
        for (const auto& [name, shape] : detail::tensor_layout(cfg)) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(shape.first));
            p.store.add(name, engine::Matrix::uniform(shape.first, shape.second, bound, rng));
        }
        return p;
    }
};

inline void save_policy(const PolicyParams& params, const std::string& path) {
    engine::save_checkpoint(params.store, params.config.to_json(), path);
}

inline PolicyParams load_policy(const std::string& path) {
    engine::Checkpoint ckpt = engine::load_checkpoint(path);
    PolicyParams p;
    try {
        p.config = Config::from_json(ckpt.config);
    } catch (const nlohmann::json::exception&) {
        throw engine::CheckpointError(engine::CheckpointError::Kind::CorruptFile, "missing architecture config");
    }
    const auto layout = detail::tensor_layout(p.config);
    if (layout.size() != ckpt.store.order.size()) {
        throw engine::CheckpointError(engine::CheckpointError::Kind::ShapeMismatch,
                                      "checkpoint tensor count does not match architecture config");
    }
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto& [name, shape] = layout[i];
        if (ckpt.store.order[i] != name) {
            throw engine::CheckpointError(engine::CheckpointError::Kind::ShapeMismatch,
                                          "unexpected tensor " + ckpt.store.order[i] + ", wanted " + name);
        }
        const auto& v = ckpt.store.at(name).value;
        if (v.rows != shape.first || v.cols != shape.second) {
            throw engine::CheckpointError(engine::CheckpointError::Kind::ShapeMismatch,
                                          "tensor " + name + " has shape inconsistent with architecture config");
        }
    }
    p.store = std::move(ckpt.store);
    return p;
}

// Normalized raw features per node: (p/99, est/1000, fwd rank scaled) for the
// forward view and (p/99, lst/1000, bwd rank scaled) for the backward view.
// Ranks are divided by the largest rank of their graph; est/lst keep the fixed
// divisor even when makespans exceed it.
struct NodeFeatures {
    engine::Matrix fwd;
    engine::Matrix bwd;
};

inline NodeFeatures build_features(const OrientedGraph& g, const ScheduleTimes& t, const toposort::TopoRanks& ranks) {
    const int n = g.num_nodes();
    NodeFeatures f{engine::Matrix(n, Config::feature_dim), engine::Matrix(n, Config::feature_dim)};
    const double max_fwd = static_cast<double>(std::max<std::int64_t>(
        1, *std::max_element(ranks.fwd.begin(), ranks.fwd.end())));
    const double max_bwd = static_cast<double>(std::max<std::int64_t>(
        1, *std::max_element(ranks.bwd.begin(), ranks.bwd.end())));
    for (int v = 0; v < n; ++v) {
        const double p = static_cast<double>(g.processing(v)) / 99.0;
        f.fwd.at(v, 0) = p;
        f.fwd.at(v, 1) = static_cast<double>(t.est[static_cast<std::size_t>(v)]) / 1000.0;
        f.fwd.at(v, 2) = static_cast<double>(ranks.fwd[static_cast<std::size_t>(v)]) / max_fwd;
        f.bwd.at(v, 0) = p;
        f.bwd.at(v, 1) = static_cast<double>(t.lst[static_cast<std::size_t>(v)]) / 1000.0;
        f.bwd.at(v, 2) = static_cast<double>(ranks.bwd[static_cast<std::size_t>(v)]) / max_bwd;
    }
    return f;
}

// Flattened input for the network: one or more solution graphs with their
// per-view attention neighborhoods and candidate move pairs.
struct PolicyInput {
    int num_nodes = 0;
    int num_graphs = 0;
    std::vector<int> graph_of;

    engine::Matrix feat_fwd{0, Config::feature_dim};
    engine::Matrix feat_bwd{0, Config::feature_dim};

    // Attention entries sorted by center node; self entries included.
    struct View {
        std::vector<int> center;
        std::vector<int> neighbor;
    };
    View fwd;
    View bwd;

    std::vector<std::pair<int, int>> move_pairs;

    void append(const OrientedGraph& g, const ScheduleTimes& t, const toposort::TopoRanks& ranks,
                const std::vector<Move>& moves) {
        const int offset = num_nodes;
        const int n = g.num_nodes();
        NodeFeatures f = build_features(g, t, ranks);
        feat_fwd.a.insert(feat_fwd.a.end(), f.fwd.a.begin(), f.fwd.a.end());
        feat_bwd.a.insert(feat_bwd.a.end(), f.bwd.a.begin(), f.bwd.a.end());
        feat_fwd.rows += n;
        feat_bwd.rows += n;
        std::vector<int> nbr;
        for (int v = 0; v < n; ++v) {
            fwd.center.push_back(offset + v);
            fwd.neighbor.push_back(offset + v);
            g.predecessors(v, nbr);
            for (int p : nbr) {
                fwd.center.push_back(offset + v);
                fwd.neighbor.push_back(offset + p);
            }
            bwd.center.push_back(offset + v);
            bwd.neighbor.push_back(offset + v);
            g.successors(v, nbr);
            for (int s : nbr) {
                bwd.center.push_back(offset + v);
                bwd.neighbor.push_back(offset + s);
            }
        }
        for (const Move& m : moves) {
            move_pairs.emplace_back(offset + g.node_of(m.first), offset + g.node_of(m.second));
        }
        graph_of.resize(static_cast<std::size_t>(offset + n), num_graphs);
        num_nodes += n;
        ++num_graphs;
    }
};

// Per-move probabilities of the policy, with log-probabilities and entropy.
struct ActionDistribution {
    std::vector<double> probs;
    std::vector<double> log_probs;
    double entropy = 0.0;
};

namespace detail {

using engine::Tape;

inline Tape::NodeId embedding_module(engine::BoundTape& bt, const Config& cfg, const std::string& module,
                                     Tape::NodeId features, const PolicyInput::View& view, int num_nodes) {
    Tape& tape = bt.tape();
    Tape::NodeId h = features;
    for (int l = 0; l < cfg.layers; ++l) {
        std::vector<Tape::NodeId> head_out;
        for (int hd = 0; hd < cfg.heads; ++hd) {
            const std::string base = module + ".l" + std::to_string(l) + ".h" + std::to_string(hd) + ".";
            const Tape::NodeId z_at = tape.matmul(h, bt.param(base + "w_at"));
            const Tape::NodeId z_ag = tape.matmul(h, bt.param(base + "w_ag"));
            const Tape::NodeId center = tape.gather_rows(z_at, view.center);
            const Tape::NodeId neighbor = tape.gather_rows(z_at, view.neighbor);
            const Tape::NodeId pair = tape.concat_cols({center, neighbor});
            const Tape::NodeId e = tape.leaky_relu(tape.matmul(pair, bt.param(base + "a")), cfg.leaky_slope);
            const Tape::NodeId alpha = tape.segment_softmax(e, view.center);
            const Tape::NodeId msg = tape.gather_rows(z_ag, view.neighbor);
            head_out.push_back(tape.segment_weighted_sum(alpha, msg, view.center, num_nodes));
        }
        h = cfg.heads == 1 ? head_out[0] : tape.concat_cols(head_out);
    }
    return h;
}

}  // namespace detail

// Node embeddings: forward and backward modules run over their views, last
// layers concatenated, then the per-graph mean pooled embedding appended.
struct Embeddings {
    engine::Tape::NodeId merged;     // num_nodes x merged_dim
    engine::Tape::NodeId graph;      // num_graphs x merged_dim
    engine::Tape::NodeId per_node;   // num_nodes x final_dim
};

inline Embeddings embed(engine::BoundTape& bt, const Config& cfg, const PolicyInput& in) {
    engine::Tape& tape = bt.tape();
    const engine::Tape::NodeId feat_fwd = tape.input(in.feat_fwd);
    const engine::Tape::NodeId feat_bwd = tape.input(in.feat_bwd);
    const engine::Tape::NodeId fem = detail::embedding_module(bt, cfg, "fem", feat_fwd, in.fwd, in.num_nodes);
    const engine::Tape::NodeId bem = detail::embedding_module(bt, cfg, "bem", feat_bwd, in.bwd, in.num_nodes);
    Embeddings e;
    e.merged = tape.concat_cols({fem, bem});
    e.graph = tape.segment_mean(e.merged, in.graph_of, in.num_graphs);
    e.per_node = tape.concat_cols({e.merged, tape.gather_rows(e.graph, in.graph_of)});
    return e;
}

// Move scores through the action net, normalized into a distribution.
struct ScoredMoves {
    engine::Tape::NodeId scores;     // k x 1
    engine::Tape::NodeId probs;      // k x 1
    engine::Tape::NodeId log_probs;  // k x 1
    engine::Tape::NodeId entropy;    // 1 x 1
};

inline ScoredMoves score_moves(engine::BoundTape& bt, const Config& cfg, const Embeddings& emb,
                               const std::vector<std::pair<int, int>>& move_pairs) {
    if (move_pairs.empty()) {
        throw PolicyError(PolicyError::Kind::EmptyActionSet, "score_moves: no candidate moves");
    }
    engine::Tape& tape = bt.tape();
    std::vector<int> first, second;
    first.reserve(move_pairs.size());
    second.reserve(move_pairs.size());
    for (const auto& [x, z] : move_pairs) {
        first.push_back(x);
        second.push_back(z);
    }
    engine::Tape::NodeId x = tape.concat_cols({tape.gather_rows(emb.per_node, first),
                                               tape.gather_rows(emb.per_node, second)});
    for (int l = 0; l <= cfg.action_hidden_layers; ++l) {
        const std::string base = "net_a.l" + std::to_string(l) + ".";
        x = tape.add(tape.matmul(x, bt.param(base + "w")), bt.param(base + "b"));
        if (l < cfg.action_hidden_layers) x = tape.leaky_relu(x, cfg.leaky_slope);
    }
    ScoredMoves out;
    out.scores = x;
    out.probs = tape.segment_softmax(out.scores, std::vector<int>(move_pairs.size(), 0));
    out.log_probs = tape.log_(out.probs);
    out.entropy = tape.neg(tape.sum_all(tape.mul(out.probs, out.log_probs)));
    return out;
}

inline ActionDistribution extract_distribution(const engine::Tape& tape, const ScoredMoves& sm) {
    ActionDistribution d;
    d.probs = tape.value(sm.probs).a;
    d.log_probs = tape.value(sm.log_probs).a;
    d.entropy = tape.value(sm.entropy).a[0];
    return d;
}

// A full scored forward pass with its trace kept alive, for training.
struct PolicyTrace {
    explicit PolicyTrace(engine::ParamStore& store) : tape(store) {}
    engine::BoundTape tape;
    ScoredMoves scored;
    ActionDistribution dist;
};

inline std::unique_ptr<PolicyTrace> run_policy(PolicyParams& params, const PolicyInput& input) {
    auto trace = std::make_unique<PolicyTrace>(params.store);
    const Embeddings emb = embed(trace->tape, params.config, input);
    trace->scored = score_moves(trace->tape, params.config, emb, input.move_pairs);
    trace->dist = extract_distribution(trace->tape.tape(), trace->scored);
    return trace;
}

// Value-only evaluation for a single graph (no gradients harvested).
inline ActionDistribution evaluate_policy(const PolicyParams& params, const OrientedGraph& g,
                                          const ScheduleTimes& t, const toposort::TopoRanks& ranks,
                                          const std::vector<Move>& moves) {
    PolicyInput input;
    input.append(g, t, ranks, moves);
    // The tape is discarded right after the forward pass; gradients are never
    // requested, so binding to a const store is safe.
    auto& store = const_cast<engine::ParamStore&>(params.store);
    engine::BoundTape bt(store);
    const Embeddings emb = embed(bt, params.config, input);
    const ScoredMoves sm = score_moves(bt, params.config, emb, input.move_pairs);
    return extract_distribution(bt.tape(), sm);
}

}  // namespace tbgat
}  // namespace jsls
