#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "jsls/bench.hpp"
#include "jsls/exact.hpp"
#include "jsls/search.hpp"
#include "jsls/train.hpp"

namespace jsls {
namespace cli {

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << content;
}

inline Instance load_instance(const std::string& path, const std::string& format) {
    const std::string text = read_file(path);
    return format == "taillard" ? parse_taillard(text) : parse_orlib(text);
}

inline search::PolicyFn make_policy(const std::optional<tbgat::PolicyParams>& params) {
    if (params) return search::tbgat_policy(*params);
    return search::uniform_policy();
}

}  // namespace detail

struct CommonFlags {
    std::string format = "orlib";
    std::uint64_t seed = 0;
};

inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"jsls: local-search job shop scheduling with a graph attention policy"};
    app.require_subcommand(1);

    // --- gen -----------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "Generate random instances");
    int gen_jobs = 10, gen_machines = 10, gen_count = 1;
    std::uint64_t gen_seed = 0;
    std::string gen_out = ".";
    std::string gen_format = "orlib";
    gen->add_option("--jobs", gen_jobs, "Number of jobs")->default_val(10);
    gen->add_option("--machines", gen_machines, "Number of machines")->default_val(10);
    gen->add_option("--count", gen_count, "Number of instances")->default_val(1);
    gen->add_option("--seed", gen_seed, "Random seed")->default_val(0);
    gen->add_option("--out", gen_out, "Output directory")->default_val(".");
    gen->add_option("--format", gen_format, "Output format: orlib|taillard")
        ->check(CLI::IsMember({"orlib", "taillard"}))
        ->default_val("orlib");

    // --- solve ---------------------------------------------------------------
    auto* solve = app.add_subcommand("solve", "Solve one instance by local search");
    std::string solve_instance, solve_format = "orlib", solve_init = "fdd-mwkr", solve_mode = "sample";
    std::string solve_policy, solve_out, solve_schedule, solve_trace, solve_gantt;
    int solve_steps = 500;
    std::uint64_t solve_seed = 0;
    solve->add_option("--instance", solve_instance, "Instance file")->required();
    solve->add_option("--format", solve_format, "Instance format: orlib|taillard")
        ->check(CLI::IsMember({"orlib", "taillard"}))
        ->default_val("orlib");
    solve->add_option("--init", solve_init, "Initial solution rule: fdd-mwkr|random")
        ->check(CLI::IsMember({"fdd-mwkr", "random"}))
        ->default_val("fdd-mwkr");
    solve->add_option("--steps", solve_steps, "Improvement step budget")->default_val(500);
    solve->add_option("--policy", solve_policy, "Policy checkpoint (omit for uniform-random moves)");
    solve->add_option("--mode", solve_mode, "Move selection: sample|greedy")
        ->check(CLI::IsMember({"sample", "greedy"}))
        ->default_val("sample");
    solve->add_option("--seed", solve_seed, "Random seed")->default_val(0);
    solve->add_option("--out", solve_out, "Write solve report JSON here");
    solve->add_option("--schedule", solve_schedule, "Write best schedule CSV here");
    solve->add_option("--trace", solve_trace, "Write step trace JSONL here");
    solve->add_option("--gantt", solve_gantt, "Write Gantt JSON here");

    // --- eval ----------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Evaluate a policy over a dataset directory");
    std::string eval_dir, eval_format = "orlib", eval_policy, eval_out, eval_csv, eval_mode = "greedy";
    std::string eval_init = "fdd-mwkr";
    int eval_steps = 500, eval_workers = 1;
    std::uint64_t eval_seed = 0;
    eval->add_option("--dir", eval_dir, "Dataset directory (instances + optional references.csv)")->required();
    eval->add_option("--format", eval_format, "Instance format: orlib|taillard")
        ->check(CLI::IsMember({"orlib", "taillard"}))
        ->default_val("orlib");
    eval->add_option("--steps", eval_steps, "Improvement step budget")->default_val(500);
    eval->add_option("--policy", eval_policy, "Policy checkpoint (omit for uniform-random moves)");
    eval->add_option("--mode", eval_mode, "Move selection: sample|greedy")
        ->check(CLI::IsMember({"sample", "greedy"}))
        ->default_val("greedy");
    eval->add_option("--init", eval_init, "Initial solution rule: fdd-mwkr|random")
        ->check(CLI::IsMember({"fdd-mwkr", "random"}))
        ->default_val("fdd-mwkr");
    eval->add_option("--seed", eval_seed, "Random seed")->default_val(0);
    eval->add_option("--workers", eval_workers, "Parallel workers")->default_val(1);
    eval->add_option("--out", eval_out, "Write report JSON here");
    eval->add_option("--csv", eval_csv, "Write report CSV here");

    // --- train ---------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "Train the policy with entropy-regularized REINFORCE");
    train::TrainConfig tcfg;
    std::string train_out = "model.ckpt", train_curve, train_best_out;
    tr->add_option("--jobs", tcfg.jobs, "Training instance jobs")->default_val(10);
    tr->add_option("--machines", tcfg.machines, "Training instance machines")->default_val(10);
    tr->add_option("--batch", tcfg.batch, "Instances per batch")->default_val(64);
    tr->add_option("--horizon", tcfg.horizon, "Steps per instance (T)")->default_val(500);
    tr->add_option("--update-period", tcfg.update_period, "Steps between updates (n)")->default_val(10);
    tr->add_option("--lr", tcfg.lr, "Learning rate")->default_val(1e-5);
    tr->add_option("--ec", tcfg.entropy_coef, "Entropy coefficient")->default_val(1e-5);
    tr->add_option("--gamma", tcfg.gamma, "Return discount")->default_val(1.0);
    tr->add_option("--instances", tcfg.total_instances, "Total training instances (I)")->default_val(128000);
    tr->add_option("--seed", tcfg.seed, "Random seed")->default_val(0);
    tr->add_option("--init", tcfg.init_rule, "Initial solution rule: fdd-mwkr|random")
        ->check(CLI::IsMember({"fdd-mwkr", "random"}))
        ->default_val("fdd-mwkr");
    tr->add_option("--validate-every", tcfg.validate_every, "Batches between validation passes (0 = off)")
        ->default_val(10);
    tr->add_option("--validation-steps", tcfg.validation_steps, "Greedy steps per validation instance")
        ->default_val(100);
    tr->add_option("--workers", tcfg.workers, "Parallel rollout workers")->default_val(1);
    tr->add_option("--layers", tcfg.arch.layers, "Attention layers per module")->default_val(3);
    tr->add_option("--heads", tcfg.arch.heads, "Attention heads per layer")->default_val(4);
    tr->add_option("--hidden", tcfg.arch.hidden, "Hidden width (total across heads)")->default_val(128);
    tr->add_option("--out", train_out, "Write final checkpoint here")->default_val("model.ckpt");
    tr->add_option("--best-out", train_best_out, "Write best-validation checkpoint here");
    tr->add_option("--curve", train_curve, "Write learning curve CSV here");

    // --- toposort --------------------------------------------------------------
    auto* topo = app.add_subcommand("toposort", "Print forward/backward topological ranks of a solution");
    std::string topo_instance, topo_orders, topo_format = "orlib";
    topo->add_option("--instance", topo_instance, "Instance file")->required();
    topo->add_option("--orders", topo_orders, "Machine orders file (job ids, one line per machine)")->required();
    topo->add_option("--format", topo_format, "Instance format: orlib|taillard")
        ->check(CLI::IsMember({"orlib", "taillard"}))
        ->default_val("orlib");

    // --- validate --------------------------------------------------------------
    auto* val = app.add_subcommand("validate", "Validate an instance file");
    std::string val_instance, val_format = "orlib";
    val->add_option("--instance", val_instance, "Instance file")->required();
    val->add_option("--format", val_format, "Instance format: orlib|taillard")
        ->check(CLI::IsMember({"orlib", "taillard"}))
        ->default_val("orlib");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (gen->parsed()) {
            std::filesystem::create_directories(gen_out);
            for (int i = 0; i < gen_count; ++i) {
                const Instance inst = generate_random(gen_jobs, gen_machines, mix_seed(gen_seed, static_cast<std::uint64_t>(i)));
                std::ostringstream name;
                name << "rand_" << gen_jobs << "x" << gen_machines << "_" << gen_seed << "_" << i << ".txt";
                const std::string body = gen_format == "taillard" ? serialize_taillard(inst) : serialize_orlib(inst);
                detail::write_file((std::filesystem::path(gen_out) / name.str()).string(), body);
            }
            std::cout << "wrote " << gen_count << " instance(s) to " << gen_out << "\n";
            return 0;
        }

        if (solve->parsed()) {
            const Instance inst = detail::load_instance(solve_instance, solve_format);
            std::optional<tbgat::PolicyParams> params;
            if (!solve_policy.empty()) params = tbgat::load_policy(solve_policy);
            const search::PolicyFn policy = detail::make_policy(params);
            const search::Mode mode = search::mode_from_string(solve_mode);
            search::SearchResult res = search::run_search(inst, policy, solve_steps, solve_seed, mode, solve_init);

            nlohmann::json report = {{"format_version", 1},
                                     {"instance", std::filesystem::path(solve_instance).stem().string()},
                                     {"jobs", inst.num_jobs},
                                     {"machines", inst.num_machines},
                                     {"seed", solve_seed},
                                     {"mode", solve_mode},
                                     {"init", solve_init},
                                     {"policy", solve_policy.empty() ? "uniform-random" : solve_policy},
                                     {"steps_budget", solve_steps},
                                     {"steps_executed", res.trace.size()},
                                     {"initial_makespan", res.initial_makespan},
                                     {"best_makespan", res.best_makespan},
                                     {"terminal", res.terminal}};
            const std::string out_text = report.dump(2) + "\n";
            if (solve_out.empty()) {
                std::cout << out_text;
            } else {
                detail::write_file(solve_out, out_text);
            }
            if (!solve_schedule.empty() || !solve_gantt.empty()) {
                const ScheduleTimes times = compute_times(res.best_graph);
                if (!solve_schedule.empty()) detail::write_file(solve_schedule, schedule_csv(res.best_graph, times));
                if (!solve_gantt.empty()) {
                    detail::write_file(solve_gantt, gantt_json(res.best_graph, times).dump(2) + "\n");
                }
            }
            if (!solve_trace.empty()) detail::write_file(solve_trace, search::trace_jsonl(res));
            std::cerr << "solved in " << res.wall_seconds << "s\n";
            return 0;
        }

        if (eval->parsed()) {
            const bench::Dataset ds = bench::load_dataset(eval_dir, eval_format);
            for (const auto& err : ds.errors) std::cerr << "skipping " << err << "\n";
            std::optional<tbgat::PolicyParams> params;
            if (!eval_policy.empty()) params = tbgat::load_policy(eval_policy);
            const search::PolicyFn policy = detail::make_policy(params);
            const bench::GapReport report =
                bench::run_eval(ds, policy, eval_steps, eval_seed, search::mode_from_string(eval_mode),
                                eval_init, eval_workers);
            const nlohmann::json j = bench::report_json(report);
            if (eval_out.empty()) {
                std::cout << j.dump(2) << "\n";
            } else {
                detail::write_file(eval_out, j.dump(2) + "\n");
            }
            if (!eval_csv.empty()) detail::write_file(eval_csv, bench::report_csv(report));
            return 0;
        }

        if (tr->parsed()) {
            const train::TrainResult result = train::train_loop(tcfg, [](const train::CurvePoint& p) {
                std::cerr << "batch " << p.batch << " mean_reward " << p.mean_reward << " mean_entropy "
                          << p.mean_entropy;
                if (p.validation_gap) std::cerr << " validation_gap " << *p.validation_gap;
                std::cerr << "\n";
            });
            tbgat::save_policy(result.params, train_out);
            detail::write_file(train_out + ".config.json", result.params.config.to_json().dump(2) + "\n");
            if (!train_best_out.empty()) tbgat::save_policy(result.best_params, train_best_out);
            if (!train_curve.empty()) detail::write_file(train_curve, train::curve_csv(result.curve));
            return 0;
        }

        if (topo->parsed()) {
            const Instance inst = detail::load_instance(topo_instance, topo_format);
            const OrientedGraph g = parse_orders(inst, detail::read_file(topo_orders));
            const toposort::TopoRanks ranks = toposort::ranks_for_graph(g);
            nlohmann::json ops_fwd = nlohmann::json::array(), ops_bwd = nlohmann::json::array();
            for (int j = 0; j < inst.num_jobs; ++j) {
                nlohmann::json row_fwd = nlohmann::json::array(), row_bwd = nlohmann::json::array();
                for (int s = 0; s < inst.num_machines; ++s) {
                    row_fwd.push_back(ranks.fwd[static_cast<std::size_t>(j * inst.num_machines + s)]);
                    row_bwd.push_back(ranks.bwd[static_cast<std::size_t>(j * inst.num_machines + s)]);
                }
                ops_fwd.push_back(row_fwd);
                ops_bwd.push_back(row_bwd);
            }
            const nlohmann::json out = {
                {"fwd",
                 {{"source", ranks.fwd[static_cast<std::size_t>(g.source())]},
                  {"sink", ranks.fwd[static_cast<std::size_t>(g.sink())]},
                  {"ops", ops_fwd}}},
                {"bwd",
                 {{"source", ranks.bwd[static_cast<std::size_t>(g.source())]},
                  {"sink", ranks.bwd[static_cast<std::size_t>(g.sink())]},
                  {"ops", ops_bwd}}}};
            std::cout << out.dump(2) << "\n";
            return 0;
        }

        if (val->parsed()) {
            try {
                const Instance inst = detail::load_instance(val_instance, val_format);
                const auto issues = validate(inst);
                if (issues.empty()) {
                    std::cout << "ok: " << inst.num_jobs << " jobs x " << inst.num_machines << " machines\n";
                    return 0;
                }
                for (const auto& issue : issues) {
                    std::cout << "issue: job " << issue.job << " step " << issue.step << " kind "
                              << static_cast<int>(issue.kind) << "\n";
                }
                return 1;
            } catch (const ParseError& e) {
                std::cout << "parse error: " << e.what() << "\n";
                return 1;
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(std::move(args));
}

}  // namespace cli
}  // namespace jsls
