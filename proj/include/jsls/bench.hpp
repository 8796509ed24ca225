#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "jsls/search.hpp"

namespace jsls {
namespace bench {

inline constexpr int kReportVersion = 1;

class BenchError : public Error {
public:
    enum class Kind { NonPositiveReference, MissingReference };
    BenchError(Kind kind, const std::string& msg) : Error(msg), kind(kind) {}
    Kind kind;
};

// Relative gap in percent; negative when `achieved` beats the reference.
inline double compute_gap(Time achieved, Time reference) {
    if (reference <= 0) {
        throw BenchError(BenchError::Kind::NonPositiveReference,
                         "compute_gap: reference makespan must be positive");
    }
    return static_cast<double>(achieved - reference) / static_cast<double>(reference) * 100.0;
}

struct DatasetEntry {
    std::string name;
    Instance instance;
    std::optional<Time> reference;
};

struct Dataset {
    std::vector<DatasetEntry> entries;
    std::vector<std::string> errors;  // per-file parse failures, load continues
};

// Loads every instance file in a directory (skipping references.csv), pairing
// entries with best-known makespans from references.csv when present.
inline Dataset load_dataset(const std::string& dir, const std::string& format) {
    namespace fs = std::filesystem;
    Dataset ds;
    std::map<std::string, Time> refs;
    const fs::path refs_path = fs::path(dir) / "references.csv";
    if (fs::exists(refs_path)) {
        std::ifstream in(refs_path);
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            const std::string name = line.substr(0, comma);
            if (first && name == "name") {
                first = false;
                continue;
            }
            first = false;
            refs[name] = static_cast<Time>(std::stoll(line.substr(comma + 1)));
        }
    }

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().filename() == "references.csv") continue;
        files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path);
        std::stringstream buf;
        buf << in.rdbuf();
        DatasetEntry entry;
        entry.name = path.stem().string();
        try {
            entry.instance = format == "taillard" ? parse_taillard(buf.str()) : parse_orlib(buf.str());
        } catch (const Error& e) {
            ds.errors.push_back(path.filename().string() + ": " + e.what());
            continue;
        }
        const auto it = refs.find(entry.name);
        if (it != refs.end()) entry.reference = it->second;
        ds.entries.push_back(std::move(entry));
    }
    return ds;
}

struct GapRow {
    std::string name;
    int jobs = 0;
    int machines = 0;
    Time achieved = 0;
    std::optional<Time> reference;
    std::optional<double> gap_percent;
    double wall_seconds = 0.0;
    int steps_used = 0;
};

struct SizeAggregate {
    int jobs = 0;
    int machines = 0;
    int count = 0;
    std::optional<double> mean_gap;
    double mean_wall_seconds = 0.0;
};

struct GapReport {
    std::vector<GapRow> rows;
    std::vector<SizeAggregate> per_size;
    std::optional<double> mean_gap;  // exact mean of per-instance gaps
    double mean_wall_seconds = 0.0;
    int steps = 0;
    std::uint64_t seed = 0;
    std::string mode;
};

namespace detail {

inline void aggregate(GapReport& report) {
    std::map<std::pair<int, int>, SizeAggregate> by_size;
    double gap_sum = 0.0, wall_sum = 0.0;
    int gap_count = 0;
    for (const auto& row : report.rows) {
        auto& agg = by_size[{row.jobs, row.machines}];
        agg.jobs = row.jobs;
        agg.machines = row.machines;
        agg.count += 1;
        agg.mean_wall_seconds += row.wall_seconds;
        wall_sum += row.wall_seconds;
        if (row.gap_percent) {
            gap_sum += *row.gap_percent;
            gap_count += 1;
            agg.mean_gap = agg.mean_gap.value_or(0.0) + *row.gap_percent;
        }
    }
    for (auto& [size, agg] : by_size) {
        (void)size;
        agg.mean_wall_seconds /= agg.count;
        if (agg.mean_gap) *agg.mean_gap /= agg.count;
        report.per_size.push_back(agg);
    }
    if (gap_count > 0) report.mean_gap = gap_sum / gap_count;
    if (!report.rows.empty()) report.mean_wall_seconds = wall_sum / static_cast<double>(report.rows.size());
}

}  // namespace detail

// Runs the search on every dataset instance. Each achieved schedule is
// re-validated: the graph must be acyclic, its recomputed makespan must match
// the reported one, and the instance must pass validation.
inline GapReport run_eval(const Dataset& ds, const search::PolicyFn& policy, int steps, std::uint64_t seed,
                          search::Mode mode, const std::string& init_rule = "fdd-mwkr", int workers = 1) {
    GapReport report;
    report.steps = steps;
    report.seed = seed;
    report.mode = mode == search::Mode::Sample ? "sample" : "greedy";
    report.rows.resize(ds.entries.size());

    auto eval_one = [&](std::size_t i) {
        const DatasetEntry& entry = ds.entries[i];
        search::SearchResult res = search::run_search(entry.instance, policy, steps,
                                                      mix_seed(seed, i), mode, init_rule);
        if (!is_acyclic(res.best_graph)) throw Error("run_eval: best graph of " + entry.name + " is cyclic");
        if (compute_times(res.best_graph).makespan != res.best_makespan) {
            throw Error("run_eval: reported makespan of " + entry.name + " does not recompute");
        }
        if (!validate(entry.instance).empty()) throw Error("run_eval: instance " + entry.name + " is invalid");
        GapRow row;
        row.name = entry.name;
        row.jobs = entry.instance.num_jobs;
        row.machines = entry.instance.num_machines;
        row.achieved = res.best_makespan;
        row.reference = entry.reference;
        if (entry.reference) row.gap_percent = compute_gap(res.best_makespan, *entry.reference);
        row.wall_seconds = res.wall_seconds;
        row.steps_used = static_cast<int>(res.trace.size());
        report.rows[i] = std::move(row);
    };

    if (workers <= 1) {
        for (std::size_t i = 0; i < ds.entries.size(); ++i) eval_one(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> cursor{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (;;) {
                    const std::size_t i = cursor.fetch_add(1);
                    if (i >= ds.entries.size()) return;
                    try {
                        eval_one(i);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!first_error) first_error = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (first_error) std::rethrow_exception(first_error);
    }
    detail::aggregate(report);
    return report;
}

inline nlohmann::json report_json(const GapReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        nlohmann::json row = {{"name", r.name},       {"jobs", r.jobs},
                              {"machines", r.machines}, {"achieved", r.achieved},
                              {"wall_seconds", r.wall_seconds}, {"steps_used", r.steps_used}};
        row["reference"] = r.reference ? nlohmann::json(*r.reference) : nlohmann::json(nullptr);
        row["gap_percent"] = r.gap_percent ? nlohmann::json(*r.gap_percent) : nlohmann::json(nullptr);
        rows.push_back(row);
    }
    nlohmann::json per_size = nlohmann::json::array();
    for (const auto& a : report.per_size) {
        per_size.push_back({{"jobs", a.jobs},
                            {"machines", a.machines},
                            {"count", a.count},
                            {"mean_gap", a.mean_gap ? nlohmann::json(*a.mean_gap) : nlohmann::json(nullptr)},
                            {"mean_wall_seconds", a.mean_wall_seconds}});
    }
    return {{"format_version", kReportVersion},
            {"steps", report.steps},
            {"seed", report.seed},
            {"mode", report.mode},
            {"instances", rows},
            {"aggregate",
             {{"mean_gap", report.mean_gap ? nlohmann::json(*report.mean_gap) : nlohmann::json(nullptr)},
              {"mean_wall_seconds", report.mean_wall_seconds},
              {"per_size", per_size}}}};
}

inline std::string report_csv(const GapReport& report) {
    std::ostringstream out;
    out << "name,jobs,machines,achieved,reference,gap_percent,wall_seconds,steps_used\n";
    for (const auto& r : report.rows) {
        out << r.name << "," << r.jobs << "," << r.machines << "," << r.achieved << ",";
        if (r.reference) out << *r.reference;
        out << ",";
        if (r.gap_percent) out << *r.gap_percent;
        out << "," << r.wall_seconds << "," << r.steps_used << "\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Scaling probe: mean wall time per search step across instance sizes.
// ---------------------------------------------------------------------------
struct ScalingRow {
    int jobs = 0;
    int machines = 0;
    int nodes = 0;
    double seconds_per_step = 0.0;
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 1.0;
};

inline LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    LinearFit fit;
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / n;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double pred = fit.intercept + fit.slope * x[i];
        ss_res += (y[i] - pred) * (y[i] - pred);
        ss_tot += (y[i] - mean_y) * (y[i] - mean_y);
    }
    fit.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

inline std::vector<ScalingRow> scaling_probe(const std::vector<std::pair<int, int>>& sizes, int steps,
                                             const search::PolicyFn& policy, std::uint64_t seed,
                                             int instances_per_size = 2) {
    std::vector<ScalingRow> rows;
    for (const auto& [jobs, machines] : sizes) {
        double total_seconds = 0.0;
        long total_steps = 0;
        for (int i = 0; i < instances_per_size; ++i) {
            const Instance inst = generate_random(jobs, machines, mix_seed(seed, rows.size() * 1000 + static_cast<std::size_t>(i)));
            search::SearchState state = search::init_state(inst, "fdd-mwkr", mix_seed(seed, 77 + static_cast<std::size_t>(i)));
            const auto start = std::chrono::steady_clock::now();
            int executed = 0;
            for (int s = 0; s < steps && !state.terminal; ++s) {
                if (!search::step(state, policy, search::Mode::Sample).terminal) ++executed;
            }
            total_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            total_steps += executed;
        }
        ScalingRow row;
        row.jobs = jobs;
        row.machines = machines;
        row.nodes = jobs * machines + 2;
        row.seconds_per_step = total_steps > 0 ? total_seconds / static_cast<double>(total_steps) : 0.0;
        rows.push_back(row);
    }
    return rows;
}

inline std::string scaling_csv(const std::vector<ScalingRow>& rows) {
    std::ostringstream out;
    out << "jobs,machines,nodes,seconds_per_step\n";
    for (const auto& r : rows) {
        out << r.jobs << "," << r.machines << "," << r.nodes << "," << r.seconds_per_step << "\n";
    }
    return out.str();
}

}  // namespace bench
}  // namespace jsls
