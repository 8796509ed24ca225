#pragma once

#include <compare>
#include <sstream>
#include <string>
#include <vector>

#include "jsls/common.hpp"

namespace jsls {

// Identifies a node of the disjunctive graph: a real operation (job, step),
// or one of the two artificial nodes bracketing every schedule.
struct OpId {
    int job = 0;
    int step = 0;

    static constexpr OpId op(int job, int step) { return OpId{job, step}; }
    static constexpr OpId source() { return OpId{-1, 0}; }
    static constexpr OpId sink() { return OpId{-2, 0}; }

    constexpr bool is_source() const { return job == -1; }
    constexpr bool is_sink() const { return job == -2; }
    constexpr bool is_op() const { return job >= 0; }

    auto operator<=>(const OpId&) const = default;
};

inline std::string to_string(const OpId& id) {
    if (id.is_source()) return "S";
    if (id.is_sink()) return "T";
    return "O(" + std::to_string(id.job) + "," + std::to_string(id.step) + ")";
}

struct RouteEntry {
    int machine = 0;
    Time processing = 0;

    auto operator<=>(const RouteEntry&) const = default;
};

class ParseError : public Error {
public:
    enum class Kind {
        MalformedHeader,
        WrongPairCount,
        DuplicateMachineInRoute,
        NonPositiveTime,
        MatrixShapeMismatch,
    };

    ParseError(Kind kind, int line, const std::string& msg)
        : Error("parse error at line " + std::to_string(line) + ": " + msg),
          kind(kind),
          line(line) {}

    Kind kind;
    int line;  // 1-based line number in the input text
};

struct ValidationIssue {
    enum class Kind { WrongRouteLength, DuplicateMachineInRoute, NonPositiveTime, MachineOutOfRange };
    Kind kind;
    int job;
    int step;  // -1 when the issue concerns the whole route
};

// Immutable problem data: per-job machine routes with processing times.
struct Instance {
    int num_jobs = 0;
    int num_machines = 0;
    std::vector<std::vector<RouteEntry>> routes;  // routes[job][step]

    int num_ops() const { return num_jobs * num_machines; }

    const RouteEntry& at(int job, int step) const { return routes[static_cast<std::size_t>(job)][static_cast<std::size_t>(step)]; }

    // Position of machine m in job j's route.
    int step_of_machine(int job, int machine) const {
        const auto& route = routes[static_cast<std::size_t>(job)];
        for (int s = 0; s < static_cast<int>(route.size()); ++s)
            if (route[static_cast<std::size_t>(s)].machine == machine) return s;
        return -1;
    }

    bool operator==(const Instance&) const = default;
};

inline std::vector<ValidationIssue> validate(const Instance& inst) {
    std::vector<ValidationIssue> issues;
    for (int j = 0; j < inst.num_jobs; ++j) {
        const auto& route = inst.routes[static_cast<std::size_t>(j)];
        if (static_cast<int>(route.size()) != inst.num_machines) {
            issues.push_back({ValidationIssue::Kind::WrongRouteLength, j, -1});
        }
        std::vector<int> seen(static_cast<std::size_t>(inst.num_machines), 0);
        for (int s = 0; s < static_cast<int>(route.size()); ++s) {
            const auto& e = route[static_cast<std::size_t>(s)];
            if (e.machine < 0 || e.machine >= inst.num_machines) {
                issues.push_back({ValidationIssue::Kind::MachineOutOfRange, j, s});
            } else if (++seen[static_cast<std::size_t>(e.machine)] == 2) {
                issues.push_back({ValidationIssue::Kind::DuplicateMachineInRoute, j, s});
            }
            if (e.processing < 1) {
                issues.push_back({ValidationIssue::Kind::NonPositiveTime, j, s});
            }
        }
    }
    return issues;
}

namespace detail {

// Splits text into (line_number, tokens) pairs, dropping blank and comment lines.
inline std::vector<std::pair<int, std::vector<std::string>>> tokenize_lines(const std::string& text) {
    std::vector<std::pair<int, std::vector<std::string>>> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '#') continue;
        std::istringstream ls(line);
        std::vector<std::string> toks;
        std::string t;
        while (ls >> t) toks.push_back(t);
        if (toks.empty()) continue;
        out.emplace_back(lineno, std::move(toks));
    }
    return out;
}

inline long long parse_int(const std::string& tok, int lineno, ParseError::Kind kind_on_fail) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(kind_on_fail, lineno, "expected integer, got '" + tok + "'");
    }
}

}  // namespace detail

// Standard OR-Library style format: header `J M`, then one line per job with
// M pairs `machine_id processing_time` (machine ids 0-based). Lines starting
// with `#` are comments.
inline Instance parse_orlib(const std::string& text) {
    auto lines = detail::tokenize_lines(text);
    if (lines.empty()) throw ParseError(ParseError::Kind::MalformedHeader, 1, "empty input");

    const auto& [hline, htoks] = lines[0];
    if (htoks.size() != 2) {
        throw ParseError(ParseError::Kind::MalformedHeader, hline, "header must be 'num_jobs num_machines'");
    }
    const long long jobs = detail::parse_int(htoks[0], hline, ParseError::Kind::MalformedHeader);
    const long long machines = detail::parse_int(htoks[1], hline, ParseError::Kind::MalformedHeader);
    if (jobs < 1 || machines < 1) {
        throw ParseError(ParseError::Kind::MalformedHeader, hline, "job and machine counts must be positive");
    }
    if (static_cast<long long>(lines.size()) - 1 != jobs) {
        throw ParseError(ParseError::Kind::WrongPairCount, hline,
                         "expected " + std::to_string(jobs) + " job lines, found " +
                             std::to_string(lines.size() - 1));
    }

    Instance inst;
    inst.num_jobs = static_cast<int>(jobs);
    inst.num_machines = static_cast<int>(machines);
    inst.routes.resize(static_cast<std::size_t>(jobs));
    for (long long j = 0; j < jobs; ++j) {
        const auto& [lineno, toks] = lines[static_cast<std::size_t>(j + 1)];
        if (static_cast<long long>(toks.size()) != 2 * machines) {
            throw ParseError(ParseError::Kind::WrongPairCount, lineno,
                             "expected " + std::to_string(2 * machines) + " values on job line");
        }
        std::vector<int> seen(static_cast<std::size_t>(machines), 0);
        auto& route = inst.routes[static_cast<std::size_t>(j)];
        route.resize(static_cast<std::size_t>(machines));
        for (long long s = 0; s < machines; ++s) {
            const long long m = detail::parse_int(toks[static_cast<std::size_t>(2 * s)], lineno,
                                                  ParseError::Kind::WrongPairCount);
            const long long p = detail::parse_int(toks[static_cast<std::size_t>(2 * s + 1)], lineno,
                                                  ParseError::Kind::WrongPairCount);
            if (m < 0 || m >= machines) {
                throw ParseError(ParseError::Kind::DuplicateMachineInRoute, lineno,
                                 "machine id " + std::to_string(m) + " out of range");
            }
            if (++seen[static_cast<std::size_t>(m)] == 2) {
                throw ParseError(ParseError::Kind::DuplicateMachineInRoute, lineno,
                                 "machine " + std::to_string(m) + " repeated in route");
            }
            if (p < 1) {
                throw ParseError(ParseError::Kind::NonPositiveTime, lineno,
                                 "processing time must be >= 1");
            }
            route[static_cast<std::size_t>(s)] = RouteEntry{static_cast<int>(m), static_cast<Time>(p)};
        }
    }
    return inst;
}

// Taillard format: header `J M`, a JxM matrix of processing times, then a JxM
// matrix of machine orders (1-based). Converted to 0-based machine ids.
inline Instance parse_taillard(const std::string& text) {
    auto lines = detail::tokenize_lines(text);
    if (lines.empty()) throw ParseError(ParseError::Kind::MalformedHeader, 1, "empty input");

    const auto& [hline, htoks] = lines[0];
    if (htoks.size() != 2) {
        throw ParseError(ParseError::Kind::MalformedHeader, hline, "header must be 'num_jobs num_machines'");
    }
    const long long jobs = detail::parse_int(htoks[0], hline, ParseError::Kind::MalformedHeader);
    const long long machines = detail::parse_int(htoks[1], hline, ParseError::Kind::MalformedHeader);
    if (jobs < 1 || machines < 1) {
        throw ParseError(ParseError::Kind::MalformedHeader, hline, "job and machine counts must be positive");
    }

    // Flatten the remaining tokens; Taillard files wrap matrix rows freely.
    std::vector<std::pair<int, long long>> values;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        for (const auto& tok : lines[i].second) {
            values.emplace_back(lines[i].first, detail::parse_int(tok, lines[i].first,
                                                                  ParseError::Kind::MatrixShapeMismatch));
        }
    }
    const long long expected = 2 * jobs * machines;
    if (static_cast<long long>(values.size()) != expected) {
        const int lineno = values.empty() ? hline : values.back().first;
        throw ParseError(ParseError::Kind::MatrixShapeMismatch, lineno,
                         "expected " + std::to_string(expected) + " matrix values, found " +
                             std::to_string(values.size()));
    }

    Instance inst;
    inst.num_jobs = static_cast<int>(jobs);
    inst.num_machines = static_cast<int>(machines);
    inst.routes.assign(static_cast<std::size_t>(jobs),
                       std::vector<RouteEntry>(static_cast<std::size_t>(machines)));
    for (long long j = 0; j < jobs; ++j) {
        std::vector<int> seen(static_cast<std::size_t>(machines), 0);
        for (long long s = 0; s < machines; ++s) {
            const auto& [pline, p] = values[static_cast<std::size_t>(j * machines + s)];
            const auto& [mline, m1] = values[static_cast<std::size_t>(jobs * machines + j * machines + s)];
            if (p < 1) throw ParseError(ParseError::Kind::NonPositiveTime, pline, "processing time must be >= 1");
            if (m1 < 1 || m1 > machines) {
                throw ParseError(ParseError::Kind::DuplicateMachineInRoute, mline,
                                 "machine id " + std::to_string(m1) + " out of 1.." + std::to_string(machines));
            }
            const int m = static_cast<int>(m1 - 1);
            if (++seen[static_cast<std::size_t>(m)] == 2) {
                throw ParseError(ParseError::Kind::DuplicateMachineInRoute, mline,
                                 "machine " + std::to_string(m1) + " repeated in route");
            }
            inst.routes[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)] =
                RouteEntry{m, static_cast<Time>(p)};
        }
    }
    return inst;
}

inline std::string serialize_orlib(const Instance& inst) {
    std::ostringstream out;
    out << inst.num_jobs << " " << inst.num_machines << "\n";
    for (const auto& route : inst.routes) {
        for (std::size_t s = 0; s < route.size(); ++s) {
            if (s) out << " ";
            out << route[s].machine << " " << route[s].processing;
        }
        out << "\n";
    }
    return out.str();
}

inline std::string serialize_taillard(const Instance& inst) {
    std::ostringstream out;
    out << inst.num_jobs << " " << inst.num_machines << "\n";
    for (const auto& route : inst.routes) {
        for (std::size_t s = 0; s < route.size(); ++s) out << (s ? " " : "") << route[s].processing;
        out << "\n";
    }
    for (const auto& route : inst.routes) {
        for (std::size_t s = 0; s < route.size(); ++s) out << (s ? " " : "") << route[s].machine + 1;
        out << "\n";
    }
    return out.str();
}

// Random instance: processing times uniform in {1..99}, machine order an
// independent uniform permutation per job. Pure function of (sizes, seed).
inline Instance generate_random(int num_jobs, int num_machines, std::uint64_t seed) {
    if (num_jobs < 1 || num_machines < 1) throw Error("generate_random: sizes must be >= 1");
    Rng rng(mix_seed(seed, (static_cast<std::uint64_t>(num_jobs) << 32) | static_cast<std::uint64_t>(num_machines)));
    Instance inst;
    inst.num_jobs = num_jobs;
    inst.num_machines = num_machines;
    inst.routes.assign(static_cast<std::size_t>(num_jobs),
                       std::vector<RouteEntry>(static_cast<std::size_t>(num_machines)));
    for (int j = 0; j < num_jobs; ++j) {
        std::vector<int> perm(static_cast<std::size_t>(num_machines));
        for (int m = 0; m < num_machines; ++m) perm[static_cast<std::size_t>(m)] = m;
        rng.shuffle(perm);
        for (int s = 0; s < num_machines; ++s) {
            inst.routes[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)] =
                RouteEntry{perm[static_cast<std::size_t>(s)], static_cast<Time>(1 + rng.uniform_int(99))};
        }
    }
    return inst;
}

}  // namespace jsls
