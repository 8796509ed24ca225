#pragma once

#include <string>

#include "jsls/graph.hpp"
#include "jsls/instance.hpp"

// Shared fixtures: the 2x2 instance used throughout the suites and the
// published FT 6x6 benchmark data (Fisher & Thompson).
namespace fixtures {

// Job 0: (M0, 2) -> (M1, 3); Job 1: (M1, 2) -> (M0, 4).
inline jsls::Instance tiny() { return jsls::parse_orlib("2 2\n0 2 1 3\n1 2 0 4\n"); }

// M0: O00 before O11; M1: O10 before O01. Makespan 6 (optimal).
inline jsls::OrientedGraph solution_a(const jsls::Instance& inst) {
    return jsls::OrientedGraph::build(inst, {{jsls::OpId::op(0, 0), jsls::OpId::op(1, 1)},
                                             {jsls::OpId::op(1, 0), jsls::OpId::op(0, 1)}});
}

// M0: O00 before O11; M1: O01 before O10. Makespan 11.
inline jsls::OrientedGraph solution_b(const jsls::Instance& inst) {
    return jsls::OrientedGraph::build(inst, {{jsls::OpId::op(0, 0), jsls::OpId::op(1, 1)},
                                             {jsls::OpId::op(0, 1), jsls::OpId::op(1, 0)}});
}

inline const char* ft06_text() {
    return "6 6\n"
           "2 1 0 3 1 6 3 7 5 3 4 6\n"
           "1 8 2 5 4 10 5 10 0 10 3 4\n"
           "2 5 3 4 5 8 0 9 1 1 4 7\n"
           "1 5 0 5 2 5 3 3 4 8 5 9\n"
           "2 9 1 3 4 5 5 4 0 3 3 1\n"
           "1 3 3 3 5 9 0 10 4 4 2 1\n";
}

inline jsls::Instance ft06() { return jsls::parse_orlib(ft06_text()); }

}  // namespace fixtures
