#include "doctest.h"
#include "fixtures.hpp"
#include "jsls/search.hpp"
#include "test_util.hpp"

using namespace jsls;
using namespace jsls::search;

TEST_SUITE_BEGIN("search");

TEST_CASE("init_state seeds from the dispatch rule") {
    const Instance inst = fixtures::tiny();
    SearchState st = init_state(inst, "fdd-mwkr", 3);
    CHECK(st.incumbent_makespan >= 6);
    CHECK(st.incumbent_makespan == st.times.makespan);
    CHECK(!st.terminal);

    SearchState again = init_state(inst, "fdd-mwkr", 99);
    CHECK(again.graph == st.graph);  // deterministic regardless of seed

    SearchState r1 = init_state(inst, "random", 4);
    SearchState r2 = init_state(inst, "random", 4);
    CHECK(r1.graph == r2.graph);
    CHECK_THROWS_AS(init_state(inst, "bogus", 0), Error);
}

TEST_CASE("stepping from solution B takes the single improving move") {
    const Instance inst = fixtures::tiny();
    SearchState st(fixtures::solution_b(inst), 7);
    CHECK(st.incumbent_makespan == 11);
    const StepRecord rec = step(st, uniform_policy(), Mode::Sample);
    CHECK(!rec.terminal);
    CHECK(rec.move_index == 0);
    CHECK(rec.makespan_after == 6);
    CHECK(rec.reward == 5);  // incumbent 11 -> makespan 6
    CHECK(st.incumbent_makespan == 6);
    CHECK(st.graph == fixtures::solution_a(inst));
}

TEST_CASE("solution A is terminal") {
    const Instance inst = fixtures::tiny();
    SearchState st(fixtures::solution_a(inst), 7);
    const StepRecord rec = step(st, uniform_policy(), Mode::Sample);
    CHECK(rec.terminal);
    CHECK(st.terminal);
    CHECK(st.incumbent_makespan == 6);
}

TEST_CASE("rewards clamp at zero on worsening moves") {
    Rng rng(5);
    const Instance inst = generate_random(6, 6, 11);
    SearchState st = init_state(inst, "fdd-mwkr", 5);
    bool saw_zero = false, saw_positive = false;
    for (int t = 0; t < 150 && !st.terminal; ++t) {
        const Time incumbent_before = st.incumbent_makespan;
        const StepRecord rec = step(st, uniform_policy(), Mode::Sample);
        if (rec.terminal) break;
        CHECK(rec.reward == std::max<Time>(incumbent_before - rec.makespan_after, 0));
        CHECK(rec.reward >= 0);
        saw_zero = saw_zero || rec.reward == 0;
        saw_positive = saw_positive || rec.reward > 0;
    }
    CHECK(saw_zero);
    CHECK(saw_positive);
}

TEST_CASE("run_search with no budget returns the initial solution") {
    const Instance inst = fixtures::tiny();
    const SearchResult res = run_search(inst, uniform_policy(), 0, 3, Mode::Sample);
    CHECK(res.trace.empty());
    CHECK(res.best_makespan == res.initial_makespan);
}

TEST_CASE("one step suffices from solution B") {
    const Instance inst = fixtures::tiny();
    SearchState st(fixtures::solution_b(inst), 13);
    const SearchResult res = run_from_state(st, uniform_policy(), 5, Mode::Greedy);
    CHECK(res.best_makespan == 6);
    CHECK(res.terminal);  // solution A has no moves
}

TEST_CASE("cumulative reward telescopes to the incumbent improvement") {
    Rng rng(17);
    for (int it = 0; it < 15; ++it) {
        const Instance inst = generate_random(2 + rng.uniform_int(7), 2 + rng.uniform_int(7), rng.next_u64());
        SearchState st = init_state(inst, "fdd-mwkr", rng.next_u64());
        const SearchResult res = run_from_state(st, uniform_policy(), 120, Mode::Sample);
        Time total = 0;
        for (const auto& rec : res.trace) total += rec.reward;
        CHECK(total == res.initial_makespan - res.best_makespan);
    }
}

TEST_CASE("incumbent is monotone and intermediate graphs stay feasible") {
    const Instance inst = generate_random(7, 5, 23);
    SearchState st = init_state(inst, "fdd-mwkr", 29);
    Time last_incumbent = st.incumbent_makespan;
    for (int t = 0; t < 80 && !st.terminal; ++t) {
        step(st, uniform_policy(), Mode::Sample);
        CHECK(st.incumbent_makespan <= last_incumbent);
        last_incumbent = st.incumbent_makespan;
        CHECK(is_acyclic(st.graph));
        CHECK(compute_times(st.graph).makespan == st.times.makespan);
    }
    CHECK(compute_times(st.incumbent_graph).makespan == st.incumbent_makespan);
}

TEST_CASE("identical seeds give identical traces") {
    const Instance inst = generate_random(6, 6, 31);
    auto run = [&](Mode mode) {
        const SearchResult res = run_search(inst, uniform_policy(), 60, 37, mode);
        std::vector<std::pair<int, Time>> sig;
        for (const auto& rec : res.trace) sig.emplace_back(rec.move_index, rec.makespan_after);
        return sig;
    };
    CHECK(run(Mode::Sample) == run(Mode::Sample));
    CHECK(run(Mode::Greedy) == run(Mode::Greedy));
}

TEST_CASE("greedy mode breaks ties toward the lowest index") {
    const Instance inst = fixtures::tiny();
    SearchState st(fixtures::solution_b(inst), 3);
    // Uniform probabilities: every index ties, so greedy must take index 0.
    const StepRecord rec = step(st, uniform_policy(), Mode::Greedy);
    CHECK(rec.move_index == 0);
}

TEST_CASE("trace export is one json object per step") {
    const Instance inst = generate_random(5, 5, 41);
    const SearchResult res = run_search(inst, uniform_policy(), 25, 43, Mode::Sample);
    const std::string text = trace_jsonl(res);
    std::istringstream in(text);
    std::string line;
    std::size_t rows = 0;
    Time incumbent = res.initial_makespan;
    while (std::getline(in, line)) {
        const nlohmann::json row = nlohmann::json::parse(line);
        CHECK(row.at("step") == rows);
        incumbent = std::min(incumbent, row.at("makespan").get<Time>());
        CHECK(row.at("incumbent").get<Time>() == incumbent);
        CHECK(row.at("reward").get<Time>() >= 0);
        CHECK(row.contains("move"));
        ++rows;
    }
    CHECK(rows == res.trace.size());
}

TEST_SUITE_END();
