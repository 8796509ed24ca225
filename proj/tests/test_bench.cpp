#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "jsls/bench.hpp"
#include "jsls/exact.hpp"
#include "test_util.hpp"

using namespace jsls;
using namespace jsls::bench;

TEST_SUITE_BEGIN("bench");

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("gap formula") {
    CHECK(compute_gap(1100, 1000) == doctest::Approx(10.0));
    CHECK(compute_gap(1000, 1000) == doctest::Approx(0.0));
    CHECK(compute_gap(900, 1000) == doctest::Approx(-10.0));
    try {
        compute_gap(5, 0);
        FAIL("expected BenchError");
    } catch (const BenchError& e) {
        CHECK(e.kind == BenchError::Kind::NonPositiveReference);
    }
}

TEST_CASE("exhaustive optimum of the 2x2 fixture is 6") {
    CHECK(exact::exhaustive_optimum(fixtures::tiny()) == 6);
    CHECK(exact::bb_optimum(fixtures::tiny()) == 6);
}

TEST_CASE("branch and bound agrees with exhaustive enumeration up to 3x3") {
    Rng rng(71);
    for (int it = 0; it < 25; ++it) {
        const Instance inst = generate_random(1 + rng.uniform_int(3), 1 + rng.uniform_int(3), rng.next_u64());
        CHECK(exact::bb_optimum(inst) == exact::exhaustive_optimum(inst));
    }
}

TEST_CASE("branch and bound solves the published FT 6x6 instance to 55") {
    CHECK(exact::bb_optimum(fixtures::ft06()) == 55);
}

TEST_CASE("dataset loading pairs references and tolerates bad files") {
    TempDir dir("jsls_bench_ds");
    write(dir.path / "a.txt", "2 2\n0 2 1 3\n1 2 0 4\n");
    write(dir.path / "b.txt", "1 1\n0 7\n");
    write(dir.path / "broken.txt", "2 2\n0 2\n");
    write(dir.path / "references.csv", "name,makespan\na,6\n");

    const Dataset ds = load_dataset(dir.path.string(), "orlib");
    REQUIRE(ds.entries.size() == 2);
    CHECK(ds.errors.size() == 1);
    CHECK(ds.entries[0].name == "a");
    CHECK(ds.entries[0].reference == Time{6});
    CHECK(ds.entries[1].name == "b");
    CHECK(!ds.entries[1].reference.has_value());
}

TEST_CASE("run_eval produces consistent reports") {
    TempDir dir("jsls_bench_eval");
    Rng rng(73);
    std::string refs = "name,makespan\n";
    for (int i = 0; i < 4; ++i) {
        const Instance inst = generate_random(3, 3, 1000 + static_cast<std::uint64_t>(i));
        const std::string name = "syn" + std::to_string(i);
        write(dir.path / (name + ".txt"), serialize_orlib(inst));
        refs += name + "," + std::to_string(exact::exhaustive_optimum(inst)) + "\n";
    }
    write(dir.path / "references.csv", refs);
    const Dataset ds = load_dataset(dir.path.string(), "orlib");
    REQUIRE(ds.entries.size() == 4);

    const GapReport report = run_eval(ds, search::uniform_policy(), 50, 7, search::Mode::Sample);
    REQUIRE(report.rows.size() == 4);
    double gap_sum = 0.0;
    for (const auto& row : report.rows) {
        REQUIRE(row.gap_percent.has_value());
        CHECK(*row.gap_percent >= 0.0);  // references are optimal
        gap_sum += *row.gap_percent;
    }
    REQUIRE(report.mean_gap.has_value());
    CHECK(*report.mean_gap == doctest::Approx(gap_sum / 4.0).epsilon(1e-12));

    SUBCASE("same seed gives the same semantic report") {
        const GapReport again = run_eval(ds, search::uniform_policy(), 50, 7, search::Mode::Sample);
        REQUIRE(again.rows.size() == report.rows.size());
        for (std::size_t i = 0; i < report.rows.size(); ++i) {
            CHECK(again.rows[i].achieved == report.rows[i].achieved);
            CHECK(again.rows[i].steps_used == report.rows[i].steps_used);
        }
    }

    SUBCASE("parallel workers give the same semantic report") {
        const GapReport par = run_eval(ds, search::uniform_policy(), 50, 7, search::Mode::Sample, "fdd-mwkr", 3);
        for (std::size_t i = 0; i < report.rows.size(); ++i) {
            CHECK(par.rows[i].achieved == report.rows[i].achieved);
        }
    }

    SUBCASE("longer budgets never hurt") {
        const GapReport r500 = run_eval(ds, search::uniform_policy(), 500, 7, search::Mode::Sample);
        REQUIRE(r500.mean_gap.has_value());
        CHECK(*r500.mean_gap <= *report.mean_gap);
    }

    SUBCASE("json and csv mirrors carry every row") {
        const nlohmann::json j = report_json(report);
        CHECK(j.at("format_version") == kReportVersion);
        CHECK(j.at("instances").size() == 4);
        CHECK(j.at("aggregate").at("per_size").size() == 1);
        const std::string csv = report_csv(report);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 rows
    }
}

TEST_CASE("missing references leave gaps null") {
    TempDir dir("jsls_bench_noref");
    write(dir.path / "x.txt", "1 1\n0 9\n");
    const Dataset ds = load_dataset(dir.path.string(), "orlib");
    const GapReport report = run_eval(ds, search::uniform_policy(), 5, 1, search::Mode::Sample);
    REQUIRE(report.rows.size() == 1);
    CHECK(!report.rows[0].gap_percent.has_value());
    CHECK(!report.mean_gap.has_value());
    const nlohmann::json j = report_json(report);
    CHECK(j.at("instances")[0].at("gap_percent").is_null());
}

TEST_CASE("linear fit recovers an exact line") {
    const LinearFit fit = fit_linear({1, 2, 3, 4}, {3.0, 5.0, 7.0, 9.0});
    CHECK(fit.slope == doctest::Approx(2.0));
    CHECK(fit.intercept == doctest::Approx(1.0));
    CHECK(fit.r_squared == doctest::Approx(1.0));
}

TEST_CASE("scaling probe emits one row per size") {
    const std::vector<std::pair<int, int>> sizes = {{2, 2}, {3, 2}, {4, 2}};
    const auto rows = scaling_probe(sizes, 5, search::uniform_policy(), 3, 1);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].jobs == sizes[i].first);
        CHECK(rows[i].nodes == sizes[i].first * sizes[i].second + 2);
        CHECK(rows[i].seconds_per_step >= 0.0);
    }
    const std::string csv = scaling_csv(rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_SUITE_END();
