#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "pmflow/errors.hpp"
#include "pmflow/io.hpp"

using namespace pmflow;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("pmflow_test_io_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("floats print in shortest form and read back exactly") {
    CHECK(io::fmt(0.1) == "0.1");
    CHECK(io::fmt(1.0) == "1");
    CHECK(io::fmt(-2.5e-300) == "-2.5e-300");
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> mant(-1.0, 1.0);
    std::uniform_int_distribution<int> ex(-300, 300);
    for (int k = 0; k < 2000; ++k) {
        const double x = std::ldexp(mant(rng), ex(rng));
        CHECK(io::parse_double(io::fmt(x)) == x);
    }
    CHECK(io::parse_double(" 3.25 ") == 3.25);
    CHECK_THROWS_AS(io::parse_double("1.5x"), ConfigError);
    CHECK_THROWS_AS(io::parse_double(""), ConfigError);
}

TEST_CASE("csv tables round-trip with comments and LF endings") {
    io::CsvTable t;
    t.comments = {"u_hat0=0.5", "note"};
    t.header = {"a", "b"};
    t.rows = {{1.0, 0.1}, {-3.5, 1e-17}};
    const std::string text = io::to_csv(t);
    CHECK(text == "# u_hat0=0.5\n# note\na,b\n1,0.1\n-3.5,1e-17\n");
    CHECK(text.find('\r') == std::string::npos);

    const fs::path dir = scratch_dir("csv");
    io::write_text(dir / "t.csv", text);
    const io::CsvTable back = io::read_csv(dir / "t.csv");
    CHECK(back.comments == t.comments);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK(back.column("b") == 1);
    CHECK(back.column("z") == -1);

    io::write_text(dir / "bad.csv", "a,b\n1\n");
    CHECK_THROWS_AS(io::read_csv(dir / "bad.csv"), ConfigError);
    CHECK_THROWS_AS(io::read_csv(dir / "missing.csv"), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("json output has sorted keys and nulls for non-finite values") {
    io::json j = {{"zeta", 1}, {"alpha", 2.5}, {"mid", std::numeric_limits<double>::infinity()}};
    const std::string s = io::dump(j);
    CHECK(s.find("\"alpha\"") < s.find("\"mid\""));
    CHECK(s.find("\"mid\"") < s.find("\"zeta\""));
    CHECK(s.find("null") != std::string::npos);
    CHECK(s.back() == '\n');
}

TEST_CASE("config survives a json round trip") {
    SolverConfig c;
    c.ns = 48;
    c.nt = 20;
    c.tol_pde = 3e-10;
    c.sonic_corner_refine = 2.5;
    c.run_verify = false;
    const SolverConfig b = io::config_from_json(io::config_to_json(c));
    CHECK(b.ns == 48);
    CHECK(b.nt == 20);
    CHECK(b.tol_pde == 3e-10);
    CHECK(b.sonic_corner_refine == 2.5);
    CHECK_FALSE(b.run_verify);
    CHECK(b.max_outer == c.max_outer);
}

TEST_CASE("a solution directory rebuilds the same field") {
    SolverConfig cfg;
    cfg.ns = 24;
    cfg.nt = 12;
    const double beta = 0.3 * critical_angles(1.4, 0.5).beta_s;
    const FbpResult r = solve_fbp(1.4, 0.5, beta, cfg);
    REQUIRE(r.report.converged);

    const fs::path dir = scratch_dir("dir");
    io::write_solution(dir, r.field, r.report, cfg);
    for (const char* name : {"solution.csv", "shock.csv", "report.json"}) CHECK(fs::exists(dir / name));

    const SolutionField back = io::read_solution(dir);
    CHECK(back.gamma == 1.4);
    CHECK(back.params.v_inf == 0.5);
    CHECK(back.params.beta == beta);
    CHECK(back.grid.s == r.field.grid.s);
    CHECK(back.grid.t == r.field.grid.t);
    CHECK(back.u == r.field.u);
    CHECK(back.shock.values() == r.field.shock.values());
    for (double s : {-0.9, -0.3, 0.2, 0.77}) CHECK(back.shock(s) == r.field.shock(s));

    // Same bytes when written again.
    const std::string first = io::to_csv(io::solution_table(back));
    CHECK(first == io::to_csv(io::solution_table(r.field)));

    const io::json rep = io::read_json(dir / "report.json");
    CHECK(rep.at("converged").get<bool>());
    CHECK(rep.at("config").at("ns").get<int>() == 24);
    CHECK(rep.at("topology").get<std::string>() == "supersonic-corner");
    CHECK_FALSE(rep.contains("wall_time"));

    // Verification of the rebuilt field matches the in-memory one.
    const AdmissibilityReport a = verify_solution(r.field), b = verify_solution(back);
    CHECK(io::dump(io::admissibility_to_json(a)) == io::dump(io::admissibility_to_json(b)));

    fs::remove(dir / "shock.csv");
    CHECK_THROWS_AS(io::read_solution(dir), ConfigError);
    CHECK_THROWS_AS(io::read_solution(dir / "nope"), ConfigError);
    fs::remove_all(dir);
}
