#include "doctest.h"

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "kplane/field_io.hpp"

using namespace kplane;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string stdout_text;
};

CliResult run_cli(const std::string& args) {
    const std::string cmd = std::string(KPLANE_CLI_PATH) + " " + args + " 2>/dev/null";
    CliResult res;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf;
    while (std::size_t got = std::fread(buf.data(), 1, buf.size(), pipe)) res.stdout_text.append(buf.data(), got);
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

GridData small_random_grid(std::uint64_t seed) {
    RandomStream rng(seed);
    GridData g;
    g.n = 2;
    g.dims = {5, 7};
    g.h = 0.37;
    g.lo = {-1.2, 0.4};
    g.values.resize(35);
    for (auto& v : g.values) v = rng.u01();
    return g;
}

} // namespace

TEST_CASE("grid serialization round-trips bit-exactly") {
    const GridData g = small_random_grid(5);
    write_grid_binary(g, "/tmp/kplane_test_grid.bin");
    const GridData back = read_grid_binary("/tmp/kplane_test_grid.bin");
    CHECK(back.n == g.n);
    CHECK(back.dims == g.dims);
    CHECK(back.h == g.h);
    CHECK(back.lo == g.lo);
    CHECK(back.values == g.values);

    write_grid_text(g, "/tmp/kplane_test_grid.txt");
    const GridData text = read_grid_text("/tmp/kplane_test_grid.txt");
    CHECK(text.values == g.values);
    CHECK(text.lo == g.lo);

    CHECK_THROWS_AS(read_grid_binary("/tmp/does_not_exist.bin"), ParameterError);
}

TEST_CASE("field spec grammar") {
    const Field ex = parse_field_spec("builtin:extremizer", 2, 1);
    CHECK(ex(Vec{0.0, 0.0}) == doctest::Approx(1.0));

    const Field scaled = parse_field_spec("builtin:extremizer:c=3:scale=2", 3, 2);
    CHECK(scaled(Vec{1.0, 0.0, 0.0}) == doctest::Approx(3.0 * std::pow(5.0, -1.5)));

    const Field shifted = parse_field_spec("builtin:extremizer:cx=1.5", 2, 1);
    CHECK(shifted(Vec{1.5, 0.0}) == doctest::Approx(1.0));

    const Field gauss = parse_field_spec("builtin:gaussian", 2, 1);
    CHECK(gauss(Vec{1.0, 0.0}) == doctest::Approx(std::exp(-1.0)));

    const Field box = parse_field_spec("builtin:indicator:box:0,1,0,2", 2, 1);
    CHECK(box(Vec{0.5, 1.5}) == 1.0);
    CHECK(box(Vec{0.5, 2.5}) == 0.0);

    const Field ball = parse_field_spec("builtin:indicator:ball:1.5,0.5,0", 2, 1);
    CHECK(ball(Vec{0.5, 1.0}) == 1.0);
    CHECK(ball(Vec{2.5, 0.0}) == 0.0);

    const GridData g = small_random_grid(7);
    write_grid_binary(g, "/tmp/kplane_spec_grid.bin");
    const Field from_file = parse_field_spec("file:/tmp/kplane_spec_grid.bin", 2, 1);
    CHECK(from_file.kind == FieldKind::grid);
    CHECK(from_file.grid().values == g.values);

    CHECK_THROWS_AS(parse_field_spec("builtin:unknown", 2, 1), ParameterError);
    CHECK_THROWS_AS(parse_field_spec("nonsense", 2, 1), ParameterError);
    CHECK_THROWS_AS(parse_field_spec("builtin:indicator:box:0,1", 2, 1), ParameterError);
}

TEST_CASE("cli: estimates, reports and exit codes") {
    const CliResult ratio = run_cli("ratio --n 2 --k 1 --field builtin:extremizer --seed 1 --samples 3e4");
    REQUIRE(ratio.exit_code == 0);
    const auto rep = nlohmann::json::parse(ratio.stdout_text);
    CHECK(std::fabs(rep["value"].get<double>() - 1.16245) < 0.05);
    CHECK(rep["params"]["subcommand"] == "ratio");
    CHECK(rep["params"]["seed"] == 1);
    CHECK(rep.contains("stderr"));

    const CliResult tr = run_cli("transform --n 2 --k 1 --field builtin:gaussian --samples 1e4");
    REQUIRE(tr.exit_code == 0);
    const auto trep = nlohmann::json::parse(tr.stdout_text);
    CHECK(std::fabs(trep["value"].get<double>() - std::sqrt(3.141592653589793)) < 0.01);

    const CliResult yes = run_cli("permissible --radii 1,1,0.9 --coeffs 0.5,0.5");
    REQUIRE(yes.exit_code == 0);
    CHECK(nlohmann::json::parse(yes.stdout_text)["permissible"] == true);
    const CliResult no = run_cli("permissible --radii 1,1,1 --coeffs 0.5,0.5");
    CHECK(nlohmann::json::parse(no.stdout_text)["permissible"] == false);

    CHECK(run_cli("no-such-subcommand").exit_code == 2);
    CHECK(run_cli("ratio --n 2 --k 5 --field builtin:gaussian --samples 1e3").exit_code == 2);
}

TEST_CASE("cli: identical configuration reproduces byte-identical reports") {
    const std::string args =
        "norm --n 2 --k 1 --field builtin:extremizer --seed 42 --samples 2e4 --out ";
    REQUIRE(run_cli(args + "/tmp/kplane_rep_a.json").exit_code == 0);
    REQUIRE(run_cli(args + "/tmp/kplane_rep_b.json").exit_code == 0);
    const std::string a = slurp("/tmp/kplane_rep_a.json");
    const std::string b = slurp("/tmp/kplane_rep_b.json");
    CHECK(!a.empty());
    CHECK(a == b);

    // symmetrize emits a deterministic CSV trace
    const std::string sym =
        "symmetrize --n 2 --k 1 --field builtin:indicator:box:1,3,0.5,2.5 --seed 2 "
        "--samples 2e4 --steps 4 --grid-cells 61 --grid-extent 10 --out ";
    REQUIRE(run_cli(sym + "/tmp/kplane_sym_a.csv").exit_code == 0);
    REQUIRE(run_cli(sym + "/tmp/kplane_sym_b.csv").exit_code == 0);
    const std::string sa = slurp("/tmp/kplane_sym_a.csv");
    CHECK(sa == slurp("/tmp/kplane_sym_b.csv"));
    CHECK(sa.substr(0, 31) == "step,tag,ratio,stderr,distance\n");
    CHECK(sa.find("rearrange") != std::string::npos);
    CHECK(sa.find(",J,") != std::string::npos);
}

TEST_CASE("cli: set-family probes parse JSON specs") {
    const char* spec = R"({
      "coefficients": {"k": 1, "row": [1.0, -1.0]},
      "sets": [
        {"type": "ball", "center": [0.9], "radius": 1.0},
        {"type": "ball", "center": [-0.7], "radius": 0.8},
        {"type": "ball", "center": [0.4], "radius": 0.9}
      ]
    })";
    {
        std::ofstream out("/tmp/kplane_sets.json");
        out << spec;
    }
    const CliResult gap = run_cli("bll-gap --spec /tmp/kplane_sets.json --samples 1e5 --seed 3");
    REQUIRE(gap.exit_code == 0);
    const auto grep = nlohmann::json::parse(gap.stdout_text);
    CHECK(grep["value"].get<double>() > 3.0 * grep["stderr"].get<double>());

    const CliResult probe = run_cli("burchard-probe --spec /tmp/kplane_sets.json --samples 1e5 --seed 3");
    REQUIRE(probe.exit_code == 0);
    const auto prep = nlohmann::json::parse(probe.stdout_text);
    CHECK(prep.contains("permissible"));
    CHECK(prep["value"].get<double>() > 0.0);

    const CliResult conv = run_cli(
        R"(convexity-probe --set {\"type\":\"ball\",\"center\":[0,0],\"radius\":1} --pairs 500)");
    REQUIRE(conv.exit_code == 0);
    CHECK(nlohmann::json::parse(conv.stdout_text)["value"].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("cli: rearrange writes a loadable grid") {
    const CliResult re = run_cli(
        "rearrange --n 2 --k 1 --field builtin:indicator:box:1,3,0.5,2.5 --grid-cells 41 "
        "--grid-extent 6 --mode full --out-grid /tmp/kplane_rearranged.bin");
    REQUIRE(re.exit_code == 0);
    const GridData g = read_grid_binary("/tmp/kplane_rearranged.bin");
    CHECK(g.n == 2);
    CHECK(g.dims == std::vector<int>{41, 41});
    // rearranged grid is centered and radially nonincreasing from the middle
    CHECK(g.lo[0] == doctest::Approx(-0.5 * 41 * g.h));
    const Field f = parse_field_spec("file:/tmp/kplane_rearranged.bin", 2, 1);
    CHECK(f(Vec{0.0, 0.0}) >= f(Vec{2.0, 0.0}));
}
