#include "sighom/config.hpp"

#include <catch2/catch.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sighom;
namespace fs = std::filesystem;

namespace {

RunConfig parse_str(const std::string& s) {
    std::istringstream is(s);
    return parse_config(is);
}

// run the CLI binary, return its exit code
int run_cli(const std::string& args, std::string* out_path = nullptr) {
    fs::path dir = fs::temp_directory_path() / "sighom_cli_test";
    fs::create_directories(dir);
    std::string cmd = std::string(SIGHOM_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() +
                      " 2> " + (dir / "stderr.txt").string();
    int rc = std::system(cmd.c_str());
    if (out_path) *out_path = (dir / "stdout.txt").string();
    return WEXITSTATUS(rc);
}

std::string write_cfg(const std::string& name, const std::string& body) {
    fs::path dir = fs::temp_directory_path() / "sighom_cli_test";
    fs::create_directories(dir);
    fs::path p = dir / name;
    std::ofstream f(p);
    f << body;
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("config: defaults validate and round-trip") {
    RunConfig def;
    def.validate();
    RunConfig again = parse_str(serialize_config(def));
    CHECK(serialize_config(again) == serialize_config(def));
}

TEST_CASE("config: parse, comments, fractions") {
    auto c = parse_str("# comment\n"
                       "inclusion = 1/8 1/8 5/8 7/8\n"
                       "epsilon = 1/16 # inline\n"
                       "gamma_list = -1.5, 1\n"
                       "psor_omega = auto\n"
                       "A2 = 2 0.5 3\n");
    CHECK(c.incl_x1 == Frac(5, 8));
    CHECK(c.epsilon_n == 16);
    CHECK(c.gamma_list == std::vector<double>{-1.5, 1.0});
    CHECK(c.psor_omega == 0.0);
    CHECK(c.coefficient().A2(0, 1) == 0.5);
    CHECK(serialize_config(parse_str(serialize_config(c))) == serialize_config(c));
}

TEST_CASE("config: rejections name the offence") {
    CHECK_THROWS_WITH(parse_str("not_a_key = 1\n"), Catch::Contains("not_a_key"));
    CHECK_THROWS_AS(parse_str("gamma = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_str("epsilon = 0.3\n"), ConfigError);
    CHECK_THROWS_AS(parse_str("epsilon = 2/3\n"), ConfigError);
    CHECK_THROWS_AS(parse_str("h = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_str("A1 = -1 0 1\n"), ConfigError);      // not positive definite
    CHECK_THROWS_AS(parse_str("psor_omega = 2.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_str("map_directions = 15\n"), ConfigError);
}

TEST_CASE("cli: malformed config key exits 1 and names it") {
    auto cfg = write_cfg("bad.cfg", "frobnicate = 1\n");
    std::string out;
    int rc = run_cli("cell --config " + cfg, &out);
    CHECK(rc == 1);
    fs::path dir = fs::temp_directory_path() / "sighom_cli_test";
    CHECK(slurp(dir / "stderr.txt").find("frobnicate") != std::string::npos);
}

TEST_CASE("cli: epsilon not 1/n exits 1") {
    auto cfg = write_cfg("badeps.cfg", "epsilon = 0.37\n");
    CHECK(run_cli("solve --config " + cfg) == 1);
}

TEST_CASE("cli: cell whole on the identity writes an identity tensor") {
    fs::path dir = fs::temp_directory_path() / "sighom_cli_test" / "out_cell";
    auto cfg = write_cfg("cell.cfg", "regime = whole\ncell_resolution = 8\n");
    int rc = run_cli("cell --config " + cfg + " --out " + dir.string());
    REQUIRE(rc == 0);
    std::string j = slurp(dir / "cell_whole.json");
    CHECK(j.find("\"regime\": \"whole\"") != std::string::npos);
    CHECK(j.find("1.0") != std::string::npos);
}

TEST_CASE("cli: vi regime writes a direction table of the requested size") {
    fs::path dir = fs::temp_directory_path() / "sighom_cli_test" / "out_map";
    auto cfg = write_cfg("map.cfg", "regime = vi\ncell_resolution = 4\nmap_directions = 16\n"
                                    "A2 = 2 0 2\n");
    int rc = run_cli("cell --config " + cfg + " --out " + dir.string());
    REQUIRE(rc == 0);
    std::string j = slurp(dir / "cell_vi.json");
    CHECK(std::count(j.begin(), j.end(), '\n') > 16);
    size_t count = 0, pos = 0;
    while ((pos = j.find("\"angle\"", pos)) != std::string::npos) { ++count; pos += 7; }
    CHECK(count == 16);
}

TEST_CASE("cli: solve with zero source writes an all-zero solution CSV") {
    fs::path dir = fs::temp_directory_path() / "sighom_cli_test" / "out_zero";
    auto cfg = write_cfg("zero.cfg", "source = zero\nepsilon = 1/2\nper_cell_resolution = 4\n"
                                     "gamma = 1\n");
    int rc = run_cli("solve --config " + cfg + " --out " + dir.string());
    REQUIRE(rc == 0);
    std::istringstream csv(slurp(dir / "solution.csv"));
    std::string line;
    std::getline(csv, line); // header
    int rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        auto last = line.rfind(',');
        CHECK(std::abs(std::stod(line.substr(last + 1))) == 0.0);
    }
    CHECK(rows > 0);
    // gamma = 1 run also emits the interface CSV with complementarity columns
    std::string iface = slurp(dir / "interface.csv");
    CHECK(iface.rfind("pair_id,jump,flux,complementarity_residual", 0) == 0);
}

TEST_CASE("cli: study reruns are byte-identical; interrupted runs exit 3") {
    auto cfg = write_cfg("study.cfg",
                         "gamma_list = 0.5\nepsilon_list = 1/2,1/4\nper_cell_resolution = 4\n"
                         "cell_resolution = 8\nhomog_resolution = 8\nwindow_factor = 2\n"
                         "source = sin_2pi_x_sin_pi_y\nA2 = 2 0 2\n");
    fs::path d1 = fs::temp_directory_path() / "sighom_cli_test" / "study1";
    fs::path d2 = fs::temp_directory_path() / "sighom_cli_test" / "study2";
    REQUIRE(run_cli("study --config " + cfg + " --out " + d1.string()) == 0);
    REQUIRE(run_cli("study --config " + cfg + " --out " + d2.string()) == 0);
    CHECK(slurp(d1 / "report.csv") == slurp(d2 / "report.csv"));
    CHECK(!slurp(d1 / "plot_report.py").empty());
    CHECK(!slurp(d1 / "report.json").empty());

    // a study whose rows cannot converge is flagged and exits 3
    auto bad = write_cfg("study_bad.cfg",
                         "gamma_list = 0.5\nepsilon_list = 1/2\nper_cell_resolution = 4\n"
                         "cell_resolution = 8\nhomog_resolution = 8\nwindow_factor = 2\n"
                         "psor_max_sweeps = 1\nsource = sin_2pi_x_sin_pi_y\nA2 = 2 0 2\n");
    fs::path d3 = fs::temp_directory_path() / "sighom_cli_test" / "study3";
    CHECK(run_cli("study --config " + bad + " --out " + d3.string()) == 3);
}

TEST_CASE("cli: unfold-check reports identity residuals") {
    fs::path dir = fs::temp_directory_path() / "sighom_cli_test" / "out_unfold";
    auto cfg = write_cfg("unfold.cfg", "epsilon = 1/4\nper_cell_resolution = 4\ngamma = -1\n"
                                       "source = sin_2pi_x_sin_pi_y\nA2 = 2 0 2\n");
    std::string out;
    int rc = run_cli("unfold-check --config " + cfg + " --out " + dir.string(), &out);
    REQUIRE(rc == 0);
    std::string j = slurp(dir / "unfold_check.json");
    CHECK(j.find("interface_identity_abs_diff") != std::string::npos);
    CHECK(j.find("integration_identity_diff_comp1") != std::string::npos);
}
