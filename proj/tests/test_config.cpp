#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "statlin/artifacts.hpp"
#include "statlin/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace statlin;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("statlin_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(STATLIN_CLI_PATH) + " " + args +
                            " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("default configuration round-trips the reference values") {
    const RunConfig cfg = parse_config_text(serialize_config(default_run_config()));
    CHECK(cfg.rocket.thrust_max == 1e6);
    CHECK(cfg.rocket.u_min == 0.2);
    CHECK(cfg.rocket.u_max == 0.8);
    CHECK(cfg.rocket.mass_flow == 300.0);
    CHECK(cfg.rocket.gravity == 9.81);
    CHECK(cfg.rocket.sigma_y == 100.0);
    CHECK(cfg.rocket.sigma_z == 10.0);
    CHECK(cfg.descent.initial_mean[0] == 1000.0);
    CHECK(cfg.descent.initial_mean[1] == 4000.0);
    CHECK(cfg.descent.initial_mean[2] == -75.0);
    CHECK(cfg.descent.initial_mean[3] == -200.0);
    CHECK(cfg.descent.initial_mean[4] == 40000.0);
    const Eigen::VectorXd p0 = cfg.descent.initial_cov.diagonal();
    CHECK(p0[0] == 100.0);
    CHECK(p0[1] == 100.0);
    CHECK(p0[2] == 1.0);
    CHECK(p0[3] == 1.0);
    CHECK(p0[4] == 1600.0);
    CHECK(cfg.descent.q_diag[0] == 10e3);
    CHECK(cfg.descent.q_diag[1] == 50e3);
    CHECK(cfg.descent.q_diag[2] == 1e3);
    CHECK(cfg.descent.q_diag[3] == 10e3);
    CHECK(cfg.descent.q_diag[4] == 0.0);
    CHECK(cfg.descent.qf_diag[0] == 14e3);
    CHECK(cfg.descent.qf_diag[1] == 20e3);
    CHECK(cfg.descent.qf_diag[2] == 0.2e3);
    CHECK(cfg.descent.qf_diag[3] == 4e3);
    CHECK(cfg.descent.qf_diag[4] == 0.0);
    CHECK(cfg.nodes == 150);

    // Serialization is a fixed point once parsed.
    CHECK(serialize_config(cfg) == serialize_config(default_run_config()));
}

TEST_CASE("config parser reports line numbers on malformed input") {
    const std::string bad = "[rocket]\nthrust_max == 5\n";
    try {
        parse_config_text(bad);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("key_without_section = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[rocket\nu_min = 0.2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[rocket]\nu_min = banana\n"), ConfigError);
}

TEST_CASE("config validation rejects out-of-range fields") {
    RunConfig cfg = default_run_config();
    SUBCASE("scenario") {
        cfg.scenario = "problem9";
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("node floor") {
        cfg.nodes = 5;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("path count") {
        cfg.n_paths = 1;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("probability range") {
        cfg.descent.chance_probability = 0.4;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
    SUBCASE("inverted bounds") {
        cfg.rocket.u_min = 0.9;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }
}

TEST_CASE("csv writer round-trips and atomic write leaves no temp files") {
    const fs::path dir = temp_dir("csv");
    CsvTable table;
    table.columns = {"t", "value"};
    table.rows = {{0.0, 1.5}, {0.1, -2.25e-7}, {0.2, 3e18}};
    const std::string text = to_csv(table);
    CHECK(text.rfind(kCsvSchemaLine, 0) == 0);
    atomic_write(dir / "table.csv", text);
    atomic_write(dir / "table.csv", text);  // overwrite path
    const CsvTable back = read_csv(dir / "table.csv");
    REQUIRE(back.columns == table.columns);
    REQUIRE(back.rows.size() == table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        for (std::size_t c = 0; c < table.columns.size(); ++c) {
            CHECK(back.rows[r][c] == table.rows[r][c]);
        }
    }
    int files = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        ++files;
        CHECK(entry.path().extension() != ".tmp");
    }
    CHECK(files == 1);
}

TEST_CASE("control table round-trips a piecewise-constant schedule") {
    std::vector<double> nodes = {0.0, 0.5, 1.0, 1.5};
    std::vector<ControlVector> values;
    for (int i = 0; i < 3; ++i) {
        ControlVector u(2);
        u << 0.1 * i, -0.2 * i;
        values.push_back(u);
    }
    const ControlTrajectory ctrl(nodes, values,
                                 ControlTrajectory::Mode::piecewise_constant);
    const fs::path dir = temp_dir("ctrl");
    atomic_write(dir / "control.csv",
                 to_csv(control_table(ctrl, std::vector<double>(4, 1.0))));
    const ControlTrajectory back =
        control_from_table(read_csv(dir / "control.csv"), 2);
    CHECK(back.interval_count() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK((back.values()[i] - values[i]).norm() == 0.0);
        CHECK(back.nodes()[i] == nodes[i]);
    }
}

TEST_CASE("report schema accepts a well-formed report and flags a broken one") {
    std::ifstream schema_file(std::string(STATLIN_SOURCE_DIR) +
                              "/schemas/report.schema.json");
    REQUIRE(schema_file.good());
    nlohmann::json schema;
    schema_file >> schema;

    nlohmann::json report = {
        {"schema", "statlin-plan-report/1"},
        {"scenario", "problem4"},
        {"seed", 12345},
        {"nodes", 150},
        {"converged", true},
        {"t_f", 25.9},
        {"cost",
         {{"fuel_term", -33787.0},
          {"cov_final", 2.6e7},
          {"cov_running", 5.0e8},
          {"gain_reg", 0.0},
          {"total", 5.3e8}}},
        {"final_std", {27.7, 28.1, 1.0, 1.1}},
        {"solver",
         {{"kkt_residual", 3e-6},
          {"feasibility", 1e-7},
          {"outer_iterations", 11},
          {"inner_iterations", 823},
          {"merit_decreases", {1.0, 0.1}},
          {"message", ""}}}};
    CHECK(validate_against_schema(report, schema).empty());

    nlohmann::json broken = report;
    broken.erase("t_f");
    CHECK_FALSE(validate_against_schema(broken, schema).empty());
    broken = report;
    broken["final_std"] = {1.0, 2.0};
    CHECK_FALSE(validate_against_schema(broken, schema).empty());
    broken = report;
    broken["converged"] = "yes";
    CHECK_FALSE(validate_against_schema(broken, schema).empty());
}

TEST_CASE("cli entry points") {
    const fs::path dir = temp_dir("cli");

    SUBCASE("print-default-config emits a parseable file") {
        const std::string cmd = std::string(STATLIN_CLI_PATH) +
                                " print-default-config > " +
                                (dir / "cfg.ini").string();
        REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
        const RunConfig cfg = parse_config_file((dir / "cfg.ini").string());
        CHECK(cfg.rocket.thrust_max == 1e6);
    }
    SUBCASE("dry run summarizes the transcription") {
        CHECK(run_cli("solve --dry-run") == 0);
    }
    SUBCASE("malformed config exits with code 2") {
        std::ofstream bad(dir / "bad.ini");
        bad << "[solver]\nnodes = -3\n";
        bad.close();
        CHECK(run_cli("solve --dry-run --config " + (dir / "bad.ini").string()) ==
              2);
        std::ofstream worse(dir / "worse.ini");
        worse << "not a config at all\n";
        worse.close();
        CHECK(run_cli("solve --dry-run --config " +
                      (dir / "worse.ini").string()) == 2);
    }
    SUBCASE("missing control artifact is a runtime failure") {
        CHECK(run_cli("simulate --out " + (dir / "none").string()) == 1);
    }
    SUBCASE("probe writes its table deterministically") {
        const fs::path out1 = dir / "probe1";
        const fs::path out2 = dir / "probe2";
        REQUIRE(run_cli("probe --out " + out1.string()) == 0);
        REQUIRE(run_cli("probe --out " + out2.string()) == 0);
        std::ifstream f1(out1 / "probe.csv"), f2(out2 / "probe.csv");
        const std::string s1((std::istreambuf_iterator<char>(f1)),
                             std::istreambuf_iterator<char>());
        const std::string s2((std::istreambuf_iterator<char>(f2)),
                             std::istreambuf_iterator<char>());
        CHECK(s1 == s2);
        CHECK(s1.rfind(kCsvSchemaLine, 0) == 0);
    }
}
