#ifndef STATLIN_CONFIG_HPP
#define STATLIN_CONFIG_HPP

#include "statlin/powered_descent.hpp"

#include <cstdint>
#include <string>

namespace statlin {

/// Raised on malformed configuration input; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RunConfig {
    std::string scenario = "problem4";  // problem4 | problem5 | problem6

    RocketParams rocket;
    DescentScenario descent;

    // solver
    int nodes = 150;
    int steps_per_interval = 1;
    int max_outer = 40;
    int max_inner = 300;
    double tol_kkt = 1e-5;
    double tol_feas = 1e-6;
    std::uint64_t seed = 12345;

    // simulation
    int n_paths = 1000;
    int sim_steps_per_interval = 10;

    // bound verification
    double epsilon = std::numeric_limits<double>::infinity();

    // controllability probe (Brockett integrator)
    std::vector<double> eta_list = {0.4, 0.2, 0.1, 0.05};
    double probe_noise = 0.1;
    std::vector<double> probe_p0_diag = {0.0, 0.0, 0.0};

    // accessibility ranks
    int acc_points = 20;
    int acc_depth = 4;
    int acc_fb_points = 10;
    int acc_fb_depth = 2;
    int acc_fb_samples = 30;
    double acc_tol_sv = 1e-6;

    std::string out_dir = "out";

    void validate() const;
    RobustOCP build_problem() const;
};

RunConfig default_run_config();
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace statlin

#endif
