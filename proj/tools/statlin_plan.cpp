// statlin-plan: robust motion planning under stochastic dynamics.
// Subcommands: solve, simulate, check-accessibility, verify-bound, probe,
// print-default-config. Exit codes: 0 ok, 1 numeric failure, 2 config error.

#include "statlin/artifacts.hpp"
#include "statlin/config.hpp"
#include "statlin/error_estimates.hpp"
#include "statlin/examples.hpp"
#include "statlin/accessibility.hpp"
#include "statlin/powered_descent.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <random>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace statlin;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int paths = 0;
    bool paths_set = false;
    double epsilon = 0.0;
    bool epsilon_set = false;
    bool verbose = false;
};

void add_common(CLI::App* cmd, CommonFlags* flags) {
    cmd->add_option("--config", flags->config_path, "Configuration file");
    cmd->add_option("--out", flags->out_dir, "Output directory override");
    cmd->add_option("--seed", flags->seed, "Seed override")
        ->each([flags](const std::string&) { flags->seed_set = true; });
    cmd->add_option("--paths", flags->paths, "Monte Carlo path count override")
        ->each([flags](const std::string&) { flags->paths_set = true; });
    cmd->add_option("--epsilon", flags->epsilon,
                    "Approximation budget for verify-bound")
        ->each([flags](const std::string&) { flags->epsilon_set = true; });
    cmd->add_flag("--verbose", flags->verbose, "Progress output on stderr");
}

RunConfig load_config(const CommonFlags& flags) {
    RunConfig cfg = flags.config_path.empty()
                        ? default_run_config()
                        : parse_config_file(flags.config_path);
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.paths_set) cfg.n_paths = flags.paths;
    if (flags.epsilon_set) cfg.epsilon = flags.epsilon;
    cfg.validate();
    return cfg;
}

DynamicsModel statlin_model_for(const RunConfig& cfg) {
    if (cfg.scenario == "problem4") return polar_thrust_model(cfg.rocket);
    if (cfg.scenario == "problem5") {
        return saturated_feedback_model(cfg.rocket, cfg.descent.eps_sat);
    }
    return feedback_model(cfg.rocket);
}

// Simulation applies the exact saturation on the inputs for every scenario.
DynamicsModel simulation_model_for(const RunConfig& cfg) {
    if (cfg.scenario == "problem4") {
        const RocketParams p = cfg.rocket;
        DynamicsModel m;
        m.state_dim = 5;
        m.control_dim = 2;
        m.drift = [p](const StateVector& x, const ControlVector& c) {
            const double amp = smooth_sat(c[0], p.u_min, p.u_max, 0.0);
            ControlVector u(2);
            u << amp * std::cos(c[1]), amp * std::sin(c[1]);
            return descent_drift(p, x, u);
        };
        m.dispersion = [p](const StateVector& x, const ControlVector&) {
            return descent_dispersion(p, x);
        };
        return m;
    }
    return exact_saturated_feedback_model(cfg.rocket);
}

int control_dim_for(const RunConfig& cfg) {
    return cfg.scenario == "problem4" ? 2 : 10;
}

// Norm of the applied control along the mean trajectory at the node times.
std::vector<double> applied_norms(const RunConfig& cfg,
                                  const std::vector<ControlVector>& controls,
                                  const BeliefTrajectory& belief,
                                  int steps_per_interval) {
    const std::size_t n_nodes = controls.size();
    std::vector<double> norms(n_nodes + 1);
    for (std::size_t i = 0; i <= n_nodes; ++i) {
        const ControlVector& u = controls[std::min(i, n_nodes - 1)];
        const std::size_t grid = std::min(i * steps_per_interval,
                                          belief.size() - 1);
        if (cfg.scenario == "problem4") {
            norms[i] = std::abs(u[0]);
        } else {
            const FeedbackParams nu = FeedbackParams::from_vector(u);
            const Eigen::Vector4d xbar = belief.beliefs[grid].mean.head<4>();
            const double s = nu.rho + nu.gain_norm.dot(xbar);
            norms[i] = cfg.scenario == "problem5"
                           ? std::abs(smooth_sat(s, cfg.rocket.u_min,
                                                 cfg.rocket.u_max,
                                                 cfg.descent.eps_sat))
                           : std::abs(s);
        }
    }
    return norms;
}

json breakdown_json(const CostBreakdown& b) {
    return json{{"fuel_term", b.terminal_mean},
                {"cov_final", b.cov_final},
                {"cov_running", b.cov_running},
                {"gain_reg", b.gain_reg},
                {"total", b.total()}};
}

int run_solve(const RunConfig& cfg, bool dry_run, bool verbose) {
    RobustOCP ocp = cfg.build_problem();
    const TranscribedNLP nlp =
        transcribe(std::move(ocp), cfg.nodes, cfg.steps_per_interval);
    if (dry_run) {
        std::cout << "scenario: " << cfg.scenario << "\n"
                  << "nodes: " << nlp.n_nodes() << "\n"
                  << "decision variables: " << nlp.decision_dim()
                  << (nlp.free_tf() ? " (controls + t_f)" : " (controls)") << "\n"
                  << "equality rows: " << nlp.eq_dim() << "\n"
                  << "inequality rows: " << nlp.ineq_dim() << "\n";
        return 0;
    }
    SolverOptions opts;
    opts.max_outer = cfg.max_outer;
    opts.max_inner = cfg.max_inner;
    opts.tol_kkt = cfg.tol_kkt;
    opts.tol_feas = cfg.tol_feas;
    opts.verbose = verbose;
    const SolveReport rep = solve(nlp, opts);

    const fs::path out(cfg.out_dir);
    json report;
    report["schema"] = "statlin-plan-report/1";
    report["scenario"] = cfg.scenario;
    report["seed"] = cfg.seed;
    report["nodes"] = cfg.nodes;
    report["converged"] = rep.converged;
    report["t_f"] = rep.tf;
    report["cost"] = breakdown_json(rep.breakdown);
    report["solver"] = json{{"kkt_residual", rep.kkt_residual},
                            {"feasibility", rep.feasibility},
                            {"outer_iterations", rep.outer_iterations},
                            {"inner_iterations", rep.inner_iterations},
                            {"merit_decreases", rep.merit_decreases},
                            {"message", rep.message}};

    if (rep.decision.size() > 0) {
        const BeliefTrajectory belief =
            nlp.belief_trajectory(rep.decision, cfg.sim_steps_per_interval);
        const ControlTrajectory ctrl = nlp.control_trajectory(rep.decision);
        const Matrix final_cov = psd_projected(belief.back().cov);
        std::vector<double> final_std(4);
        for (int i = 0; i < 4; ++i) final_std[i] = std::sqrt(final_cov(i, i));
        report["final_std"] = final_std;

        atomic_write(out / "belief_trajectory.csv",
                     to_csv(belief_trajectory_table(belief)));
        atomic_write(out / "control.csv",
                     to_csv(control_table(
                         ctrl, applied_norms(cfg, rep.controls, belief,
                                             cfg.sim_steps_per_interval))));
    } else {
        report["final_std"] = std::vector<double>(4, 0.0);
    }
    atomic_write(out / "report.json", report.dump(2) + "\n");
    std::cout << (rep.converged ? "converged" : "NOT converged") << ", t_f = "
              << rep.tf << " s, cost = " << rep.breakdown.total() << "\n";
    return rep.converged ? 0 : 1;
}

EnsembleStats ensemble_from_table(const CsvTable& table, int sample_count,
                                  std::uint64_t seed) {
    // Column layout: t, m1..mn, upper-triangular P entries.
    const std::size_t cols = table.columns.size();
    int n = 0;
    while (static_cast<std::size_t>(1 + n + n * (n + 1) / 2) < cols) ++n;
    if (static_cast<std::size_t>(1 + n + n * (n + 1) / 2) != cols) {
        throw std::runtime_error("ensemble table: unexpected column count");
    }
    EnsembleStats stats;
    stats.sample_count = sample_count;
    stats.seed = seed;
    for (const auto& row : table.rows) {
        stats.times.push_back(row[0]);
        StateVector m(n);
        for (int i = 0; i < n; ++i) m[i] = row[1 + i];
        stats.mean.push_back(std::move(m));
        Matrix cov(n, n);
        std::size_t k = 1 + n;
        for (int i = 0; i < n; ++i) {
            for (int j = i; j < n; ++j) {
                cov(i, j) = row[k];
                cov(j, i) = row[k];
                ++k;
            }
        }
        stats.cov.push_back(std::move(cov));
    }
    return stats;
}

int run_simulate(const RunConfig& cfg, std::string control_path) {
    const fs::path out(cfg.out_dir);
    if (control_path.empty()) control_path = (out / "control.csv").string();
    if (!fs::exists(control_path)) {
        throw std::runtime_error("missing control artifact: " + control_path);
    }
    const ControlTrajectory ctrl =
        control_from_table(read_csv(control_path), control_dim_for(cfg));
    const DynamicsModel sim_model = simulation_model_for(cfg);
    const DynamicsModel lin_model = statlin_model_for(cfg);
    const GaussianBelief init{cfg.descent.initial_mean, cfg.descent.initial_cov};
    const double dt =
        (ctrl.nodes()[1] - ctrl.nodes()[0]) / cfg.sim_steps_per_interval;

    const EnsembleStats stats =
        monte_carlo(sim_model, init, ctrl, dt, cfg.n_paths, cfg.seed);
    const BeliefTrajectory lin =
        propagate(lin_model, init, ctrl, cfg.sim_steps_per_interval);
    const auto [mean_err, cov_err] = relative_errors(stats, lin);

    const int n_sample = std::min(cfg.n_paths, 50);
    std::vector<std::vector<StateVector>> sample_paths;
    for (int p = 0; p < n_sample; ++p) {
        const StateVector x0 = draw_initial_state(init, cfg.seed, p);
        sample_paths.push_back(simulate_path(sim_model, x0, ctrl, dt, cfg.seed, p));
    }

    CsvTable stats_table = ensemble_stats_table(stats);
    std::string stats_csv = to_csv(stats_table);
    stats_csv.insert(stats_csv.find('\n') + 1,
                     "# sample_count=" + std::to_string(stats.sample_count) +
                         " seed=" + std::to_string(stats.seed) + "\n");
    atomic_write(out / "ensemble_stats.csv", stats_csv);
    atomic_write(out / "relative_errors.csv",
                 to_csv(relative_errors_table(stats.times, mean_err, cov_err)));
    atomic_write(out / "paths_sample.csv",
                 to_csv(paths_sample_table(stats.times, sample_paths)));
    std::cout << "simulated " << cfg.n_paths << " paths on " << stats.times.size()
              << " grid points\n";
    return 0;
}

int run_verify_bound(const RunConfig& cfg, std::string control_path,
                     std::string ensemble_path) {
    const fs::path out(cfg.out_dir);
    if (control_path.empty()) control_path = (out / "control.csv").string();
    if (ensemble_path.empty()) {
        ensemble_path = (out / "ensemble_stats.csv").string();
    }
    const ControlTrajectory ctrl =
        control_from_table(read_csv(control_path), control_dim_for(cfg));
    const DynamicsModel lin_model = statlin_model_for(cfg);
    const GaussianBelief init{cfg.descent.initial_mean, cfg.descent.initial_cov};
    const BeliefTrajectory lin =
        propagate(lin_model, init, ctrl, cfg.sim_steps_per_interval);
    const EnsembleStats stats =
        ensemble_from_table(read_csv(ensemble_path), cfg.n_paths, cfg.seed);

    const auto phi = empirical_phi(lin_model, lin, ctrl);
    const double lip =
        std::max(empirical_jacobian_lipschitz(lin_model, lin, ctrl), 1e-12);
    const ErrorBudget budget = make_error_budget(cfg.epsilon, phi, lip);
    const double lhs = constraint_lhs(budget, ctrl, lin);
    const MembershipResult member = check_membership(budget, ctrl, lin);
    const auto [sup_mean_sq, sup_cov] = empirical_error(lin, stats);
    const double simplified = bounded_control_bound(lin, ctrl, -1.0, &budget);

    json report;
    report["schema"] = "statlin-plan-bound/1";
    report["scenario"] = cfg.scenario;
    report["epsilon"] = cfg.epsilon;
    report["constraint_lhs"] = lhs;
    report["member"] = member.inside;
    report["sup_mean_err_sq"] = sup_mean_sq;
    report["sup_cov_err"] = sup_cov;
    report["phi_sup"] = phi(0.0);
    report["alpha_constant"] = lip;
    report["simplified_bound"] = simplified;
    report["sample_count"] = stats.sample_count;
    atomic_write(out / "bound_report.json", report.dump(2) + "\n");
    std::cout << "constraint_lhs = " << lhs << ", empirical = "
              << sup_mean_sq + sup_cov << ", "
              << (member.inside ? "in" : "out") << " U(epsilon)\n";
    return 0;
}

int run_check_accessibility(const RunConfig& cfg) {
    const fs::path out(cfg.out_dir);
    const DynamicsModel open_loop = open_loop_model(cfg.rocket);
    const DynamicsModel feedback = feedback_model(cfg.rocket);

    // The four controls of the plain accessibility argument.
    std::vector<ControlVector> remark_controls;
    auto push2 = [&remark_controls](double a, double b) {
        ControlVector u(2);
        u << a, b;
        remark_controls.push_back(u);
    };
    push2(0.0, 0.0);
    push2(0.0, 1.0);
    push2(1.0, 0.0);
    push2(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0));

    std::mt19937_64 gen(cfg.seed);
    auto sample_point = [&gen]() {
        std::uniform_real_distribution<double> pos(-2000.0, 4000.0);
        std::uniform_real_distribution<double> vel(-250.0, 250.0);
        std::uniform_real_distribution<double> mass(20000.0, 40000.0);
        StateVector x(5);
        x << pos(gen), pos(gen), vel(gen), vel(gen), mass(gen);
        return x;
    };

    const std::vector<ControlVector> nu_samples =
        feedback_gain_samples(cfg.acc_fb_samples, cfg.seed ^ 0x5bd1e995u);

    CsvTable table;
    table.columns = {"family",      "point", "y",  "z",          "vy",
                     "vz",          "mu",    "plain_rank", "lifted_rank",
                     "target_dim"};
    int open_max = 0;
    int fb_min = 1000;
    for (int i = 0; i < cfg.acc_points; ++i) {
        const StateVector x = sample_point();
        const SpanReport rep =
            lifted_rank(open_loop, x, remark_controls, cfg.acc_depth,
                        cfg.acc_tol_sv);
        const int plain = plain_rank(open_loop, x, remark_controls,
                                     cfg.acc_depth, cfg.acc_tol_sv);
        open_max = std::max(open_max, rep.lifted_dim);
        table.rows.push_back({0.0, static_cast<double>(i), x[0], x[1], x[2],
                              x[3], x[4], static_cast<double>(plain),
                              static_cast<double>(rep.lifted_dim),
                              static_cast<double>(rep.target_dim)});
    }
    for (int i = 0; i < cfg.acc_fb_points; ++i) {
        const StateVector x = sample_point();
        const SpanReport rep = lifted_rank(feedback, x, nu_samples,
                                           cfg.acc_fb_depth, cfg.acc_tol_sv);
        fb_min = std::min(fb_min, rep.lifted_dim);
        table.rows.push_back({1.0, static_cast<double>(i), x[0], x[1], x[2],
                              x[3], x[4], -1.0,
                              static_cast<double>(rep.lifted_dim),
                              static_cast<double>(rep.target_dim)});
    }
    atomic_write(out / "rank_table.csv", to_csv(table));
    std::cout << "open-loop lifted rank max = " << open_max
              << " (condition needs 20; below it everywhere)\n"
              << "feedback lifted rank min = " << fb_min
              << (fb_min >= 20 ? " (condition met at all sampled points)"
                               : " (inconclusive at some points)")
              << "\n";
    return 0;
}

int run_probe(const RunConfig& cfg) {
    const fs::path out(cfg.out_dir);
    const DynamicsModel model = brockett_integrator(cfg.probe_noise);
    const ControlTrajectory base = brockett_loop_control();
    const StateVector m0 = StateVector::Zero(3);
    const StateVector mf = brockett_loop_target();
    Matrix p0 = Matrix::Zero(3, 3);
    for (int i = 0; i < 3; ++i) p0(i, i) = cfg.probe_p0_diag[i];
    const ErrorBudget budget = make_error_budget(
        cfg.epsilon, [](double r) { return r; }, 1.0);

    std::vector<double> etas = cfg.eta_list;
    const std::vector<ProbeRow> rows =
        controllability_probe(model, m0, mf, base, etas, p0, budget, 50);

    CsvTable table;
    table.columns = {"eta", "constraint_value", "terminal_error"};
    for (const auto& r : rows) {
        table.rows.push_back({r.eta, r.constraint_value, r.terminal_error});
    }
    atomic_write(out / "probe.csv", to_csv(table));
    for (const auto& r : rows) {
        std::cout << "eta = " << r.eta << ": constraint = " << r.constraint_value
                  << ", terminal error = " << r.terminal_error << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"statlin-plan: robust motion planning via statistical "
                 "linearization"};
    app.require_subcommand(1);

    CommonFlags flags;
    bool dry_run = false;
    std::string control_path;
    std::string ensemble_path;

    CLI::App* solve_cmd =
        app.add_subcommand("solve", "Solve the configured planning problem");
    add_common(solve_cmd, &flags);
    solve_cmd->add_flag("--dry-run", dry_run, "Print the transcription summary");

    CLI::App* sim_cmd = app.add_subcommand(
        "simulate", "Monte Carlo simulation of a solved control");
    add_common(sim_cmd, &flags);
    sim_cmd->add_option("--control", control_path, "Path to control.csv");

    CLI::App* acc_cmd = app.add_subcommand("check-accessibility",
                                           "Lifted rank tests for both families");
    add_common(acc_cmd, &flags);

    CLI::App* bound_cmd = app.add_subcommand(
        "verify-bound", "Approximation-error bound report from artifacts");
    add_common(bound_cmd, &flags);
    bound_cmd->add_option("--control", control_path, "Path to control.csv");
    bound_cmd->add_option("--ensemble", ensemble_path,
                          "Path to ensemble_stats.csv");

    CLI::App* probe_cmd = app.add_subcommand(
        "probe", "Time-rescaling controllability probe (Brockett integrator)");
    add_common(probe_cmd, &flags);

    CLI::App* print_cmd = app.add_subcommand(
        "print-default-config", "Emit the reference scenario configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (print_cmd->parsed()) {
            std::cout << serialize_config(default_run_config());
            return 0;
        }
        const RunConfig cfg = load_config(flags);
        if (solve_cmd->parsed()) return run_solve(cfg, dry_run, flags.verbose);
        if (sim_cmd->parsed()) return run_simulate(cfg, control_path);
        if (acc_cmd->parsed()) return run_check_accessibility(cfg);
        if (bound_cmd->parsed()) {
            return run_verify_bound(cfg, control_path, ensemble_path);
        }
        if (probe_cmd->parsed()) return run_probe(cfg);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
