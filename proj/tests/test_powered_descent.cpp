#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "statlin/powered_descent.hpp"
#include "statlin/propagate.hpp"
#include "statlin/sde.hpp"

#include <numbers>
#include <random>

using namespace statlin;

namespace {

ControlTrajectory constant_control(const ControlVector& u, double tf,
                                   int intervals = 1) {
    std::vector<double> nodes(intervals + 1);
    for (int i = 0; i <= intervals; ++i) nodes[i] = tf * i / intervals;
    return ControlTrajectory(std::move(nodes),
                             std::vector<ControlVector>(intervals, u),
                             ControlTrajectory::Mode::piecewise_constant);
}

}  // namespace

TEST_CASE("descent drift") {
    const RocketParams p = reference_rocket();
    StateVector x(5);
    x << 0, 0, 0, 0, 40000;

    SUBCASE("reference thrust values") {
        ControlVector u(2);
        u << 0, 0.8;
        const StateVector f = descent_drift(p, x, u);
        CHECK(f[3] == doctest::Approx(10.19));
        CHECK(f[4] == doctest::Approx(-240.0));
    }
    SUBCASE("free fall with thrust off") {
        const StateVector f = descent_drift(p, x, ControlVector::Zero(2));
        CHECK(f[0] == 0.0);
        CHECK(f[1] == 0.0);
        CHECK(f[2] == 0.0);
        CHECK(f[3] == doctest::Approx(-9.81));
        CHECK(f[4] == 0.0);
    }
    SUBCASE("mass flow follows the Euclidean norm") {
        ControlVector u(2);
        u << 0.3, 0.4;
        CHECK(descent_drift(p, x, u)[4] == doctest::Approx(-300.0 * 0.5));
    }
    SUBCASE("nonpositive mass is rejected") {
        StateVector bad = x;
        bad[4] = 0.0;
        CHECK_THROWS_AS(descent_drift(p, bad, ControlVector::Zero(2)),
                        std::domain_error);
        bad[4] = -5.0;
        CHECK_THROWS_AS(descent_drift(p, bad, ControlVector::Zero(2)),
                        std::domain_error);
    }
}

TEST_CASE("feedback law") {
    SUBCASE("zero gains reduce to the constant control") {
        FeedbackParams nu;
        nu.rho = 0.7;
        nu.theta = 0.3;
        const ControlVector u = feedback_law(nu, Eigen::Vector4d::Zero());
        CHECK(u[0] == doctest::Approx(0.7 * std::cos(0.3)));
        CHECK(u[1] == doctest::Approx(0.7 * std::sin(0.3)));
    }
    SUBCASE("direction gain rotates the thrust") {
        FeedbackParams nu;
        nu.rho = 1.0;
        nu.theta = 0.0;
        nu.gain_dir << std::numbers::pi / 2.0, 0, 0, 0;
        Eigen::Vector4d xbar(1.0, 0.0, 0.0, 0.0);
        const ControlVector u = feedback_law(nu, xbar);
        CHECK(u[0] == doctest::Approx(0.0));
        CHECK(u[1] == doctest::Approx(1.0));
    }
    SUBCASE("norm depends only on the norm channel") {
        std::mt19937_64 gen(3);
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        for (int rep = 0; rep < 50; ++rep) {
            FeedbackParams nu;
            nu.rho = unit(gen);
            nu.theta = 3.0 * unit(gen);
            for (int i = 0; i < 4; ++i) {
                nu.gain_norm[i] = 0.01 * unit(gen);
                nu.gain_dir[i] = 0.01 * unit(gen);
            }
            Eigen::Vector4d xbar(100 * unit(gen), 100 * unit(gen),
                                 10 * unit(gen), 10 * unit(gen));
            const double expected = std::abs(nu.rho + nu.gain_norm.dot(xbar));
            CHECK(feedback_law(nu, xbar).norm() ==
                  doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("smooth saturation") {
    SUBCASE("exact saturation branches") {
        CHECK(smooth_sat(0.5, 0.2, 0.8, 0.0) == doctest::Approx(0.5));
        CHECK(smooth_sat(-1.0, 0.2, 0.8, 0.0) == doctest::Approx(0.2));
        CHECK(smooth_sat(2.0, 0.2, 0.8, 0.0) == doctest::Approx(0.8));
    }
    SUBCASE("midpoint is a fixed point for every smoothing") {
        CHECK(smooth_sat(0.5, 0.2, 0.8, 0.02) == doctest::Approx(0.5));
        CHECK(smooth_sat(0.5, 0.2, 0.8, 0.2) == doctest::Approx(0.5));
    }
    SUBCASE("formula value at the upper knee") {
        // (b+a)/2 + (sqrt(0.36 + eps^2) - eps)/2 at s = b.
        const double expected =
            0.5 + (std::sqrt(0.36 + 0.0004) - 0.02) / 2.0;
        CHECK(smooth_sat(0.8, 0.2, 0.8, 0.02) ==
              doctest::Approx(expected).epsilon(1e-12));
        CHECK(expected == doctest::Approx(0.7901666).epsilon(1e-6));
    }
    SUBCASE("a >= b is rejected") {
        CHECK_THROWS_AS(smooth_sat(0.0, 0.8, 0.2, 0.1), std::invalid_argument);
    }
    SUBCASE("range bound a - eps <= sat <= b + eps") {
        std::mt19937_64 gen(9);
        std::uniform_real_distribution<double> wide(-50.0, 50.0);
        for (double eps : {0.0, 0.02, 0.2}) {
            for (int rep = 0; rep < 200; ++rep) {
                const double v = smooth_sat(wide(gen), 0.2, 0.8, eps);
                CHECK(v >= 0.2 - eps - 1e-12);
                CHECK(v <= 0.8 + eps + 1e-12);
            }
        }
    }
    SUBCASE("pointwise convergence to the exact saturation") {
        double sup_prev = std::numeric_limits<double>::infinity();
        for (double eps : {0.2, 0.1, 0.01}) {
            double sup = 0.0;
            for (double s = -1.0; s <= 2.0; s += 0.001) {
                sup = std::max(sup, std::abs(smooth_sat(s, 0.2, 0.8, eps) -
                                             smooth_sat(s, 0.2, 0.8, 0.0)));
            }
            CHECK(sup < sup_prev);
            sup_prev = sup;
        }
        CHECK(sup_prev <= 0.01);  // eps = 0.01 stays within eps of exact
    }
    SUBCASE("derivative matches finite differences") {
        for (double eps : {0.02, 0.1}) {
            for (double s = -0.5; s <= 1.5; s += 0.1) {
                const double fd = (smooth_sat(s + 1e-6, 0.2, 0.8, eps) -
                                   smooth_sat(s - 1e-6, 0.2, 0.8, eps)) /
                                  2e-6;
                CHECK(smooth_sat_derivative(s, 0.2, 0.8, eps) ==
                      doctest::Approx(fd).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("saturated feedback drift") {
    const RocketParams p = reference_rocket();
    StateVector x(5);
    x << 100, 2000, -30, -80, 35000;

    SUBCASE("inactive saturation matches the plain drift at the midpoint") {
        FeedbackParams nu;
        nu.rho = 0.5;  // midpoint of [0.2, 0.8]: smooth_sat is exact there
        nu.theta = 1.0;
        ControlVector u(2);
        u << 0.5 * std::cos(1.0), 0.5 * std::sin(1.0);
        const StateVector fs = saturated_feedback_drift(p, nu, 0.02, x);
        const StateVector fd = descent_drift(p, x, u);
        CHECK((fs - fd).norm() <= 1e-12 * fd.norm());
    }
    SUBCASE("norm channel clamps above the band") {
        FeedbackParams nu;
        nu.rho = 2.0;
        nu.theta = 0.5;
        const StateVector f = saturated_feedback_drift(p, nu, 0.0, x);
        ControlVector u(2);
        u << 0.8 * std::cos(0.5), 0.8 * std::sin(0.5);
        CHECK((f - descent_drift(p, x, u)).norm() <= 1e-12);
    }
}

TEST_CASE("mass is monotone along propagated and simulated trajectories") {
    const RocketParams p = reference_rocket();
    const DescentScenario s = DescentScenario::reference();
    ControlVector u(2);
    u << 0.4, 0.6;
    const ControlTrajectory ctrl = constant_control(u, 10.0, 10);

    const BeliefTrajectory traj = propagate(
        open_loop_model(p), {s.initial_mean, s.initial_cov}, ctrl, 5);
    for (std::size_t k = 1; k < traj.size(); ++k) {
        CHECK(traj.beliefs[k].mean[4] <= traj.beliefs[k - 1].mean[4] + 1e-9);
    }

    const auto path = simulate_path(open_loop_model(p), s.initial_mean, ctrl,
                                    0.1, 77);
    for (std::size_t k = 1; k < path.size(); ++k) {
        CHECK(path[k][4] <= path[k - 1][4] + 1e-9);
    }
}

TEST_CASE("problem builders") {
    const RocketParams p = reference_rocket();
    const DescentScenario s = DescentScenario::reference();

    SUBCASE("problem 4 has no feedback decision variables") {
        const RobustOCP ocp = build_problem4(p, s);
        CHECK(ocp.model.control_dim == 2);
        CHECK(ocp.parametrization == ControlParametrization::polar_thrust);
        CHECK(ocp.chance_constraints.empty());
        CHECK(ocp.norm_bounds.has_value());
        CHECK(ocp.norm_bounds->first == doctest::Approx(0.2));
        CHECK(ocp.norm_bounds->second == doctest::Approx(0.8));
    }
    SUBCASE("problem 6 carries the chance margin multiplier") {
        const RobustOCP ocp = build_problem6(p, s);
        REQUIRE(ocp.chance_constraints.size() == 2);
        for (const auto& spec : ocp.chance_constraints) {
            CHECK(inverse_normal_cdf(spec.probability) ==
                  doctest::Approx(2.3263).epsilon(1e-4));
        }
        CHECK(ocp.model.control_dim == 10);
    }
    SUBCASE("problems 5 and 6 with zero gains reproduce problem 4's objective") {
        // rho at the band midpoint keeps the smooth saturation exact, and
        // zero gains keep its slope out of the Jacobian.
        const int nodes = 12;
        const TranscribedNLP nlp4 = transcribe(build_problem4(p, s), nodes);
        const TranscribedNLP nlp5 = transcribe(build_problem5(p, s), nodes);
        const TranscribedNLP nlp6 = transcribe(build_problem6(p, s), nodes);
        const double theta = 0.5 * std::numbers::pi;
        const double tf = 30.0;
        ControlVector u4(2);
        u4 << 0.5, theta;
        ControlVector nu(10);
        nu.setZero();
        nu[0] = 0.5;
        nu[1] = theta;
        const auto [v4, b4] = evaluate_objective(
            nlp4, nlp4.pack(std::vector<ControlVector>(nodes, u4), tf));
        const auto [v5, b5] = evaluate_objective(
            nlp5, nlp5.pack(std::vector<ControlVector>(nodes, nu), tf));
        const auto [v6, b6] = evaluate_objective(
            nlp6, nlp6.pack(std::vector<ControlVector>(nodes, nu), tf));
        CHECK(v5 == doctest::Approx(v4).epsilon(1e-10));
        CHECK(v6 == doctest::Approx(v4).epsilon(1e-10));
        CHECK(b5.gain_reg == 0.0);
        CHECK(b6.gain_reg == 0.0);
    }
}

TEST_CASE("dispersion modes") {
    RocketParams p = reference_rocket();
    StateVector x(5);
    x << 0, 0, 0, 0, 20000.0;  // current mass differs from the reference mass
    SUBCASE("constant vector divides by the reference mass") {
        p.dispersion_mode = DispersionMode::constant_vector;
        const Matrix g = descent_dispersion(p, x);
        CHECK(g(2, 0) == doctest::Approx(100.0 / 40000.0));
        CHECK(g(3, 0) == doctest::Approx(10.0 / 40000.0));
    }
    SUBCASE("mass-scaled divides by the current mass") {
        p.dispersion_mode = DispersionMode::mass_scaled;
        const Matrix g = descent_dispersion(p, x);
        CHECK(g(2, 0) == doctest::Approx(100.0 / 20000.0));
        CHECK(g(3, 0) == doctest::Approx(10.0 / 20000.0));
    }
}

TEST_CASE("exact saturated model keeps the applied norm inside the band") {
    const RocketParams p = reference_rocket();
    const DynamicsModel sim = exact_saturated_feedback_model(p);
    std::mt19937_64 gen(41);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    StateVector x(5);
    x << 500, 3000, -50, -150, 38000;
    for (int rep = 0; rep < 100; ++rep) {
        ControlVector nu(10);
        nu[0] = 1.5 * unit(gen);
        nu[1] = 3.0 * unit(gen);
        for (int i = 2; i < 10; ++i) nu[i] = 1e-3 * unit(gen);
        const StateVector f = sim.drift(x, nu);
        // Mass flow reveals the applied norm: mu_dot = -q ||u||.
        const double norm = -f[4] / p.mass_flow;
        CHECK(norm >= p.u_min - 1e-12);
        CHECK(norm <= p.u_max + 1e-12);
    }
}
