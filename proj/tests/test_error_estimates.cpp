#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "statlin/error_estimates.hpp"
#include "statlin/examples.hpp"
#include "support/oracles.hpp"

using namespace statlin;

namespace {

// Synthetic trajectory with constant covariance norm p on [0, tf].
BeliefTrajectory constant_norm_traj(double p, double tf, int points) {
    BeliefTrajectory traj;
    Matrix cov(1, 1);
    cov << p;
    for (int k = 0; k <= points; ++k) {
        traj.times.push_back(tf * k / points);
        traj.beliefs.push_back({StateVector::Zero(1), cov});
    }
    return traj;
}

ControlTrajectory unit_norm_control(double tf) {
    std::vector<double> nodes = {0.0, tf};
    ControlVector u(1);
    u << 1.0;
    return ControlTrajectory(nodes, {u},
                             ControlTrajectory::Mode::piecewise_constant);
}

}  // namespace

TEST_CASE("constraint vanishes for zero covariance") {
    const ErrorBudget budget =
        make_error_budget(1e-9, [](double r) { return r; }, 1.0);
    const BeliefTrajectory traj = constant_norm_traj(0.0, 2.0, 8);
    const ControlTrajectory ctrl = unit_norm_control(2.0);
    CHECK(constraint_lhs(budget, ctrl, traj) == doctest::Approx(0.0));
    CHECK(check_membership(budget, ctrl, traj).inside);
}

TEST_CASE("closed-form constant case") {
    // phi(r) = r, ||u|| = 1, ||P|| = p, alpha(s) = e^s (unit constant):
    // lhs = e^{tf} * p * tf.
    const double tf = 1.5, p = 0.7;
    const ErrorBudget budget =
        make_error_budget(1.0, [](double r) { return r; }, 1.0);
    const BeliefTrajectory traj = constant_norm_traj(p, tf, 64);
    const ControlTrajectory ctrl = unit_norm_control(tf);
    CHECK(constraint_lhs(budget, ctrl, traj) ==
          doctest::Approx(std::exp(tf) * p * tf).epsilon(1e-12));
}

TEST_CASE("membership verdicts") {
    SUBCASE("value two against epsilon one is out") {
        // Pick p so that e^{tf} p tf = 2 at tf = 1.
        const double tf = 1.0;
        const double p = 2.0 / std::exp(1.0);
        const ErrorBudget budget =
            make_error_budget(1.0, [](double r) { return r; }, 1.0);
        const BeliefTrajectory traj = constant_norm_traj(p, tf, 64);
        const ControlTrajectory ctrl = unit_norm_control(tf);
        const MembershipResult r = check_membership(budget, ctrl, traj);
        CHECK_FALSE(r.inside);
        CHECK(r.value == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("infinite epsilon always admits") {
        ErrorBudget budget = make_error_budget(
            std::numeric_limits<double>::infinity(), [](double r) { return r; },
            1.0);
        const BeliefTrajectory traj = constant_norm_traj(100.0, 1.0, 8);
        const ControlTrajectory ctrl = unit_norm_control(1.0);
        CHECK(check_membership(budget, ctrl, traj).inside);
    }
}

TEST_CASE("empirical error") {
    SUBCASE("zero against itself") {
        const BeliefTrajectory traj = constant_norm_traj(0.5, 1.0, 4);
        EnsembleStats stats;
        stats.times = traj.times;
        stats.sample_count = 2;
        for (const auto& b : traj.beliefs) {
            stats.mean.push_back(b.mean);
            stats.cov.push_back(b.cov);
        }
        const auto [m2, c] = empirical_error(traj, stats);
        CHECK(m2 == 0.0);
        CHECK(c == 0.0);
    }
    SUBCASE("linear system stays within Monte Carlo noise") {
        const Matrix a = oracles::double_integrator_a();
        const Matrix b = oracles::double_integrator_b();
        Matrix g(4, 1);
        g << 0, 0, 0.3, 0.3;
        const DynamicsModel m = oracles::linear_model(a, b, g);
        StateVector x0(4);
        x0 << 0.5, 0.5, 0.0, 0.0;
        Matrix p0 = Matrix::Zero(4, 4);
        p0.diagonal().setConstant(0.01);
        const GaussianBelief init{x0, p0};
        std::vector<double> nodes = {0.0, 1.0};
        ControlVector u(2);
        u << 0.1, -0.1;
        const ControlTrajectory ctrl(nodes, {u},
                                     ControlTrajectory::Mode::piecewise_constant);
        const int n = 20000;
        const EnsembleStats stats = monte_carlo(m, init, ctrl, 0.01, n, 4);
        const BeliefTrajectory lin = propagate(m, init, ctrl, 100);
        const auto [m2, c] = empirical_error(lin, stats);
        const Matrix p_exact = oracles::nilpotent_cov(a, g, p0, 1.0);
        CHECK(m2 <= std::pow(3.0 * std::sqrt(p_exact.trace() / n), 2));
        CHECK(c <= 3.0 * p_exact.norm() * std::sqrt(2.0 / (n - 1)));
    }
}

TEST_CASE("simplified bounded-control estimate") {
    const double tf = 2.0, p = 0.3;
    const BeliefTrajectory traj = constant_norm_traj(p, tf, 32);
    const ControlTrajectory ctrl = unit_norm_control(tf);
    SUBCASE("zero covariance gives zero") {
        CHECK(bounded_control_bound(constant_norm_traj(0.0, tf, 32), ctrl, 1.0) ==
              doctest::Approx(0.0));
    }
    SUBCASE("constant case") {
        CHECK(bounded_control_bound(traj, ctrl, 1.0) ==
              doctest::Approx(p * tf).epsilon(1e-12));
    }
    SUBCASE("coincides with the constraint for constant phi") {
        const double c_phi = 0.8;
        const ErrorBudget budget =
            make_error_budget(1.0, [c_phi](double) { return c_phi; }, 1.0);
        const double lhs = constraint_lhs(budget, ctrl, traj);
        const double est = bounded_control_bound(traj, ctrl, -1.0, &budget);
        CHECK(lhs == doctest::Approx(est).epsilon(1e-12));
    }
}

TEST_CASE("constraint is monotone in covariance and phi scalings") {
    const double tf = 1.0;
    const ControlTrajectory ctrl = unit_norm_control(tf);
    const ErrorBudget budget =
        make_error_budget(1.0, [](double r) { return r; }, 1.0);
    double prev = 0.0;
    for (double p : {0.1, 0.2, 0.5, 1.0}) {
        const double v = constraint_lhs(budget, ctrl, constant_norm_traj(p, tf, 16));
        CHECK(v >= prev);
        prev = v;
    }
    prev = 0.0;
    for (double scale : {0.5, 1.0, 2.0, 4.0}) {
        const ErrorBudget b =
            make_error_budget(1.0, [scale](double r) { return scale * r; }, 1.0);
        const double v =
            constraint_lhs(b, ctrl, constant_norm_traj(0.3, tf, 16));
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("empirical phi dominates the Jacobian norm along the trajectory") {
    const DynamicsModel m = oracles::ou_model(2.0, 1.0);
    std::vector<double> nodes = {0.0, 1.0};
    const ControlTrajectory ctrl(nodes, {ControlVector::Zero(1)},
                                 ControlTrajectory::Mode::piecewise_constant);
    StateVector x0(1);
    x0 << 1.0;
    const BeliefTrajectory traj =
        propagate(m, {x0, Matrix::Zero(1, 1)}, ctrl, 20);
    const auto phi = empirical_phi(m, traj, ctrl);
    CHECK(phi(0.0) == doctest::Approx(2.0));  // |D_x f| = a everywhere
    // Linear drift: the Jacobian Lipschitz envelope is zero.
    CHECK(empirical_jacobian_lipschitz(m, traj, ctrl) ==
          doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("rescaling probe on the Brockett integrator") {
    const DynamicsModel model = brockett_integrator(0.1);
    const ControlTrajectory base = brockett_loop_control();
    const StateVector m0 = StateVector::Zero(3);
    const StateVector mf = brockett_loop_target();
    const ErrorBudget budget =
        make_error_budget(1.0, [](double r) { return r; }, 1.0);

    SUBCASE("slope one in eta and invariant terminal error") {
        const std::vector<double> etas = {0.4, 0.2, 0.1, 0.05};
        const auto rows = controllability_probe(model, m0, mf, base, etas,
                                                Matrix::Zero(3, 3), budget, 50);
        REQUIRE(rows.size() == 4);
        for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
            const double ratio = rows[i].constraint_value /
                                 rows[i + 1].constraint_value;
            // Halving eta should halve the constraint: slope 1 +- 0.2 means
            // the ratio lies in [2^0.8, 2^1.2].
            CHECK(ratio >= std::pow(2.0, 0.8));
            CHECK(ratio <= std::pow(2.0, 1.2));
        }
        for (const auto& r : rows) {
            CHECK(r.terminal_error <= 1e-6);
            CHECK(std::abs(r.terminal_error - rows[0].terminal_error) <= 1e-6);
        }
    }
    SUBCASE("nonzero initial covariance floors the constraint") {
        const std::vector<double> etas = {0.4, 0.05};
        const Matrix p0 = 0.5 * Matrix::Identity(3, 3);
        const auto with_p0 =
            controllability_probe(model, m0, mf, base, etas, p0, budget, 50);
        const auto without =
            controllability_probe(model, m0, mf, base, etas,
                                  Matrix::Zero(3, 3), budget, 50);
        CHECK(with_p0[1].constraint_value > without[1].constraint_value);
        // With P0 = 0 the small-eta constraint keeps shrinking toward zero.
        CHECK(without[1].constraint_value < 0.2 * without[0].constraint_value);
    }
    SUBCASE("eta outside (0, t_f] is rejected") {
        CHECK_THROWS_AS(controllability_probe(model, m0, mf, base, {0.0},
                                              Matrix::Zero(3, 3), budget),
                        std::invalid_argument);
        CHECK_THROWS_AS(controllability_probe(model, m0, mf, base, {1.5},
                                              Matrix::Zero(3, 3), budget),
                        std::invalid_argument);
    }
}
