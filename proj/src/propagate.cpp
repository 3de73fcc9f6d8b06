#include "statlin/propagate.hpp"

#include <cmath>

namespace statlin {

namespace {

struct MomentDerivative {
    StateVector dm;
    Matrix dP;
};

MomentDerivative moment_rhs(const DynamicsModel& model, const StateVector& m,
                            const Matrix& P, const ControlVector& u) {
    MomentDerivative d;
    d.dm = model.drift(m, u);
    const Matrix A = model.jacobian ? model.jacobian(m, u)
                                    : eval_jacobian_fd(model, m, u);
    const Matrix G = model.dispersion(m, u);
    d.dP.noalias() = A * P;
    d.dP.noalias() += P * A.transpose();
    d.dP.noalias() += G * G.transpose();
    return d;
}

}  // namespace

void rk4_moment_step(const DynamicsModel& model, double h,
                     const ControlVector& u, StateVector& m, Matrix& P) {
    const MomentDerivative k1 = moment_rhs(model, m, P, u);
    StateVector ms = m + (0.5 * h) * k1.dm;
    Matrix Ps = P + (0.5 * h) * k1.dP;
    const MomentDerivative k2 = moment_rhs(model, ms, Ps, u);
    ms = m + (0.5 * h) * k2.dm;
    Ps = P + (0.5 * h) * k2.dP;
    const MomentDerivative k3 = moment_rhs(model, ms, Ps, u);
    ms = m + h * k3.dm;
    Ps = P + h * k3.dP;
    const MomentDerivative k4 = moment_rhs(model, ms, Ps, u);
    m += (h / 6.0) * (k1.dm + 2.0 * k2.dm + 2.0 * k3.dm + k4.dm);
    P += (h / 6.0) * (k1.dP + 2.0 * k2.dP + 2.0 * k3.dP + k4.dP);
    P = symmetrized(P);
}

BeliefTrajectory propagate_from_node(const DynamicsModel& model,
                                     const GaussianBelief& at_node,
                                     std::size_t start_interval,
                                     const ControlTrajectory& ctrl,
                                     int steps_per_interval, bool check_psd) {
    if (steps_per_interval < 1) {
        throw std::invalid_argument("propagate: steps_per_interval must be >= 1");
    }
    detail::require_dim(at_node.mean.size(), model.state_dim, "propagate init");
    if (start_interval >= ctrl.interval_count()) {
        throw std::out_of_range("propagate: start interval out of range");
    }
    detail::require_dim(ctrl.dim(), model.control_dim, "propagate control");

    const std::size_t n_intervals = ctrl.interval_count() - start_interval;
    BeliefTrajectory traj;
    traj.times.reserve(n_intervals * steps_per_interval + 1);
    traj.beliefs.reserve(n_intervals * steps_per_interval + 1);

    StateVector m = at_node.mean;
    Matrix P = symmetrized(at_node.cov);
    traj.times.push_back(ctrl.nodes()[start_interval]);
    traj.beliefs.push_back({m, P});

    StateVector m_stage(model.state_dim);
    Matrix P_stage(model.state_dim, model.state_dim);

    for (std::size_t i = start_interval; i < ctrl.interval_count(); ++i) {
        const double t0 = ctrl.nodes()[i];
        const double t1 = ctrl.nodes()[i + 1];
        const double h = (t1 - t0) / steps_per_interval;
        for (int s = 0; s < steps_per_interval; ++s) {
            const double t = t0 + s * h;
            const ControlVector u0 = ctrl.eval_in_interval(i, t);
            const ControlVector uh = ctrl.eval_in_interval(i, t + 0.5 * h);
            const ControlVector u1 = ctrl.eval_in_interval(i, t + h);

            const MomentDerivative k1 = moment_rhs(model, m, P, u0);
            m_stage = m + (0.5 * h) * k1.dm;
            P_stage = P + (0.5 * h) * k1.dP;
            const MomentDerivative k2 = moment_rhs(model, m_stage, P_stage, uh);
            m_stage = m + (0.5 * h) * k2.dm;
            P_stage = P + (0.5 * h) * k2.dP;
            const MomentDerivative k3 = moment_rhs(model, m_stage, P_stage, uh);
            m_stage = m + h * k3.dm;
            P_stage = P + h * k3.dP;
            const MomentDerivative k4 = moment_rhs(model, m_stage, P_stage, u1);

            m += (h / 6.0) * (k1.dm + 2.0 * k2.dm + 2.0 * k3.dm + k4.dm);
            P += (h / 6.0) * (k1.dP + 2.0 * k2.dP + 2.0 * k3.dP + k4.dP);
            P = symmetrized(P);

            const double t_next = (s + 1 == steps_per_interval) ? t1 : t + h;
            if (!m.allFinite() || !P.allFinite()) {
                throw std::runtime_error(
                    "propagate: non-finite state at t=" + std::to_string(t_next));
            }
            if (P.diagonal().minCoeff() < -kCovPsdTol * (1.0 + P.trace())) {
                throw std::runtime_error(
                    "propagate: covariance lost PSD at t=" + std::to_string(t_next));
            }
            traj.times.push_back(t_next);
            traj.beliefs.push_back({m, P});
        }
    }

    if (check_psd) {
        for (std::size_t j = 0; j < traj.size(); ++j) {
            const Matrix& Pj = traj.beliefs[j].cov;
            if (min_eigenvalue(Pj) < -kCovPsdTol * (1.0 + Pj.trace())) {
                throw std::runtime_error(
                    "propagate: covariance lost PSD at t=" +
                    std::to_string(traj.times[j]));
            }
        }
    }
    return traj;
}

BeliefTrajectory propagate(const DynamicsModel& model, const GaussianBelief& init,
                           const ControlTrajectory& ctrl,
                           int steps_per_interval) {
    require_belief(init, "propagate init");
    return propagate_from_node(model, init, 0, ctrl, steps_per_interval);
}

namespace detail_quadrature {

// Trapezoid of L(m,u) + tr(Q(u) P) over the belief grid, walking the control
// intervals so that each side of a piecewise-constant switch uses its own u.
double running_integral(const QuadraticCost& cost, const BeliefTrajectory& traj,
                        const ControlTrajectory& ctrl,
                        std::size_t start_interval) {
    const double tol = 1e-9 * std::max(1.0, ctrl.horizon());
    auto integrand = [&](std::size_t j, std::size_t interval) {
        const double t = traj.times[j];
        const ControlVector u = ctrl.eval_in_interval(interval, t);
        const Matrix q = cost.total_running_cov_weight(u);
        double v = cost.running(traj.beliefs[j].mean, u);
        if (q.size() > 0) v += (q * traj.beliefs[j].cov).trace();
        return v;
    };

    double total = 0.0;
    std::size_t j = 0;
    for (std::size_t i = start_interval; i < ctrl.interval_count(); ++i) {
        const double t1 = ctrl.nodes()[i + 1];
        if (j + 1 >= traj.size()) {
            throw std::invalid_argument("running cost: belief grid too short");
        }
        double left = integrand(j, i);
        while (j + 1 < traj.size() && traj.times[j + 1] <= t1 + tol) {
            const double h = traj.times[j + 1] - traj.times[j];
            const double right = integrand(j + 1, i);
            total += 0.5 * h * (left + right);
            left = right;
            ++j;
            if (std::abs(traj.times[j] - t1) <= tol) break;
        }
        if (std::abs(traj.times[j] - t1) > tol) {
            throw std::invalid_argument(
                "running cost: belief grid does not contain control node");
        }
    }
    return total;
}

}  // namespace detail_quadrature

double running_cost_integral(const QuadraticCost& cost,
                             const BeliefTrajectory& traj,
                             const ControlTrajectory& ctrl,
                             std::size_t start_interval) {
    return detail_quadrature::running_integral(cost, traj, ctrl, start_interval);
}

double expected_quadratic_cost(const QuadraticCost& cost,
                               const BeliefTrajectory& traj,
                               const ControlTrajectory& ctrl) {
    if (traj.size() < 2) {
        throw std::invalid_argument("expected_quadratic_cost: empty trajectory");
    }
    const double tol = 1e-9 * std::max(1.0, ctrl.horizon());
    if (std::abs(traj.times.front() - ctrl.nodes().front()) > tol ||
        std::abs(traj.times.back() - ctrl.horizon()) > tol) {
        throw std::invalid_argument("expected_quadratic_cost: grid mismatch");
    }
    const GaussianBelief& last = traj.back();
    double value = cost.terminal(last.mean);
    const Matrix qf = cost.total_final_cov_weight();
    if (qf.size() > 0) {
        detail::require_dim(qf.rows(), last.dim(), "expected_quadratic_cost Qf");
        value += (qf * last.cov).trace();
    }
    value += detail_quadrature::running_integral(cost, traj, ctrl, 0);
    return value;
}

std::vector<double> covariance_penalty_profile(const BeliefTrajectory& traj,
                                               const Matrix& weight) {
    std::vector<double> out;
    out.reserve(traj.size());
    for (const auto& b : traj.beliefs) {
        detail::require_dim(weight.rows(), b.dim(), "covariance_penalty_profile");
        out.push_back((weight * b.cov).trace());
    }
    return out;
}

}  // namespace statlin
