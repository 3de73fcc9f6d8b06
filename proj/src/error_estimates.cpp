#include "statlin/error_estimates.hpp"

#include <cmath>
#include <limits>

namespace statlin {

namespace {

void require_matching_grid(const std::vector<double>& a,
                           const std::vector<double>& b, const char* what) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(what) + ": grid size mismatch");
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (std::abs(a[k] - b[k]) > 1e-9 * std::max(1.0, std::abs(a[k]))) {
            throw std::invalid_argument(std::string(what) +
                                        ": grids do not coincide");
        }
    }
}

// Trapezoid of fn(t_j, u_j) over the belief grid, per control interval so
// that piecewise-constant switches integrate exactly on each side.
template <typename Fn>
double trapezoid_over_grid(const BeliefTrajectory& traj,
                           const ControlTrajectory& ctrl, Fn&& fn) {
    const double tol = 1e-9 * std::max(1.0, ctrl.horizon());
    if (std::abs(traj.times.front() - ctrl.nodes().front()) > tol ||
        std::abs(traj.times.back() - ctrl.horizon()) > tol) {
        throw std::invalid_argument("error-estimates: grid mismatch");
    }
    double total = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < ctrl.interval_count(); ++i) {
        const double t1 = ctrl.nodes()[i + 1];
        double left = fn(j, ctrl.eval_in_interval(i, traj.times[j]));
        while (j + 1 < traj.size() && traj.times[j + 1] <= t1 + tol) {
            const double h = traj.times[j + 1] - traj.times[j];
            const double right =
                fn(j + 1, ctrl.eval_in_interval(i, traj.times[j + 1]));
            total += 0.5 * h * (left + right);
            left = right;
            ++j;
            if (std::abs(traj.times[j] - t1) <= tol) break;
        }
        if (std::abs(traj.times[j] - t1) > tol) {
            throw std::invalid_argument(
                "error-estimates: belief grid does not contain control node");
        }
    }
    return total;
}

}  // namespace

ErrorBudget make_error_budget(double epsilon, std::function<double(double)> phi,
                              double alpha_constant) {
    ErrorBudget b;
    b.epsilon = epsilon;
    b.phi = std::move(phi);
    b.alpha = [alpha_constant](double s) {
        return alpha_constant * std::exp(alpha_constant * s);
    };
    return b;
}

std::function<double(double)> empirical_phi(const DynamicsModel& model,
                                            const BeliefTrajectory& traj,
                                            const ControlTrajectory& ctrl) {
    double sup = 0.0;
    for (std::size_t j = 0; j < traj.size(); ++j) {
        const ControlVector u = ctrl.eval(traj.times[j]);
        const Matrix a = eval_jacobian(model, traj.beliefs[j].mean, u);
        sup = std::max(sup, a.norm());
    }
    return [sup](double) { return sup; };
}

double empirical_jacobian_lipschitz(const DynamicsModel& model,
                                    const BeliefTrajectory& traj,
                                    const ControlTrajectory& ctrl) {
    double lip = 0.0;
    Matrix prev;
    StateVector prev_m;
    for (std::size_t j = 0; j < traj.size(); ++j) {
        const ControlVector u = ctrl.eval(traj.times[j]);
        const Matrix a = eval_jacobian(model, traj.beliefs[j].mean, u);
        if (j > 0) {
            const double dx = (traj.beliefs[j].mean - prev_m).norm();
            if (dx > 1e-12) lip = std::max(lip, (a - prev).norm() / dx);
        }
        prev = a;
        prev_m = traj.beliefs[j].mean;
    }
    return lip;
}

double constraint_lhs(const ErrorBudget& budget, const ControlTrajectory& ctrl,
                      const BeliefTrajectory& traj) {
    if (!budget.phi || !budget.alpha) {
        throw std::invalid_argument("constraint_lhs: budget missing phi or alpha");
    }
    const double phi_l1 = trapezoid_over_grid(
        traj, ctrl,
        [&](std::size_t, const ControlVector& u) { return budget.phi(u.norm()); });
    const double weighted = trapezoid_over_grid(
        traj, ctrl, [&](std::size_t j, const ControlVector& u) {
            return budget.phi(u.norm()) * traj.beliefs[j].cov.norm();
        });
    return budget.alpha(phi_l1) * weighted;
}

MembershipResult check_membership(const ErrorBudget& budget,
                                  const ControlTrajectory& ctrl,
                                  const BeliefTrajectory& traj) {
    MembershipResult r;
    if (std::isinf(budget.epsilon)) {
        r.value = constraint_lhs(budget, ctrl, traj);
        r.inside = true;
        return r;
    }
    r.value = constraint_lhs(budget, ctrl, traj);
    r.inside = r.value <= budget.epsilon;
    return r;
}

std::pair<double, double> empirical_error(const BeliefTrajectory& traj,
                                          const EnsembleStats& stats) {
    require_matching_grid(traj.times, stats.times, "empirical_error");
    double sup_mean_sq = 0.0;
    double sup_cov = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        sup_mean_sq = std::max(
            sup_mean_sq, (stats.mean[k] - traj.beliefs[k].mean).squaredNorm());
        sup_cov =
            std::max(sup_cov, (stats.cov[k] - traj.beliefs[k].cov).norm());
    }
    return {sup_mean_sq, sup_cov};
}

double bounded_control_bound(const BeliefTrajectory& traj,
                             const ControlTrajectory& ctrl, double C,
                             const ErrorBudget* budget) {
    if (C <= 0.0) {
        if (budget == nullptr || !budget->phi || !budget->alpha) {
            throw std::invalid_argument(
                "bounded_control_bound: need C > 0 or a budget to estimate it");
        }
        double sup_phi = 0.0;
        for (std::size_t j = 0; j < traj.size(); ++j) {
            sup_phi = std::max(sup_phi,
                               budget->phi(ctrl.eval(traj.times[j]).norm()));
        }
        C = budget->alpha(sup_phi * ctrl.horizon()) * sup_phi;
    }
    const double p_l1 = trapezoid_over_grid(
        traj, ctrl, [&](std::size_t j, const ControlVector&) {
            return traj.beliefs[j].cov.norm();
        });
    return C * p_l1;
}

std::vector<ProbeRow> controllability_probe(
    const DynamicsModel& model, const StateVector& m0, const StateVector& mf,
    const ControlTrajectory& base_ctrl, const std::vector<double>& eta_list,
    const Matrix& P0, const ErrorBudget& budget, int steps_per_interval) {
    const double tf = base_ctrl.horizon();
    if (base_ctrl.mode() != ControlTrajectory::Mode::piecewise_constant) {
        throw std::invalid_argument(
            "controllability_probe: base control must be piecewise-constant");
    }
    std::vector<ProbeRow> rows;
    rows.reserve(eta_list.size());
    for (const double eta : eta_list) {
        if (!(eta > 0.0) || eta > tf * (1.0 + 1e-12)) {
            throw std::invalid_argument(
                "controllability_probe: eta must lie in (0, t_f]");
        }
        std::vector<double> nodes;
        std::vector<ControlVector> values;
        for (std::size_t i = 0; i < base_ctrl.nodes().size(); ++i) {
            nodes.push_back(base_ctrl.nodes()[i] / tf * eta);
        }
        for (const auto& v : base_ctrl.values()) values.push_back(v / (eta / tf));
        const bool has_tail = eta < tf * (1.0 - 1e-12);
        if (has_tail) {
            nodes.push_back(tf);
            values.push_back(ControlVector::Zero(base_ctrl.dim()));
        } else {
            nodes.back() = tf;
        }
        const ControlTrajectory rescaled(
            std::move(nodes), std::move(values),
            ControlTrajectory::Mode::piecewise_constant);

        const BeliefTrajectory traj = propagate(
            model, GaussianBelief{m0, P0}, rescaled, steps_per_interval);
        ProbeRow row;
        row.eta = eta;
        row.constraint_value = constraint_lhs(budget, rescaled, traj);
        row.terminal_error = (traj.back().mean - mf).norm();
        rows.push_back(row);
    }
    return rows;
}

}  // namespace statlin
