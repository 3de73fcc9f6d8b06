#ifndef STATLIN_ERROR_ESTIMATES_HPP
#define STATLIN_ERROR_ESTIMATES_HPP

#include "statlin/propagate.hpp"
#include "statlin/sde.hpp"
#include "statlin/types.hpp"

namespace statlin {

/// Ingredients of the linearization-error functional: phi dominates the drift
/// Jacobian norm as a function of the control norm, alpha is the increasing
/// outer factor (default shape C * exp(C s)). Matrix norms are Frobenius
/// throughout.
struct ErrorBudget {
    double epsilon = 0.0;
    std::function<double(double)> phi;
    std::function<double(double)> alpha;
};

/// Budget with alpha(s) = C exp(C s).
ErrorBudget make_error_budget(double epsilon, std::function<double(double)> phi,
                              double alpha_constant);

/// Constant envelope phi = sup over the trajectory grid of ||D_x f(m(t), u(t))||_F,
/// for models that do not provide an analytic bound.
std::function<double(double)> empirical_phi(const DynamicsModel& model,
                                            const BeliefTrajectory& traj,
                                            const ControlTrajectory& ctrl);

/// Empirical Lipschitz constant of D_x f along the trajectory (difference
/// quotients of the Jacobian between consecutive grid states).
double empirical_jacobian_lipschitz(const DynamicsModel& model,
                                    const BeliefTrajectory& traj,
                                    const ControlTrajectory& ctrl);

/// Left-hand side of the approximation constraint:
/// alpha(int phi(||u||) ds) * int phi(||u||) ||P(s)||_F ds (trapezoidal).
double constraint_lhs(const ErrorBudget& budget, const ControlTrajectory& ctrl,
                      const BeliefTrajectory& traj);

struct MembershipResult {
    bool inside = false;
    double value = 0.0;
};

/// Membership in the admissible class: constraint_lhs <= epsilon.
MembershipResult check_membership(const ErrorBudget& budget,
                                  const ControlTrajectory& ctrl,
                                  const BeliefTrajectory& traj);

/// sup_t ||m_mc - m_lin||^2 and sup_t ||P_mc - P_lin||_F with the Monte Carlo
/// moments standing in for the true ones.
std::pair<double, double> empirical_error(const BeliefTrajectory& traj,
                                          const EnsembleStats& stats);

/// Simplified bounded-control estimate C * int ||P(s)||_F ds. Pass C <= 0 to
/// estimate it as alpha(sup_phi * t_f) * sup_phi from the budget.
double bounded_control_bound(const BeliefTrajectory& traj,
                             const ControlTrajectory& ctrl, double C,
                             const ErrorBudget* budget = nullptr);

struct ProbeRow {
    double eta = 0.0;
    double constraint_value = 0.0;
    double terminal_error = 0.0;
};

/// Time-rescaling controllability probe: for each eta, applies
/// u_eta(t) = (1/eta) u_base(t/eta) on [0, eta] and zero afterwards,
/// propagates the moment system from (m0, P0) over the base horizon, and
/// reports the constraint value together with ||m(t_f) - mf||. The base
/// control must steer the mean from m0 to mf on its own grid; the eta = t_f
/// row reports exactly that steering error.
std::vector<ProbeRow> controllability_probe(
    const DynamicsModel& model, const StateVector& m0, const StateVector& mf,
    const ControlTrajectory& base_ctrl, const std::vector<double>& eta_list,
    const Matrix& P0, const ErrorBudget& budget, int steps_per_interval = 20);

}  // namespace statlin

#endif
