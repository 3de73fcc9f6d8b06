#ifndef STATLIN_PROPAGATE_HPP
#define STATLIN_PROPAGATE_HPP

#include "statlin/types.hpp"

namespace statlin {

struct BeliefTrajectory {
    std::vector<double> times;
    std::vector<GaussianBelief> beliefs;

    std::size_t size() const { return times.size(); }
    const GaussianBelief& front() const { return beliefs.front(); }
    const GaussianBelief& back() const { return beliefs.back(); }
};

/// Integrates the coupled moment system
///   dm/dt = f(m, u),   dP/dt = A P + P A' + g g'  with A = D_x f(m, u)
/// by classic fixed-step RK4, subdividing every control interval into
/// `steps_per_interval` equal steps. The covariance is re-symmetrized after
/// each step; the mean update never reads P, so perturbing the initial
/// covariance leaves the mean trajectory bit-identical.
BeliefTrajectory propagate(const DynamicsModel& model, const GaussianBelief& init,
                           const ControlTrajectory& ctrl, int steps_per_interval);

/// Same integration started from an arbitrary control-grid node; used by the
/// single-shooting transcription to re-propagate suffixes. `check_psd` turns
/// the per-node eigenvalue sweep off for the solver's finite-difference
/// probes; a cheap diagonal guard still aborts on clearly indefinite
/// covariances either way.
BeliefTrajectory propagate_from_node(const DynamicsModel& model,
                                     const GaussianBelief& at_node,
                                     std::size_t start_interval,
                                     const ControlTrajectory& ctrl,
                                     int steps_per_interval,
                                     bool check_psd = true);

/// One RK4 step of the moment system under a constant control, in place.
void rk4_moment_step(const DynamicsModel& model, double h,
                     const ControlVector& u, StateVector& m, Matrix& P);

/// Trapezoid of L(m,u) + tr(Q(u) P) over the trajectory's span, assuming the
/// trajectory starts at control node `start_interval`.
double running_cost_integral(const QuadraticCost& cost,
                             const BeliefTrajectory& traj,
                             const ControlTrajectory& ctrl,
                             std::size_t start_interval);

/// Expected cost of the lifted problem:
///   psi(m(t_f)) + tr(Qf P(t_f)) + integral of L(m,u) + tr(Q(u) P)
/// with Qf and Q(u) the total covariance weights (penalty plus quadratic cost
/// part). The integral uses the trapezoidal rule on the belief grid, applied
/// interval-by-interval of the control grid so that piecewise-constant
/// control discontinuities are integrated exactly on each side.
double expected_quadratic_cost(const QuadraticCost& cost,
                               const BeliefTrajectory& traj,
                               const ControlTrajectory& ctrl);

/// Pointwise tr(Q P(t_i)) along the trajectory.
std::vector<double> covariance_penalty_profile(const BeliefTrajectory& traj,
                                               const Matrix& weight);

}  // namespace statlin

#endif
