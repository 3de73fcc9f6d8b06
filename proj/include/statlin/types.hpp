#ifndef STATLIN_TYPES_HPP
#define STATLIN_TYPES_HPP

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace statlin {

using StateVector = Eigen::VectorXd;
using ControlVector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Covariance contract: symmetric to 1e-10 (relative to Frobenius norm),
// minimum eigenvalue >= -1e-8 * (1 + trace).
inline constexpr double kCovSymmetryTol = 1e-10;
inline constexpr double kCovPsdTol = 1e-8;

Matrix symmetrized(const Matrix& m);
bool is_symmetric(const Matrix& m, double rel_tol = kCovSymmetryTol);
double min_eigenvalue(const Matrix& sym);
bool is_valid_covariance(const Matrix& m);
void require_covariance(const Matrix& m, const std::string& what);

// Eigenvalue floor for emission and sampling; never used inside integrators.
Matrix psd_projected(const Matrix& sym);

struct GaussianBelief {
    StateVector mean;
    Matrix cov;

    Eigen::Index dim() const { return mean.size(); }
};

void require_belief(const GaussianBelief& b, const std::string& what);

/// Continuous-time model dx = drift(x,u) dt + dispersion(x,u) dW.
/// `jacobian` is the state Jacobian of the drift; leave it empty to fall back
/// to central finite differences. `jacobian_bound` is an optional envelope
/// phi with ||D_x drift(x,u)|| <= phi(||u||) for all x.
struct DynamicsModel {
    int state_dim = 0;
    int control_dim = 0;
    std::function<StateVector(const StateVector&, const ControlVector&)> drift;
    std::function<Matrix(const StateVector&, const ControlVector&)> jacobian;
    std::function<Matrix(const StateVector&, const ControlVector&)> dispersion;
    std::function<double(double)> jacobian_bound;
};

StateVector eval_drift(const DynamicsModel& model, const StateVector& x,
                       const ControlVector& u);

/// Central-difference Jacobian with per-coordinate step 1e-6 * (1 + |x_i|).
Matrix eval_jacobian_fd(const DynamicsModel& model, const StateVector& x,
                        const ControlVector& u);

/// Analytic Jacobian when the model provides one, finite differences otherwise.
Matrix eval_jacobian(const DynamicsModel& model, const StateVector& x,
                     const ControlVector& u);

Matrix eval_dispersion(const DynamicsModel& model, const StateVector& x,
                       const ControlVector& u);

/// Time grid plus control samples. Piecewise-constant trajectories carry one
/// value per interval, piecewise-linear ones carry one value per node.
class ControlTrajectory {
public:
    enum class Mode { piecewise_constant, piecewise_linear };

    ControlTrajectory(std::vector<double> nodes,
                      std::vector<ControlVector> values, Mode mode);

    double horizon() const { return nodes_.back(); }
    std::size_t interval_count() const { return nodes_.size() - 1; }
    Eigen::Index dim() const { return values_.front().size(); }
    Mode mode() const { return mode_; }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<ControlVector>& values() const { return values_; }

    /// Value at t, with [t_i, t_{i+1}) lookup; t = t_f maps to the last
    /// interval. Queries outside [0, t_f] (beyond rounding slack) throw.
    ControlVector eval(double t) const;

    /// Value at t treating t as a point of interval i; this is what
    /// integrators use so that both endpoints of an interval see the
    /// interval's own control in piecewise-constant mode.
    ControlVector eval_in_interval(std::size_t interval, double t) const;

    std::size_t locate(double t) const;

private:
    std::vector<double> nodes_;
    std::vector<ControlVector> values_;
    Mode mode_;
};

/// Costs with quadratic state dependence: terminal psi and running L are
/// x'Qx + b'x + c with control-dependent running coefficients, plus the
/// covariance penalty weights applied to tr(. P).
struct QuadraticCost {
    Matrix terminal_quad;        // Q_psi
    StateVector terminal_lin;    // b_psi
    double terminal_const = 0.0; // c_psi

    std::function<Matrix(const ControlVector&)> running_quad;    // Q_L(u)
    std::function<StateVector(const ControlVector&)> running_lin;
    std::function<double(const ControlVector&)> running_const;   // carries the control cost

    Matrix cov_final_weight;   // penalty on P(t_f)
    Matrix cov_running_weight; // penalty on P(t) along the trajectory

    double terminal(const StateVector& x) const;
    double running(const StateVector& x, const ControlVector& u) const;
    // Full weights entering the expected cost: cov_final_weight + Q_psi and
    // cov_running_weight + Q_L(u).
    Matrix total_final_cov_weight() const;
    Matrix total_running_cov_weight(const ControlVector& u) const;

    static QuadraticCost zero(int state_dim);
};

namespace detail {
void require_dim(Eigen::Index got, Eigen::Index want, const std::string& what);
}

}  // namespace statlin

#endif
