#ifndef STATLIN_OCP_HPP
#define STATLIN_OCP_HPP

#include "statlin/propagate.hpp"
#include "statlin/types.hpp"

#include <optional>

namespace statlin {

/// Inverse standard-normal CDF; rational approximation polished by one Newton
/// step against the erfc-based CDF. Absolute error below 1e-9 on (0, 1).
double inverse_normal_cdf(double p);

/// Probabilistic bound on the feedback norm channel rho + K_n xbar: the
/// transcription turns each spec into the deterministic margin row
///   side-distance(node) >= Psi^{-1}(p) sqrt(K_n Pbar K_n').
struct ChanceConstraintSpec {
    enum class Side { upper, lower };
    Side side = Side::upper;
    double bound = 0.0;
    double probability = 0.99;

    void validate() const;
};

enum class ControlParametrization {
    direct,          // decision = model control
    polar_thrust,    // decision = (norm, angle)
    feedback_gains,  // decision = (rho, theta, K_n[4], K_d[4])
};

/// Decision slices whose squared norm is integrated into the cost
/// (feedback-gain regularization).
struct GainRegularization {
    struct Slice {
        int offset = 0;
        int length = 0;
        double weight = 0.0;
    };
    std::vector<Slice> slices;

    double value(const ControlVector& u) const;
    bool empty() const { return slices.empty(); }
};

struct HorizonSpec {
    bool free = false;
    double fixed_tf = 0.0;
    double t_min = 0.0;
    double t_max = 0.0;
    double guess = 0.0;
};

/// A robust motion-planning problem over the lifted mean/covariance dynamics.
/// The model's control vector is the per-node decision vector.
struct RobustOCP {
    DynamicsModel model;
    QuadraticCost cost;
    GainRegularization gain_reg;
    GaussianBelief init;

    Matrix target_map;        // rows x n, full row rank
    Eigen::VectorXd target_value;

    Eigen::VectorXd control_lower;  // per-component decision bounds
    Eigen::VectorXd control_upper;
    std::optional<std::pair<double, double>> norm_bounds;  // metadata (u_min, u_max)
    std::vector<ChanceConstraintSpec> chance_constraints;
    HorizonSpec horizon;
    ControlParametrization parametrization = ControlParametrization::direct;

    ControlVector initial_control;  // replicated over nodes as the guess
    Eigen::VectorXd control_scales; // physical units per solver unit
    Eigen::VectorXd state_scales;   // used to scale terminal residual rows
    double time_scale = 1.0;

    void validate() const;
};

struct CostBreakdown {
    double terminal_mean = 0.0;  // psi(m(t_f)) (fuel term for the descent)
    double cov_final = 0.0;      // tr(Qf P(t_f))
    double cov_running = 0.0;    // integral of L + tr(Q(u) P)
    double gain_reg = 0.0;       // integral of the gain penalty
    double total() const {
        return terminal_mean + cov_final + cov_running + gain_reg;
    }
};

/// Single-shooting transcription on n_nodes piecewise-constant control
/// intervals over the unit time grid; a free horizon adds one scaled t_f
/// variable and enters the dynamics as a rate multiplier.
class TranscribedNLP {
public:
    TranscribedNLP(RobustOCP ocp, int n_nodes, int steps_per_interval = 1);

    const RobustOCP& ocp() const { return ocp_; }
    int n_nodes() const { return n_nodes_; }
    int control_dim() const { return ocp_.model.control_dim; }
    bool free_tf() const { return ocp_.horizon.free; }
    int decision_dim() const;
    int eq_dim() const;
    int ineq_dim() const;

    Eigen::VectorXd initial_guess() const;
    Eigen::VectorXd lower_bounds() const;
    Eigen::VectorXd upper_bounds() const;

    Eigen::VectorXd pack(const std::vector<ControlVector>& controls,
                         double tf) const;
    void unpack(const Eigen::VectorXd& z, std::vector<ControlVector>* controls,
                double* tf) const;

    /// Control interval a decision coordinate belongs to; -1 for t_f.
    int node_of_coordinate(int idx) const;

    struct Evaluation {
        bool finite = false;
        double tf = 0.0;
        CostBreakdown breakdown;
        double objective = 0.0;
        Eigen::VectorXd eq;        // scaled residuals, zero when feasible
        Eigen::VectorXd ineq;      // >= 0 when feasible
        std::vector<GaussianBelief> node_beliefs;   // N+1 entries
        std::vector<double> partial_running;        // unit-time integral up to node i
        std::vector<double> partial_gain;           // same for the gain penalty
    };

    /// Full shooting evaluation. Throws nothing for dynamics blow-ups:
    /// `finite` is false instead so line searches can reject the point.
    Evaluation evaluate(const Eigen::VectorXd& z) const;

    /// Re-evaluates objective and constraints when only decision coordinates
    /// of control intervals >= first_changed changed (t_f untouched), reusing
    /// the cached prefix of `base`.
    Evaluation evaluate_suffix(const Eigen::VectorXd& z, const Evaluation& base,
                               int first_changed) const;

    /// Belief trajectory of a decision on a refined grid in physical time.
    BeliefTrajectory belief_trajectory(const Eigen::VectorXd& z,
                                       int steps_per_interval) const;
    /// Physical-time control trajectory of a decision.
    ControlTrajectory control_trajectory(const Eigen::VectorXd& z) const;

private:
    Evaluation evaluate_impl(const Eigen::VectorXd& z, const Evaluation* base,
                             int first_changed) const;

    RobustOCP ocp_;
    int n_nodes_;
    int steps_per_interval_;
    std::vector<double> psi_inv_;  // per chance spec
};

TranscribedNLP transcribe(RobustOCP ocp, int n_nodes,
                          int steps_per_interval = 1);

std::pair<double, CostBreakdown> evaluate_objective(const TranscribedNLP& nlp,
                                                    const Eigen::VectorXd& z);

struct SolverOptions {
    int max_outer = 40;
    int max_inner = 300;
    double tol_kkt = 1e-5;
    double tol_feas = 1e-6;
    double initial_penalty = 10.0;
    double penalty_growth = 10.0;
    double fd_step = 1e-6;
    int lbfgs_memory = 25;
    bool verbose = false;
    std::optional<Eigen::VectorXd> initial_decision;
};

struct SolveReport {
    Eigen::VectorXd decision;             // solver (scaled) coordinates
    std::vector<ControlVector> controls;  // physical, one per node
    double tf = 0.0;
    CostBreakdown breakdown;
    double kkt_residual = 0.0;
    double feasibility = 0.0;   // max scaled violation
    int outer_iterations = 0;
    int inner_iterations = 0;
    bool converged = false;
    std::vector<double> merit_decreases;  // inner descent per outer iteration
    std::string message;
};

/// Augmented-Lagrangian outer loop + projected L-BFGS inner minimization;
/// gradients by forward finite differences over the shooting map with
/// suffix reuse. The objective is normalized by its magnitude at the initial
/// guess, which makes the iterates invariant to a positive rescaling of the
/// cost.
SolveReport solve(const TranscribedNLP& nlp, const SolverOptions& opts = {});

}  // namespace statlin

#endif
