#ifndef STATLIN_POWERED_DESCENT_HPP
#define STATLIN_POWERED_DESCENT_HPP

#include "statlin/ocp.hpp"
#include "statlin/types.hpp"

namespace statlin {

/// How the additive acceleration noise scales with the vehicle mass. The
/// sigma values are force-level (N); `constant_vector` divides them once by
/// the reference mass so the dispersion stays a constant vector, while
/// `mass_scaled` divides by the current mass along each trajectory.
enum class DispersionMode { constant_vector, mass_scaled };

struct RocketParams {
    double thrust_max = 1e6;    // N
    double mass_flow = 300.0;   // kg/s
    double gravity = 9.81;      // m/s^2
    double u_min = 0.2;
    double u_max = 0.8;
    double sigma_y = 100.0;     // N
    double sigma_z = 10.0;      // N
    DispersionMode dispersion_mode = DispersionMode::constant_vector;
    double mass_ref = 40000.0;  // kg

    void validate() const;
};

/// Partial-feedback parameters nu = (rho, theta, K_n, K_d); the gains act on
/// the measurable states (position, velocity) only.
struct FeedbackParams {
    double rho = 0.0;
    double theta = 0.0;
    Eigen::Vector4d gain_norm = Eigen::Vector4d::Zero();
    Eigen::Vector4d gain_dir = Eigen::Vector4d::Zero();

    static FeedbackParams from_vector(const ControlVector& nu);
    ControlVector to_vector() const;
};

/// State (y, z, v_y, v_z, mu), control (u_y, u_z):
/// f = (v_y, v_z, T u_y / mu, T u_z / mu - g0, -q ||u||). Throws on mu <= 0.
StateVector descent_drift(const RocketParams& p, const StateVector& x,
                          const ControlVector& u);
Matrix descent_jacobian(const RocketParams& p, const StateVector& x,
                        const ControlVector& u);
/// d f / d u (5 x 2).
Matrix descent_control_jacobian(const RocketParams& p, const StateVector& x,
                                const ControlVector& u);
/// Dispersion column (one-dimensional Brownian driving both velocity rows).
Matrix descent_dispersion(const RocketParams& p, const StateVector& x);

/// u_FB(x, nu) = (rho + K_n xbar) (cos(theta + K_d xbar), sin(theta + K_d xbar)).
ControlVector feedback_law(const FeedbackParams& nu,
                           const Eigen::Vector4d& pos_vel);

/// Smoothed clamp to [a, b]: (b+a)/2 + (sqrt((s-a)^2+eps^2) - sqrt((s-b)^2+eps^2))/2.
/// eps = 0 gives the exact saturation.
double smooth_sat(double s, double a, double b, double eps);
double smooth_sat_derivative(double s, double a, double b, double eps);

/// Feedback drift with the norm channel passed through smooth_sat.
StateVector saturated_feedback_drift(const RocketParams& p,
                                     const FeedbackParams& nu, double eps_sat,
                                     const StateVector& x);

// Model builders. Controls are, in order: the raw thrust vector, the polar
// pair (rho, theta), and the ten feedback parameters. All carry analytic
// Jacobians; drift evaluation aborts below a 1 kg mass floor.
DynamicsModel open_loop_model(const RocketParams& p);
DynamicsModel polar_thrust_model(const RocketParams& p);
DynamicsModel feedback_model(const RocketParams& p);
DynamicsModel saturated_feedback_model(const RocketParams& p, double eps_sat);
/// Exact (non-smooth) saturation; for Monte Carlo simulation only.
DynamicsModel exact_saturated_feedback_model(const RocketParams& p);

struct DescentScenario {
    StateVector initial_mean;       // (y, z, v_y, v_z, mu)
    Matrix initial_cov;
    Eigen::VectorXd q_diag;         // running covariance penalty diagonal
    Eigen::VectorXd qf_diag;        // final covariance penalty diagonal
    double tf_min = 15.0;
    double tf_max = 60.0;
    double tf_guess = 30.0;
    double chance_probability = 0.99;
    double eps_sat = 0.02;

    static DescentScenario reference();
};

RocketParams reference_rocket();

/// Latin-hypercube feedback-parameter samples for the rank tests: a unit box
/// in the solver's scaled gain coordinates, so the gains move the feedback
/// output by order one across the scenario's state range. Deterministic in
/// the seed.
std::vector<ControlVector> feedback_gain_samples(int count, std::uint64_t seed);

RobustOCP build_problem4(const RocketParams& p, const DescentScenario& s);
RobustOCP build_problem5(const RocketParams& p, const DescentScenario& s);
RobustOCP build_problem6(const RocketParams& p, const DescentScenario& s);

}  // namespace statlin

#endif
