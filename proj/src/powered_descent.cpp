#include "statlin/powered_descent.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace statlin {

namespace {

constexpr double kMassFloor = 1.0;  // kg; below this a trajectory is invalid

void require_mass(double mu, double floor) {
    if (!(mu > floor)) {
        throw std::domain_error("powered descent: mass " + std::to_string(mu) +
                                " kg at or below the " + std::to_string(floor) +
                                " kg validity floor");
    }
}

Eigen::Vector2d direction(double angle) {
    return {std::cos(angle), std::sin(angle)};
}

struct FeedbackEval {
    double s = 0.0;           // norm channel rho + K_n xbar
    double angle = 0.0;       // theta + K_d xbar
    Eigen::Vector2d w;        // (cos, sin)
    Eigen::Vector2d w_perp;   // (-sin, cos)
};

FeedbackEval eval_feedback_channels(const FeedbackParams& nu,
                                    const Eigen::Vector4d& xbar) {
    FeedbackEval e;
    e.s = nu.rho + nu.gain_norm.dot(xbar);
    e.angle = nu.theta + nu.gain_dir.dot(xbar);
    e.w = direction(e.angle);
    e.w_perp = {-e.w[1], e.w[0]};
    return e;
}

// Jacobian chain for any feedback-shaped drift: amplitude A(s) on the norm
// channel, direction w(angle). d u / d xbar = w A'(s) K_n' + A(s) w_perp K_d'.
Matrix feedback_state_jacobian(const RocketParams& p, const FeedbackParams& nu,
                               const StateVector& x, double amplitude,
                               double amplitude_slope, const FeedbackEval& e) {
    const ControlVector u = amplitude * e.w;
    Matrix jac = descent_jacobian(p, x, u);
    Eigen::Matrix<double, 2, 4> du_dxbar =
        amplitude_slope * e.w * nu.gain_norm.transpose() +
        amplitude * e.w_perp * nu.gain_dir.transpose();
    const Matrix dfdu = descent_control_jacobian(p, x, u);
    jac.block(0, 0, x.size(), 4) += dfdu * du_dxbar;
    return jac;
}

Eigen::Vector4d pos_vel_of(const StateVector& x) { return x.head<4>(); }

std::function<Matrix(const StateVector&, const ControlVector&)>
dispersion_fn(const RocketParams& p) {
    return [p](const StateVector& x, const ControlVector&) {
        return descent_dispersion(p, x);
    };
}

}  // namespace

void RocketParams::validate() const {
    if (!(thrust_max > 0.0) || !(mass_flow > 0.0) || !(gravity > 0.0)) {
        throw std::invalid_argument("RocketParams: T, q, g0 must be positive");
    }
    if (!(0.0 <= u_min && u_min <= u_max)) {
        throw std::invalid_argument("RocketParams: need 0 <= u_min <= u_max");
    }
    if (!(mass_ref > 0.0)) {
        throw std::invalid_argument("RocketParams: mass_ref must be positive");
    }
}

FeedbackParams FeedbackParams::from_vector(const ControlVector& nu) {
    if (nu.size() != 10) {
        throw std::invalid_argument("FeedbackParams: expected 10 entries");
    }
    FeedbackParams p;
    p.rho = nu[0];
    p.theta = nu[1];
    p.gain_norm = nu.segment<4>(2);
    p.gain_dir = nu.segment<4>(6);
    return p;
}

ControlVector FeedbackParams::to_vector() const {
    ControlVector nu(10);
    nu[0] = rho;
    nu[1] = theta;
    nu.segment<4>(2) = gain_norm;
    nu.segment<4>(6) = gain_dir;
    return nu;
}

StateVector descent_drift(const RocketParams& p, const StateVector& x,
                          const ControlVector& u) {
    detail::require_dim(x.size(), 5, "descent_drift state");
    detail::require_dim(u.size(), 2, "descent_drift control");
    const double mu = x[4];
    require_mass(mu, 0.0);
    StateVector f(5);
    f[0] = x[2];
    f[1] = x[3];
    f[2] = p.thrust_max * u[0] / mu;
    f[3] = p.thrust_max * u[1] / mu - p.gravity;
    f[4] = -p.mass_flow * u.norm();
    return f;
}

Matrix descent_jacobian(const RocketParams& p, const StateVector& x,
                        const ControlVector& u) {
    detail::require_dim(x.size(), 5, "descent_jacobian state");
    const double mu = x[4];
    require_mass(mu, 0.0);
    Matrix jac = Matrix::Zero(5, 5);
    jac(0, 2) = 1.0;
    jac(1, 3) = 1.0;
    jac(2, 4) = -p.thrust_max * u[0] / (mu * mu);
    jac(3, 4) = -p.thrust_max * u[1] / (mu * mu);
    return jac;
}

Matrix descent_control_jacobian(const RocketParams& p, const StateVector& x,
                                const ControlVector& u) {
    const double mu = x[4];
    require_mass(mu, 0.0);
    Matrix jac = Matrix::Zero(5, 2);
    jac(2, 0) = p.thrust_max / mu;
    jac(3, 1) = p.thrust_max / mu;
    const double norm = u.norm();
    if (norm > 1e-14) {
        jac(4, 0) = -p.mass_flow * u[0] / norm;
        jac(4, 1) = -p.mass_flow * u[1] / norm;
    }
    return jac;
}

Matrix descent_dispersion(const RocketParams& p, const StateVector& x) {
    const double mu = p.dispersion_mode == DispersionMode::mass_scaled
                          ? x[4]
                          : p.mass_ref;
    require_mass(mu, 0.0);
    Matrix g = Matrix::Zero(5, 1);
    g(2, 0) = p.sigma_y / mu;
    g(3, 0) = p.sigma_z / mu;
    return g;
}

ControlVector feedback_law(const FeedbackParams& nu,
                           const Eigen::Vector4d& pos_vel) {
    const FeedbackEval e = eval_feedback_channels(nu, pos_vel);
    return e.s * e.w;
}

double smooth_sat(double s, double a, double b, double eps) {
    if (!(a < b)) throw std::invalid_argument("smooth_sat: need a < b");
    if (eps < 0.0) throw std::invalid_argument("smooth_sat: eps must be >= 0");
    const double lo = std::sqrt((s - a) * (s - a) + eps * eps);
    const double hi = std::sqrt((s - b) * (s - b) + eps * eps);
    return 0.5 * (b + a) + 0.5 * (lo - hi);
}

double smooth_sat_derivative(double s, double a, double b, double eps) {
    if (!(a < b)) throw std::invalid_argument("smooth_sat: need a < b");
    const double lo = std::sqrt((s - a) * (s - a) + eps * eps);
    const double hi = std::sqrt((s - b) * (s - b) + eps * eps);
    const double dlo = lo > 0.0 ? (s - a) / lo : 0.0;
    const double dhi = hi > 0.0 ? (s - b) / hi : 0.0;
    return 0.5 * (dlo - dhi);
}

StateVector saturated_feedback_drift(const RocketParams& p,
                                     const FeedbackParams& nu, double eps_sat,
                                     const StateVector& x) {
    const FeedbackEval e = eval_feedback_channels(nu, pos_vel_of(x));
    const double amp = smooth_sat(e.s, p.u_min, p.u_max, eps_sat);
    return descent_drift(p, x, amp * e.w);
}

DynamicsModel open_loop_model(const RocketParams& p) {
    p.validate();
    DynamicsModel m;
    m.state_dim = 5;
    m.control_dim = 2;
    m.drift = [p](const StateVector& x, const ControlVector& u) {
        require_mass(x[4], kMassFloor);
        return descent_drift(p, x, u);
    };
    m.jacobian = [p](const StateVector& x, const ControlVector& u) {
        return descent_jacobian(p, x, u);
    };
    m.dispersion = dispersion_fn(p);
    return m;
}

DynamicsModel polar_thrust_model(const RocketParams& p) {
    p.validate();
    DynamicsModel m;
    m.state_dim = 5;
    m.control_dim = 2;  // (rho, theta)
    m.drift = [p](const StateVector& x, const ControlVector& c) {
        require_mass(x[4], kMassFloor);
        return descent_drift(p, x, ControlVector(c[0] * direction(c[1])));
    };
    m.jacobian = [p](const StateVector& x, const ControlVector& c) {
        return descent_jacobian(p, x, ControlVector(c[0] * direction(c[1])));
    };
    m.dispersion = dispersion_fn(p);
    return m;
}

DynamicsModel feedback_model(const RocketParams& p) {
    p.validate();
    DynamicsModel m;
    m.state_dim = 5;
    m.control_dim = 10;
    m.drift = [p](const StateVector& x, const ControlVector& c) {
        require_mass(x[4], kMassFloor);
        const FeedbackParams nu = FeedbackParams::from_vector(c);
        return descent_drift(p, x, feedback_law(nu, pos_vel_of(x)));
    };
    m.jacobian = [p](const StateVector& x, const ControlVector& c) {
        const FeedbackParams nu = FeedbackParams::from_vector(c);
        const FeedbackEval e = eval_feedback_channels(nu, pos_vel_of(x));
        return feedback_state_jacobian(p, nu, x, e.s, 1.0, e);
    };
    m.dispersion = dispersion_fn(p);
    return m;
}

DynamicsModel saturated_feedback_model(const RocketParams& p, double eps_sat) {
    p.validate();
    if (!(eps_sat > 0.0)) {
        throw std::invalid_argument(
            "saturated_feedback_model: eps_sat must be > 0 (use the exact model "
            "for simulation)");
    }
    DynamicsModel m;
    m.state_dim = 5;
    m.control_dim = 10;
    m.drift = [p, eps_sat](const StateVector& x, const ControlVector& c) {
        require_mass(x[4], kMassFloor);
        return saturated_feedback_drift(p, FeedbackParams::from_vector(c),
                                        eps_sat, x);
    };
    m.jacobian = [p, eps_sat](const StateVector& x, const ControlVector& c) {
        const FeedbackParams nu = FeedbackParams::from_vector(c);
        const FeedbackEval e = eval_feedback_channels(nu, pos_vel_of(x));
        const double amp = smooth_sat(e.s, p.u_min, p.u_max, eps_sat);
        const double slope = smooth_sat_derivative(e.s, p.u_min, p.u_max, eps_sat);
        return feedback_state_jacobian(p, nu, x, amp, slope, e);
    };
    m.dispersion = dispersion_fn(p);
    return m;
}

DynamicsModel exact_saturated_feedback_model(const RocketParams& p) {
    p.validate();
    DynamicsModel m;
    m.state_dim = 5;
    m.control_dim = 10;
    m.drift = [p](const StateVector& x, const ControlVector& c) {
        require_mass(x[4], kMassFloor);
        const FeedbackParams nu = FeedbackParams::from_vector(c);
        const FeedbackEval e = eval_feedback_channels(nu, pos_vel_of(x));
        const double amp = smooth_sat(e.s, p.u_min, p.u_max, 0.0);
        return descent_drift(p, x, ControlVector(amp * e.w));
    };
    m.dispersion = dispersion_fn(p);
    return m;
}

DescentScenario DescentScenario::reference() {
    DescentScenario s;
    s.initial_mean = StateVector(5);
    s.initial_mean << 1000.0, 4000.0, -75.0, -200.0, 40000.0;
    Eigen::VectorXd p0(5);
    p0 << 100.0, 100.0, 1.0, 1.0, 1600.0;
    s.initial_cov = p0.asDiagonal();
    s.q_diag = Eigen::VectorXd(5);
    s.q_diag << 10e3, 50e3, 1e3, 10e3, 0.0;
    s.qf_diag = Eigen::VectorXd(5);
    s.qf_diag << 14e3, 20e3, 0.2e3, 4e3, 0.0;
    return s;
}

RocketParams reference_rocket() { return RocketParams{}; }

std::vector<ControlVector> feedback_gain_samples(int count,
                                                 std::uint64_t seed) {
    if (count < 2) {
        throw std::invalid_argument("feedback_gain_samples: need count >= 2");
    }
    Eigen::VectorXd scales(10);
    scales << 1.0, 1.0, 1e-3, 1e-3, 1e-2, 1e-2, 1e-3, 1e-3, 1e-2, 1e-2;
    std::vector<ControlVector> samples(count, ControlVector::Zero(10));
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int d = 0; d < 10; ++d) {
        std::vector<int> perm(count);
        for (int i = 0; i < count; ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), gen);
        for (int s = 0; s < count; ++s) {
            samples[s][d] = (perm[s] + unit(gen)) / count * scales[d];
        }
    }
    return samples;
}

namespace {

// Pieces shared by the three problem builders: fuel cost -mu(t_f), diagonal
// covariance penalties, target {r = 0, v = 0} with the mass free, scales per
// the Table-1 magnitudes.
RobustOCP descent_base(const RocketParams& p, const DescentScenario& s) {
    RobustOCP ocp;
    ocp.cost = QuadraticCost::zero(5);
    ocp.cost.terminal_lin = StateVector::Zero(5);
    ocp.cost.terminal_lin[4] = -1.0;
    ocp.cost.cov_running_weight = Matrix(s.q_diag.asDiagonal());
    ocp.cost.cov_final_weight = Matrix(s.qf_diag.asDiagonal());
    ocp.init = GaussianBelief{s.initial_mean, s.initial_cov};
    ocp.target_map = Matrix::Zero(4, 5);
    ocp.target_map.block(0, 0, 4, 4) = Matrix::Identity(4, 4);
    ocp.target_value = Eigen::VectorXd::Zero(4);
    ocp.norm_bounds = std::make_pair(p.u_min, p.u_max);
    ocp.horizon.free = true;
    ocp.horizon.t_min = s.tf_min;
    ocp.horizon.t_max = s.tf_max;
    ocp.horizon.guess = s.tf_guess;
    ocp.state_scales = Eigen::VectorXd(5);
    ocp.state_scales << 1e3, 1e3, 1e2, 1e2, 4e4;
    ocp.time_scale = 30.0;
    return ocp;
}

void set_feedback_decision(RobustOCP& ocp, const RocketParams& p) {
    ocp.parametrization = ControlParametrization::feedback_gains;
    ocp.control_lower = Eigen::VectorXd(10);
    ocp.control_upper = Eigen::VectorXd(10);
    ocp.control_lower << 0.0, -std::numbers::pi, -100.0, -100.0, -100.0, -100.0,
        -100.0, -100.0, -100.0, -100.0;
    ocp.control_upper << 2.0, std::numbers::pi, 100.0, 100.0, 100.0, 100.0,
        100.0, 100.0, 100.0, 100.0;
    ocp.initial_control = ControlVector::Zero(10);
    ocp.initial_control[0] = 0.5 * (p.u_min + p.u_max);
    ocp.initial_control[1] = 0.5 * std::numbers::pi;
    // Gains in physical units multiply meters and m/s; scale them so a unit
    // solver step moves the feedback output by about one control unit.
    ocp.control_scales = Eigen::VectorXd(10);
    ocp.control_scales << 1.0, 1.0, 1e-3, 1e-3, 1e-2, 1e-2, 1e-3, 1e-3, 1e-2,
        1e-2;
    ocp.gain_reg.slices = {{2, 4, 2.0}, {6, 4, 1.0}};
}

}  // namespace

RobustOCP build_problem4(const RocketParams& p, const DescentScenario& s) {
    RobustOCP ocp = descent_base(p, s);
    ocp.model = polar_thrust_model(p);
    ocp.parametrization = ControlParametrization::polar_thrust;
    ocp.control_lower = Eigen::VectorXd(2);
    ocp.control_upper = Eigen::VectorXd(2);
    ocp.control_lower << p.u_min, -std::numbers::pi;
    ocp.control_upper << p.u_max, std::numbers::pi;
    ocp.initial_control = ControlVector(2);
    ocp.initial_control << 0.5 * (p.u_min + p.u_max), 0.5 * std::numbers::pi;
    ocp.control_scales = Eigen::VectorXd::Ones(2);
    ocp.validate();
    return ocp;
}

RobustOCP build_problem5(const RocketParams& p, const DescentScenario& s) {
    RobustOCP ocp = descent_base(p, s);
    ocp.model = saturated_feedback_model(p, s.eps_sat);
    set_feedback_decision(ocp, p);
    ocp.validate();
    return ocp;
}

RobustOCP build_problem6(const RocketParams& p, const DescentScenario& s) {
    RobustOCP ocp = descent_base(p, s);
    ocp.model = feedback_model(p);
    set_feedback_decision(ocp, p);
    ChanceConstraintSpec upper;
    upper.side = ChanceConstraintSpec::Side::upper;
    upper.bound = p.u_max;
    upper.probability = s.chance_probability;
    ChanceConstraintSpec lower;
    lower.side = ChanceConstraintSpec::Side::lower;
    lower.bound = p.u_min;
    lower.probability = s.chance_probability;
    ocp.chance_constraints = {upper, lower};
    ocp.validate();
    return ocp;
}

}  // namespace statlin
