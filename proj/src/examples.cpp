#include "statlin/examples.hpp"

namespace statlin {

DynamicsModel brockett_integrator(double noise) {
    DynamicsModel m;
    m.state_dim = 3;
    m.control_dim = 2;
    m.drift = [](const StateVector& x, const ControlVector& u) {
        StateVector f(3);
        f[0] = u[0];
        f[1] = u[1];
        f[2] = -x[1] * u[0] + x[0] * u[1];
        return f;
    };
    m.jacobian = [](const StateVector&, const ControlVector& u) {
        Matrix jac = Matrix::Zero(3, 3);
        jac(2, 0) = u[1];
        jac(2, 1) = -u[0];
        return jac;
    };
    m.dispersion = [noise](const StateVector&, const ControlVector&) {
        return Matrix(noise * Matrix::Identity(3, 3));
    };
    // Control-linear with ||D_x f_i|| <= 1, so phi(r) = r works.
    m.jacobian_bound = [](double r) { return r; };
    return m;
}

ControlTrajectory brockett_loop_control() {
    std::vector<double> nodes = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<ControlVector> values;
    auto push = [&values](double a, double b) {
        ControlVector u(2);
        u << a, b;
        values.push_back(u);
    };
    push(4.0, 0.0);
    push(0.0, 4.0);
    push(-4.0, 0.0);
    push(0.0, -4.0);
    return ControlTrajectory(std::move(nodes), std::move(values),
                             ControlTrajectory::Mode::piecewise_constant);
}

StateVector brockett_loop_target() {
    StateVector mf(3);
    mf << 0.0, 0.0, 2.0;
    return mf;
}

}  // namespace statlin
