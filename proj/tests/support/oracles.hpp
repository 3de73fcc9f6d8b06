// Test-only oracles: closed forms and slow independent routes used to freeze
// expected values. Nothing here calls the library code paths under test.
#ifndef STATLIN_TESTS_ORACLES_HPP
#define STATLIN_TESTS_ORACLES_HPP

#include "statlin/types.hpp"

#include <cmath>

namespace statlin::oracles {

// Scalar Ornstein-Uhlenbeck dx = -a x dt + sigma dW.
inline double ou_mean(double a, double m0, double t) {
    return m0 * std::exp(-a * t);
}
inline double ou_var(double a, double sigma, double p0, double t) {
    return p0 * std::exp(-2.0 * a * t) +
           sigma * sigma * (1.0 - std::exp(-2.0 * a * t)) / (2.0 * a);
}

inline DynamicsModel ou_model(double a, double sigma) {
    DynamicsModel m;
    m.state_dim = 1;
    m.control_dim = 1;
    m.drift = [a](const StateVector& x, const ControlVector&) {
        return StateVector(-a * x);
    };
    m.jacobian = [a](const StateVector&, const ControlVector&) {
        Matrix jac(1, 1);
        jac(0, 0) = -a;
        return jac;
    };
    m.dispersion = [sigma](const StateVector&, const ControlVector&) {
        Matrix g(1, 1);
        g(0, 0) = sigma;
        return g;
    };
    return m;
}

// Planar double integrator (positions then velocities), acceleration control,
// constant dispersion G (4 x d). A is nilpotent: exp(A t) = I + A t.
inline Matrix double_integrator_a() {
    Matrix a = Matrix::Zero(4, 4);
    a(0, 2) = 1.0;
    a(1, 3) = 1.0;
    return a;
}

inline Matrix double_integrator_b() {
    Matrix b = Matrix::Zero(4, 2);
    b(2, 0) = 1.0;
    b(3, 1) = 1.0;
    return b;
}

inline DynamicsModel linear_model(const Matrix& a, const Matrix& b,
                                  const Matrix& g) {
    DynamicsModel m;
    m.state_dim = static_cast<int>(a.rows());
    m.control_dim = static_cast<int>(b.cols());
    m.drift = [a, b](const StateVector& x, const ControlVector& u) {
        return StateVector(a * x + b * u);
    };
    m.jacobian = [a](const StateVector&, const ControlVector&) { return a; };
    m.dispersion = [g](const StateVector&, const ControlVector&) { return g; };
    return m;
}

// Closed-form moments of dx = (A x + B u) dt + G dW for nilpotent A (A^2 = 0)
// and constant control: exp(A t) = I + A t, and the covariance integral of
// (I + A s) G G' (I + A s)' is polynomial in t.
inline StateVector nilpotent_mean(const Matrix& a, const Matrix& b,
                                  const StateVector& x0, const ControlVector& u,
                                  double t) {
    const Matrix eat = Matrix::Identity(a.rows(), a.cols()) + a * t;
    // int_0^t exp(A(t-s)) B u ds = (I t + A t^2 / 2) B u for A^2 = 0.
    return eat * x0 +
           (Matrix::Identity(a.rows(), a.cols()) * t + a * (t * t / 2.0)) * b * u;
}

inline Matrix nilpotent_cov(const Matrix& a, const Matrix& g, const Matrix& p0,
                            double t) {
    const Matrix eat = Matrix::Identity(a.rows(), a.cols()) + a * t;
    const Matrix gg = g * g.transpose();
    return eat * p0 * eat.transpose() + gg * t +
           a * gg * (t * t / 2.0) + gg * a.transpose() * (t * t / 2.0) +
           a * gg * a.transpose() * (t * t * t / 3.0);
}

// erf by its Maclaurin series, independent of std::erf; |x| <= 4 suffices for
// the bisection oracle and converges to full double precision there.
inline double erf_series(double x) {
    const double z = x;
    double term = z;
    double sum = z;
    for (int n = 1; n < 200; ++n) {
        term *= -z * z / n;
        sum += term / (2.0 * n + 1.0);
        if (std::abs(term) < 1e-18 * (std::abs(sum) + 1.0)) break;
    }
    return sum * 2.0 / std::sqrt(M_PI);
}

inline double normal_cdf_series(double x) {
    return 0.5 * (1.0 + erf_series(x / std::sqrt(2.0)));
}

// Bisection inverse of the series CDF.
inline double inverse_normal_bisect(double p) {
    double lo = -8.0, hi = 8.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (normal_cdf_series(mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Minimum-energy steering of the 1-D double integrator (pos, vel) from x0 to
// xf in time T under cost int ||u||^2 dt: J* = d' G^{-1} d with the
// controllability Gramian G = [[T^3/3, T^2/2], [T^2/2, T]] and
// d = xf - exp(A T) x0.
inline double min_energy_cost_1d(double pos0, double vel0, double posf,
                                 double velf, double T) {
    const double d1 = posf - (pos0 + T * vel0);
    const double d2 = velf - vel0;
    const double g11 = T * T * T / 3.0;
    const double g12 = T * T / 2.0;
    const double g22 = T;
    const double det = g11 * g22 - g12 * g12;
    const double i11 = g22 / det;
    const double i12 = -g12 / det;
    const double i22 = g11 / det;
    return d1 * (i11 * d1 + i12 * d2) + d2 * (i12 * d1 + i22 * d2);
}

}  // namespace statlin::oracles

#endif
