#include "statlin/types.hpp"

#include <cmath>

namespace statlin {

namespace detail {

void require_dim(Eigen::Index got, Eigen::Index want, const std::string& what) {
    if (got != want) {
        throw std::invalid_argument(what + ": dimension mismatch, got " +
                                    std::to_string(got) + ", expected " +
                                    std::to_string(want));
    }
}

}  // namespace detail

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

bool is_symmetric(const Matrix& m, double rel_tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.norm());
    return (m - m.transpose()).norm() <= rel_tol * scale;
}

double min_eigenvalue(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(sym),
                                             Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool is_valid_covariance(const Matrix& m) {
    if (!is_symmetric(m)) return false;
    return min_eigenvalue(m) >= -kCovPsdTol * (1.0 + m.trace());
}

void require_covariance(const Matrix& m, const std::string& what) {
    if (m.rows() != m.cols()) {
        throw std::invalid_argument(what + ": covariance must be square");
    }
    if (!is_symmetric(m)) {
        throw std::invalid_argument(what + ": covariance not symmetric");
    }
    if (min_eigenvalue(m) < -kCovPsdTol * (1.0 + m.trace())) {
        throw std::invalid_argument(what + ": covariance not PSD within tolerance");
    }
}

Matrix psd_projected(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(sym));
    Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
}

void require_belief(const GaussianBelief& b, const std::string& what) {
    if (b.cov.rows() != b.mean.size() || b.cov.cols() != b.mean.size()) {
        throw std::invalid_argument(what + ": mean/cov dimension mismatch");
    }
    require_covariance(b.cov, what);
}

StateVector eval_drift(const DynamicsModel& model, const StateVector& x,
                       const ControlVector& u) {
    detail::require_dim(x.size(), model.state_dim, "eval_drift state");
    detail::require_dim(u.size(), model.control_dim, "eval_drift control");
    return model.drift(x, u);
}

Matrix eval_jacobian_fd(const DynamicsModel& model, const StateVector& x,
                        const ControlVector& u) {
    detail::require_dim(x.size(), model.state_dim, "eval_jacobian_fd state");
    detail::require_dim(u.size(), model.control_dim, "eval_jacobian_fd control");
    const int n = model.state_dim;
    Matrix jac(n, n);
    StateVector xp = x, xm = x;
    for (int i = 0; i < n; ++i) {
        const double h = 1e-6 * (1.0 + std::abs(x[i]));
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        const StateVector fp = model.drift(xp, u);
        const StateVector fm = model.drift(xm, u);
        if (!fp.allFinite() || !fm.allFinite()) {
            throw std::runtime_error("eval_jacobian_fd: non-finite drift value");
        }
        jac.col(i) = (fp - fm) / (2.0 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    return jac;
}

Matrix eval_jacobian(const DynamicsModel& model, const StateVector& x,
                     const ControlVector& u) {
    if (model.jacobian) {
        detail::require_dim(x.size(), model.state_dim, "eval_jacobian state");
        detail::require_dim(u.size(), model.control_dim, "eval_jacobian control");
        return model.jacobian(x, u);
    }
    return eval_jacobian_fd(model, x, u);
}

Matrix eval_dispersion(const DynamicsModel& model, const StateVector& x,
                       const ControlVector& u) {
    detail::require_dim(x.size(), model.state_dim, "eval_dispersion state");
    detail::require_dim(u.size(), model.control_dim, "eval_dispersion control");
    return model.dispersion(x, u);
}

ControlTrajectory::ControlTrajectory(std::vector<double> nodes,
                                     std::vector<ControlVector> values,
                                     Mode mode)
    : nodes_(std::move(nodes)), values_(std::move(values)), mode_(mode) {
    if (nodes_.size() < 2) {
        throw std::invalid_argument("ControlTrajectory: need at least two nodes");
    }
    if (nodes_.front() != 0.0) {
        throw std::invalid_argument("ControlTrajectory: first node must be t = 0");
    }
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
        if (!(nodes_[i] > nodes_[i - 1])) {
            throw std::invalid_argument(
                "ControlTrajectory: nodes must be strictly increasing");
        }
    }
    const std::size_t want = mode_ == Mode::piecewise_constant
                                 ? nodes_.size() - 1
                                 : nodes_.size();
    if (values_.size() != want) {
        throw std::invalid_argument(
            "ControlTrajectory: value count does not match mode/grid");
    }
    for (const auto& v : values_) {
        if (v.size() != values_.front().size()) {
            throw std::invalid_argument(
                "ControlTrajectory: inconsistent control dimensions");
        }
    }
}

std::size_t ControlTrajectory::locate(double t) const {
    const double tf = horizon();
    const double slack = 1e-9 * std::max(1.0, tf);
    if (t < -slack || t > tf + slack) {
        throw std::out_of_range("ControlTrajectory: query t=" + std::to_string(t) +
                                " outside [0, " + std::to_string(tf) + "]");
    }
    if (t >= nodes_[nodes_.size() - 2]) return nodes_.size() - 2;
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
    const std::size_t idx = static_cast<std::size_t>(it - nodes_.begin());
    return idx == 0 ? 0 : idx - 1;
}

ControlVector ControlTrajectory::eval(double t) const {
    return eval_in_interval(locate(t), t);
}

ControlVector ControlTrajectory::eval_in_interval(std::size_t interval,
                                                  double t) const {
    if (interval >= interval_count()) {
        throw std::out_of_range("ControlTrajectory: interval index out of range");
    }
    if (mode_ == Mode::piecewise_constant) return values_[interval];
    const double t0 = nodes_[interval];
    const double t1 = nodes_[interval + 1];
    const double w = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    return (1.0 - w) * values_[interval] + w * values_[interval + 1];
}

double QuadraticCost::terminal(const StateVector& x) const {
    double v = terminal_const;
    if (terminal_lin.size() > 0) v += terminal_lin.dot(x);
    if (terminal_quad.size() > 0) v += x.dot(terminal_quad * x);
    return v;
}

double QuadraticCost::running(const StateVector& x, const ControlVector& u) const {
    double v = 0.0;
    if (running_const) v += running_const(u);
    if (running_lin) {
        const StateVector b = running_lin(u);
        if (b.size() > 0) v += b.dot(x);
    }
    if (running_quad) {
        const Matrix q = running_quad(u);
        if (q.size() > 0) v += x.dot(q * x);
    }
    return v;
}

Matrix QuadraticCost::total_final_cov_weight() const {
    if (terminal_quad.size() == 0) return cov_final_weight;
    if (cov_final_weight.size() == 0) return terminal_quad;
    return cov_final_weight + terminal_quad;
}

Matrix QuadraticCost::total_running_cov_weight(const ControlVector& u) const {
    Matrix q = cov_running_weight;
    if (running_quad) {
        const Matrix ql = running_quad(u);
        if (ql.size() > 0) q = q.size() == 0 ? ql : Matrix(q + ql);
    }
    return q;
}

QuadraticCost QuadraticCost::zero(int state_dim) {
    QuadraticCost c;
    c.terminal_quad = Matrix::Zero(state_dim, state_dim);
    c.terminal_lin = StateVector::Zero(state_dim);
    c.cov_final_weight = Matrix::Zero(state_dim, state_dim);
    c.cov_running_weight = Matrix::Zero(state_dim, state_dim);
    return c;
}

}  // namespace statlin
