#include "statlin/accessibility.hpp"

#include <cmath>

namespace statlin {

namespace {

constexpr double kBaseFdStep = 1e-6;
constexpr double kBracketFdStep = 1e-4;

std::vector<VectorFieldHandle> sampled_fields(
    const DynamicsModel& model,
    const std::vector<ControlVector>& control_samples) {
    std::vector<VectorFieldHandle> fields;
    fields.reserve(control_samples.size());
    for (std::size_t i = 0; i < control_samples.size(); ++i) {
        const ControlVector u = control_samples[i];
        VectorFieldHandle f;
        f.eval = [&model, u](const StateVector& x) { return model.drift(x, u); };
        if (model.jacobian) {
            f.jac = [&model, u](const StateVector& x) {
                return model.jacobian(x, u);
            };
        }
        f.label = "f_{u" + std::to_string(i + 1) + "}";
        fields.push_back(std::move(f));
    }
    return fields;
}

Eigen::VectorXd lifted_vector(const VectorFieldHandle& f, const StateVector& x) {
    const StateVector v = f.eval(x);
    const Matrix jac = field_jacobian(f, x);
    const Matrix sym = jac + jac.transpose();
    const Eigen::Index n = x.size();
    Eigen::VectorXd out(n + n * (n + 1) / 2);
    out.head(n) = v;
    Eigen::Index k = n;
    const double root2 = std::sqrt(2.0);
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = j; i < n; ++i) {
            out[k++] = (i == j) ? sym(i, j) : root2 * sym(i, j);
        }
    }
    return out;
}

int rank_of_columns(std::vector<Eigen::VectorXd>& cols, double tol_sv,
                    Eigen::VectorXd* singular_values) {
    std::size_t kept = 0;
    for (auto& c : cols) {
        const double norm = c.norm();
        if (norm > 1e-300 && c.allFinite()) {
            cols[kept++] = c / norm;
        }
    }
    cols.resize(kept);
    if (cols.empty()) {
        if (singular_values) singular_values->resize(0);
        return 0;
    }
    Matrix stacked(cols.front().size(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        stacked.col(static_cast<Eigen::Index>(j)) = cols[j];
    }
    Eigen::JacobiSVD<Matrix> svd(stacked);
    const Eigen::VectorXd sv = svd.singularValues();
    if (singular_values) *singular_values = sv;
    if (sv.size() == 0) return 0;
    const double cutoff = tol_sv * sv[0];
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > cutoff) ++rank;
    }
    return rank;
}

}  // namespace

Matrix field_jacobian_fd(const std::function<StateVector(const StateVector&)>& f,
                         const StateVector& x, double step_scale) {
    const Eigen::Index n = x.size();
    StateVector xp = x, xm = x;
    Matrix jac;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = step_scale * (1.0 + std::abs(x[i]));
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        const StateVector fp = f(xp);
        const StateVector fm = f(xm);
        if (jac.size() == 0) jac.resize(fp.size(), n);
        jac.col(i) = (fp - fm) / (2.0 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    if (!jac.allFinite()) {
        throw std::runtime_error("field_jacobian_fd: non-finite Jacobian");
    }
    return jac;
}

Matrix field_jacobian(const VectorFieldHandle& f, const StateVector& x) {
    if (f.jac) {
        Matrix jac = f.jac(x);
        if (!jac.allFinite()) {
            throw std::runtime_error("field_jacobian: non-finite Jacobian for " +
                                     f.label);
        }
        return jac;
    }
    return field_jacobian_fd(f.eval, x, kBaseFdStep);
}

StateVector lie_bracket(const VectorFieldHandle& f1, const VectorFieldHandle& f2,
                        const StateVector& x) {
    return field_jacobian(f2, x) * f1.eval(x) -
           field_jacobian(f1, x) * f2.eval(x);
}

VectorFieldHandle make_bracket_field(const VectorFieldHandle& f1,
                                     const VectorFieldHandle& f2) {
    VectorFieldHandle b;
    b.label = "[" + f1.label + "," + f2.label + "]";
    b.eval = [f1, f2](const StateVector& x) { return lie_bracket(f1, f2, x); };
    auto eval = b.eval;
    b.jac = [eval](const StateVector& x) {
        return field_jacobian_fd(eval, x, kBracketFdStep);
    };
    return b;
}

std::vector<VectorFieldHandle> generate_ideal(
    const DynamicsModel& model,
    const std::vector<ControlVector>& control_samples, int depth) {
    if (control_samples.empty()) {
        throw std::invalid_argument("generate_ideal: need control samples");
    }
    if (depth < 2) {
        throw std::invalid_argument("generate_ideal: depth must be >= 2");
    }
    // A single sample has no pairwise differences and only vanishing
    // brackets: the truncated ideal is empty.
    const std::vector<VectorFieldHandle> base =
        sampled_fields(model, control_samples);

    std::vector<VectorFieldHandle> out;
    for (std::size_t i = 0; i < base.size(); ++i) {
        for (std::size_t j = i + 1; j < base.size(); ++j) {
            VectorFieldHandle d;
            d.label = base[i].label + "-" + base[j].label;
            const VectorFieldHandle fi = base[i];
            const VectorFieldHandle fj = base[j];
            d.eval = [fi, fj](const StateVector& x) {
                return StateVector(fi.eval(x) - fj.eval(x));
            };
            d.jac = [fi, fj](const StateVector& x) {
                return Matrix(field_jacobian(fi, x) - field_jacobian(fj, x));
            };
            out.push_back(std::move(d));
        }
    }

    std::vector<VectorFieldHandle> previous_level;
    for (std::size_t i = 0; i < base.size(); ++i) {
        for (std::size_t j = i + 1; j < base.size(); ++j) {
            previous_level.push_back(make_bracket_field(base[i], base[j]));
        }
    }
    out.insert(out.end(), previous_level.begin(), previous_level.end());
    for (int d = 3; d <= depth; ++d) {
        std::vector<VectorFieldHandle> level;
        for (const auto& f : base) {
            for (const auto& b : previous_level) {
                level.push_back(make_bracket_field(f, b));
            }
        }
        out.insert(out.end(), level.begin(), level.end());
        previous_level = std::move(level);
    }
    return out;
}

SpanReport lifted_rank(const DynamicsModel& model, const StateVector& point,
                       const std::vector<ControlVector>& control_samples,
                       int depth, double tol_sv) {
    if (!point.allFinite()) {
        throw std::invalid_argument("lifted_rank: point must be finite");
    }
    if (!(tol_sv > 0.0)) {
        throw std::invalid_argument("lifted_rank: tol_sv must be > 0");
    }
    const std::vector<VectorFieldHandle> ideal =
        generate_ideal(model, control_samples, depth);
    if (ideal.empty()) {
        throw std::invalid_argument("lifted_rank: empty generator set");
    }
    SpanReport report;
    report.point = point;
    const int n = model.state_dim;
    report.target_dim = n + n * (n + 1) / 2;
    std::vector<Eigen::VectorXd> cols;
    cols.reserve(ideal.size());
    for (const auto& f : ideal) {
        cols.push_back(lifted_vector(f, point));
        report.generators_used.push_back(f.label);
    }
    report.lifted_dim = rank_of_columns(cols, tol_sv, &report.singular_values);
    return report;
}

int plain_rank(const DynamicsModel& model, const StateVector& point,
               const std::vector<ControlVector>& control_samples, int depth,
               double tol_sv) {
    const std::vector<VectorFieldHandle> ideal =
        generate_ideal(model, control_samples, depth);
    if (ideal.empty()) {
        throw std::invalid_argument("plain_rank: empty generator set");
    }
    std::vector<Eigen::VectorXd> cols;
    cols.reserve(ideal.size());
    for (const auto& f : ideal) cols.push_back(f.eval(point));
    return rank_of_columns(cols, tol_sv, nullptr);
}

}  // namespace statlin
