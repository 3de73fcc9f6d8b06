#ifndef STATLIN_ACCESSIBILITY_HPP
#define STATLIN_ACCESSIBILITY_HPP

#include "statlin/types.hpp"

namespace statlin {

/// State-dependent vector field with an optional analytic Jacobian and a
/// provenance label such as "f_{u1}-f_{u2}" or "[f_{u1},f_{u3}]".
struct VectorFieldHandle {
    std::function<StateVector(const StateVector&)> eval;
    std::function<Matrix(const StateVector&)> jac;  // empty -> finite differences
    std::string label;
};

/// Central-difference Jacobian of a bare field, step step_scale * (1 + |x_i|).
Matrix field_jacobian_fd(const std::function<StateVector(const StateVector&)>& f,
                         const StateVector& x, double step_scale);

/// Jacobian through the handle (analytic when present, else FD at 1e-6).
Matrix field_jacobian(const VectorFieldHandle& f, const StateVector& x);

/// [f1, f2](x) = Df2(x) f1(x) - Df1(x) f2(x).
StateVector lie_bracket(const VectorFieldHandle& f1, const VectorFieldHandle& f2,
                        const StateVector& x);

/// Bracket as a reusable field; its own Jacobian is finite-differenced from
/// the bracket evaluation with step 1e-4 * (1 + |x_i|).
VectorFieldHandle make_bracket_field(const VectorFieldHandle& f1,
                                     const VectorFieldHandle& f2);

/// Pairwise differences f_{u_i} - f_{u_j} plus right-nested brackets of the
/// sampled fields up to `depth` (depth 2 = [f_i, f_j], depth 3 adds
/// [f_i, [f_j, f_k]], ...). Depth must be >= 2; a single sample yields the
/// empty ideal.
std::vector<VectorFieldHandle> generate_ideal(
    const DynamicsModel& model, const std::vector<ControlVector>& control_samples,
    int depth);

struct SpanReport {
    StateVector point;
    int lifted_dim = 0;
    int target_dim = 0;  // n + n(n+1)/2
    std::vector<std::string> generators_used;
    Eigen::VectorXd singular_values;
};

/// Rank of { (f(m); vech(Df(m) + Df(m)')) : f in the truncated ideal } with
/// off-diagonal vech entries weighted by sqrt(2). Columns are normalized
/// before the SVD so the rank decision is invariant to generator scaling;
/// rank counts singular values above tol_sv * sigma_max.
SpanReport lifted_rank(const DynamicsModel& model, const StateVector& point,
                       const std::vector<ControlVector>& control_samples,
                       int depth, double tol_sv = 1e-6);

/// Rank of { f(point) : f in the truncated ideal } in R^n.
int plain_rank(const DynamicsModel& model, const StateVector& point,
               const std::vector<ControlVector>& control_samples, int depth,
               double tol_sv = 1e-6);

}  // namespace statlin

#endif
