#include "statlin/sde.hpp"

#include <cmath>
#include <numbers>

namespace statlin {

namespace rng {

namespace {

inline std::uint64_t splitmix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                  std::uint64_t index) {
    std::uint64_t h = splitmix(seed);
    h = splitmix(h ^ (path + 0x9E3779B97F4A7C15ULL));
    h = splitmix(h ^ (step + 0xD1B54A32D192ED03ULL));
    h = splitmix(h ^ (index + 0x8CB92BA72F3D8DD7ULL));
    return h;
}

double uniform(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
               std::uint64_t index) {
    const std::uint64_t bits = mix(seed, path, step, index) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double gaussian(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                std::uint64_t index) {
    const double u1 = uniform(seed, path, step, 2 * index);
    const double u2 = uniform(seed, path, step, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rng

namespace {

// Per-interval step counts; throws unless dt divides every interval.
std::vector<int> interval_steps(const ControlTrajectory& ctrl, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("simulate: dt must be > 0");
    std::vector<int> steps(ctrl.interval_count());
    for (std::size_t i = 0; i < ctrl.interval_count(); ++i) {
        const double len = ctrl.nodes()[i + 1] - ctrl.nodes()[i];
        const double ratio = len / dt;
        const int k = static_cast<int>(std::lround(ratio));
        if (k < 1 || std::abs(ratio - k) > 1e-9 * std::max(1.0, ratio)) {
            throw std::invalid_argument(
                "simulate: dt does not divide control interval " +
                std::to_string(i));
        }
        steps[i] = k;
    }
    return steps;
}

Matrix sampling_factor(const Matrix& cov) {
    require_covariance(cov, "monte_carlo init");
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(cov));
    const Eigen::VectorXd lambda = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
}

}  // namespace

std::vector<double> simulation_grid(const ControlTrajectory& ctrl, double dt) {
    const std::vector<int> steps = interval_steps(ctrl, dt);
    std::vector<double> times;
    times.push_back(ctrl.nodes().front());
    for (std::size_t i = 0; i < ctrl.interval_count(); ++i) {
        const double t0 = ctrl.nodes()[i];
        const double t1 = ctrl.nodes()[i + 1];
        const double h = (t1 - t0) / steps[i];
        for (int s = 1; s < steps[i]; ++s) times.push_back(t0 + s * h);
        times.push_back(t1);
    }
    return times;
}

std::vector<StateVector> simulate_path(const DynamicsModel& model,
                                       const StateVector& x0,
                                       const ControlTrajectory& ctrl, double dt,
                                       std::uint64_t seed,
                                       std::uint64_t path_id) {
    detail::require_dim(x0.size(), model.state_dim, "simulate_path x0");
    detail::require_dim(ctrl.dim(), model.control_dim, "simulate_path control");
    const std::vector<int> steps = interval_steps(ctrl, dt);

    std::vector<StateVector> path;
    path.push_back(x0);
    StateVector x = x0;
    std::uint64_t step_counter = 0;
    for (std::size_t i = 0; i < ctrl.interval_count(); ++i) {
        const double t0 = ctrl.nodes()[i];
        const double t1 = ctrl.nodes()[i + 1];
        const double h = (t1 - t0) / steps[i];
        const double sqh = std::sqrt(h);
        for (int s = 0; s < steps[i]; ++s) {
            const double t = t0 + s * h;
            const ControlVector u = ctrl.eval_in_interval(i, t);
            const StateVector f = model.drift(x, u);
            const Matrix g = model.dispersion(x, u);
            StateVector noise = StateVector::Zero(g.cols());
            for (Eigen::Index j = 0; j < g.cols(); ++j) {
                noise[j] = rng::gaussian(seed, path_id, step_counter,
                                         static_cast<std::uint64_t>(j));
            }
            x += h * f + sqh * (g * noise);
            if (!x.allFinite()) {
                throw std::runtime_error("simulate_path: non-finite state at t=" +
                                         std::to_string(t + h));
            }
            path.push_back(x);
            ++step_counter;
        }
    }
    return path;
}

StateVector draw_initial_state(const GaussianBelief& init, std::uint64_t seed,
                               std::uint64_t path_id) {
    const Matrix factor = sampling_factor(init.cov);
    StateVector xi(factor.cols());
    for (Eigen::Index j = 0; j < factor.cols(); ++j) {
        xi[j] = rng::gaussian(seed, path_id, rng::kInitStep,
                              static_cast<std::uint64_t>(j));
    }
    return init.mean + factor * xi;
}

EnsembleStats monte_carlo(const DynamicsModel& model, const GaussianBelief& init,
                          const ControlTrajectory& ctrl, double dt, int n_paths,
                          std::uint64_t seed) {
    if (n_paths < 2) throw std::invalid_argument("monte_carlo: n_paths must be >= 2");
    detail::require_dim(init.mean.size(), model.state_dim, "monte_carlo init");

    const Matrix factor = sampling_factor(init.cov);
    const int n = model.state_dim;

    EnsembleStats stats;
    stats.times = simulation_grid(ctrl, dt);
    stats.sample_count = n_paths;
    stats.seed = seed;
    const std::size_t m = stats.times.size();

    std::vector<StateVector> sum(m, StateVector::Zero(n));
    std::vector<Matrix> sum_outer(m, Matrix::Zero(n, n));

    for (int p = 0; p < n_paths; ++p) {
        StateVector xi(factor.cols());
        for (Eigen::Index j = 0; j < factor.cols(); ++j) {
            xi[j] = rng::gaussian(seed, static_cast<std::uint64_t>(p),
                                  rng::kInitStep, static_cast<std::uint64_t>(j));
        }
        const StateVector x0 = init.mean + factor * xi;
        const std::vector<StateVector> path =
            simulate_path(model, x0, ctrl, dt, seed, static_cast<std::uint64_t>(p));
        for (std::size_t k = 0; k < m; ++k) {
            sum[k] += path[k];
            sum_outer[k].noalias() += path[k] * path[k].transpose();
        }
    }

    stats.mean.resize(m);
    stats.cov.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        stats.mean[k] = sum[k] / n_paths;
        Matrix c = (sum_outer[k] -
                    n_paths * stats.mean[k] * stats.mean[k].transpose()) /
                   (n_paths - 1.0);
        stats.cov[k] = symmetrized(c);
    }
    return stats;
}

std::pair<std::vector<double>, std::vector<double>> relative_errors(
    const EnsembleStats& stats, const BeliefTrajectory& traj) {
    if (stats.times.size() != traj.times.size()) {
        throw std::invalid_argument("relative_errors: grid size mismatch");
    }
    for (std::size_t k = 0; k < stats.times.size(); ++k) {
        if (std::abs(stats.times[k] - traj.times[k]) >
            1e-9 * std::max(1.0, std::abs(stats.times[k]))) {
            throw std::invalid_argument("relative_errors: grids do not coincide");
        }
    }
    std::vector<double> mean_err(stats.times.size());
    std::vector<double> cov_err(stats.times.size());
    for (std::size_t k = 0; k < stats.times.size(); ++k) {
        const double mnorm = stats.mean[k].norm();
        const double pnorm = stats.cov[k].norm();
        mean_err[k] = (traj.beliefs[k].mean - stats.mean[k]).norm() / (1.0 + mnorm);
        cov_err[k] = (traj.beliefs[k].cov - stats.cov[k]).norm() / (1.0 + pnorm);
    }
    return {mean_err, cov_err};
}

}  // namespace statlin
