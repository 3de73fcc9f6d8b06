#ifndef STATLIN_SDE_HPP
#define STATLIN_SDE_HPP

#include "statlin/propagate.hpp"
#include "statlin/types.hpp"

#include <cstdint>

namespace statlin {

/// Stateless counter-based generator: every draw is a pure function of
/// (seed, path, step, index), so path ensembles are reproducible under any
/// evaluation order. Mixing is the SplitMix64 finalizer applied to the
/// combined key words.
namespace rng {

std::uint64_t mix(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                  std::uint64_t index);

/// Uniform draw in the open interval (0, 1).
double uniform(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
               std::uint64_t index);

/// Standard normal via Box-Muller on two counter draws.
double gaussian(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                std::uint64_t index);

/// Step key reserved for initial-condition draws.
inline constexpr std::uint64_t kInitStep = ~std::uint64_t{0};

}  // namespace rng

struct EnsembleStats {
    std::vector<double> times;
    std::vector<StateVector> mean;
    std::vector<Matrix> cov;  // unbiased (divisor sample_count - 1)
    int sample_count = 0;
    std::uint64_t seed = 0;
};

/// Euler-Maruyama path on the grid obtained by splitting every control
/// interval into steps of length dt (dt must divide each interval).
/// x_{i+1} = x_i + f(x_i, u(t_i)) dt + g(x_i, u(t_i)) sqrt(dt) xi_i.
std::vector<StateVector> simulate_path(const DynamicsModel& model,
                                       const StateVector& x0,
                                       const ControlTrajectory& ctrl, double dt,
                                       std::uint64_t seed,
                                       std::uint64_t path_id = 0);

/// The time grid simulate_path walks for a given (ctrl, dt).
std::vector<double> simulation_grid(const ControlTrajectory& ctrl, double dt);

/// Initial state of path `path_id`: mean + factor * xi with the factor from
/// the PSD-projected covariance and xi from the counter generator.
StateVector draw_initial_state(const GaussianBelief& init, std::uint64_t seed,
                               std::uint64_t path_id);

/// Ensemble statistics over n_paths independent paths with initial states
/// drawn from N(init.mean, init.cov) (covariance PSD-projected before
/// factorization). Aggregation runs in fixed path order.
EnsembleStats monte_carlo(const DynamicsModel& model, const GaussianBelief& init,
                          const ControlTrajectory& ctrl, double dt, int n_paths,
                          std::uint64_t seed);

/// Per-time ||m_lin - m_mc|| / (1 + ||m_mc||) and
/// ||P_lin - P_mc||_F / (1 + ||P_mc||_F); grids must coincide.
std::pair<std::vector<double>, std::vector<double>> relative_errors(
    const EnsembleStats& stats, const BeliefTrajectory& traj);

}  // namespace statlin

#endif
