#ifndef STATLIN_EXAMPLES_HPP
#define STATLIN_EXAMPLES_HPP

#include "statlin/types.hpp"

namespace statlin {

/// Brockett (nonholonomic) integrator: f(x, u) = u1 (1, 0, -x2) + u2 (0, 1, x1)
/// with constant isotropic dispersion `noise * I`. Control-linear and Lie
/// bracket generating, the standard fixture for the time-rescaling probe.
DynamicsModel brockett_integrator(double noise);

/// Piecewise-constant square-loop control on [0, 1] steering the Brockett
/// mean from the origin to (0, 0, 2); the net motion is along the bracket
/// direction and the control norm is constant.
ControlTrajectory brockett_loop_control();

/// Mean endpoint of the loop above.
StateVector brockett_loop_target();

}  // namespace statlin

#endif
