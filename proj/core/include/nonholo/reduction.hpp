#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

#include "nonholo/model.hpp"

namespace nonholo {

using Vec = Eigen::VectorXd;

/// A right-hand side eval together with its state dimension. eval is pure and
/// deterministic; handles are cheap to copy and safe to share across threads.
struct VectorFieldHandle {
    int dimension = 0;
    std::function<Vec(const Vec&)> eval;
    std::string label;

    Vec operator()(const Vec& x) const { return eval(x); }
};

struct NewtonOptions {
    double tol = 1e-12;
    int max_iters = 50;
    double max_condition = 1e8;
};

/// Underlying ODE on the M0 chart (q1, q2, q3, p, p3):
///   qdot1 = alpha1 p / m1,  qdot2 = alpha2 p / m2,  qdot3 = dF/dp3,
///   pdot  = -(k1/m1) alpha1 q1 - (k2/m2) alpha2 q2,  pdot3 = -dF/dq3.
/// Requires epsilon = 0 (PerturbationPresent otherwise).
VectorFieldHandle reduced_field(const SystemSpec& spec);

/// Lagrange multiplier keeping d/dt(constraint_residual) = 0 along the DAE
/// flow. Closed form for epsilon = 0; for perturbed specs the two directional
/// derivatives of the residual are formed with Hessian-vector products
/// (central differences on gradG, exact for G quadratic in p).
/// Requires |constraint_residual(s)| <= 1e-8.
double multiplier(const SystemSpec& spec, const FullState& s);

/// Full differential-algebraic field on T*R^3 with the multiplier substituted;
/// dimension 6, state order (q1, q2, q3, p1, p2, p3). States off M_eps raise
/// ConstraintViolation.
VectorFieldHandle dae_field(const SystemSpec& spec);

/// Solves dH_eps/dp(q, p) = v for the momenta by damped Newton with the
/// constraint row appended (consistent when v lies in the distribution).
/// Throws FibreSolveFailure when the iteration fails or the fibre Jacobian is
/// numerically singular (epsilon too large).
Vec3 perturbed_manifold_solve(const SystemSpec& spec, const Vec3& q, const Vec3& v,
                              const NewtonOptions& opts = {});

/// The reversible field induced on the M0 chart by the perturbed dynamics:
/// map to velocities with dH_0/dp, solve onto the M_eps fibre, evaluate the
/// perturbed DAE field there, and pull the tangent back through the fibre
/// map differential. Coincides with reduced_field for epsilon = 0.
VectorFieldHandle induced_field(const SystemSpec& spec, const NewtonOptions& opts = {});

} // namespace nonholo
