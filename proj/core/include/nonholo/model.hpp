#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nonholo/errors.hpp"

namespace nonholo {

using Vec3 = Eigen::Vector3d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

/// Masses and spring constants of the two linear oscillators.
struct Params {
    double m1 = 1.0;
    double m2 = 1.0;
    double k1 = 1.0;
    double k2 = 1.0;

    /// Throws SpecError naming the violated invariant (all four must be > 0).
    void validate() const;
};

/// Coupling function f entering the constraint one-form f(q3) dq1 + dq2.
///
/// The derivative is supplied explicitly, not differentiated automatically;
/// derivative_defect() below checks the pair for consistency. A coupling may
/// declare an open validity interval (q3_min, q3_max); evaluations outside it
/// raise DomainViolation.
struct Coupling {
    std::function<double(double)> f;
    std::function<double(double)> df;
    std::string label = "custom";
    double q3_min = -std::numeric_limits<double>::infinity();
    double q3_max = std::numeric_limits<double>::infinity();

    bool in_domain(double q3) const { return q3 > q3_min && q3 < q3_max; }
};

/// Hamiltonian F(q3, p3) of the independent subsystem, with its partials.
/// F must be even in p3 (reversible).
struct Subsystem {
    std::function<double(double, double)> F;
    std::function<double(double, double)> dFdq3;
    std::function<double(double, double)> dFdp3;
    std::string label = "custom";
};

/// Smooth perturbation G on the full phase space, argument order
/// (q1, q2, q3, p1, p2, p3). reversible means G(q, -p) = G(q, p).
struct Perturbation {
    std::function<double(const Vec6&)> G;
    std::function<Vec6(const Vec6&)> gradG;
    bool reversible = true;
    std::string label = "custom";
};

/// Canonical coordinates on T*R^3.
struct FullState {
    double q1 = 0, q2 = 0, q3 = 0;
    double p1 = 0, p2 = 0, p3 = 0;

    Vec6 to_vector() const;
    static FullState from_vector(const Vec6& x);
};

/// Chart (q1, q2, q3, p, p3) on the constraint manifold M0, p = p1/alpha1(q3).
struct ReducedState {
    double q1 = 0, q2 = 0, q3 = 0;
    double p = 0, p3 = 0;

    Vec5 to_vector() const;
    static ReducedState from_vector(const Vec5& x);
};

/// One member of the oscillator family: H_eps = H_0 + eps*G with
/// H_0 = sum_i (p_i^2/m_i + k_i q_i^2)/2 + F(q3, p3).
struct SystemSpec {
    Params params;
    Coupling coupling;
    Subsystem subsystem;
    std::optional<Perturbation> perturbation;
    double epsilon = 0.0;
    std::string label = "custom";

    // Guarded evaluations (DomainViolation outside the coupling interval).
    double f(double q3) const;
    double df(double q3) const;
    double F(double q3, double p3) const { return subsystem.F(q3, p3); }
    double dFdq3(double q3, double p3) const { return subsystem.dFdq3(q3, p3); }
    double dFdp3(double q3, double p3) const { return subsystem.dFdp3(q3, p3); }

    bool perturbed() const { return epsilon != 0.0 && perturbation.has_value(); }

    /// Throws SpecError naming the violated invariant.
    void validate() const;
};

// Chart coefficients of the reduction: p1 = alpha1(q3) p, p2 = alpha2(q3) p.
// alpha1 = ((1 + (m2/m1) f^2)/m1)^(-1/2), alpha2 = -(m2/m1) f alpha1, and
// alpha1^2/m1 + alpha2^2/m2 = 1 identically.
double alpha1(const SystemSpec& spec, double q3);
double alpha2(const SystemSpec& spec, double q3);
double alpha1_prime(const SystemSpec& spec, double q3);
double alpha2_prime(const SystemSpec& spec, double q3);

/// Chart inverse: the full state with p1 = alpha1 p, p2 = alpha2 p. The result
/// satisfies the constraint exactly.
FullState embed(const SystemSpec& spec, const ReducedState& s);

/// Chart map M0 -> (q1,q2,q3,p,p3). Requires |constraint_residual(s)| <= tol.
ReducedState project(const SystemSpec& spec, const FullState& s, double tol = 1e-8);

/// Residual of the velocity constraint <tau, dH_eps/dp> at s; zero on M_eps.
double constraint_residual(const SystemSpec& spec, const FullState& s);

/// Total energy H_eps(s).
double hamiltonian(const SystemSpec& spec, const FullState& s);

/// Velocity map dH_eps/dp at s, components (qdot1, qdot2, qdot3).
Vec3 velocity_map(const SystemSpec& spec, const FullState& s);

/// Position gradient dH_eps/dq at s.
Vec3 position_gradient(const SystemSpec& spec, const FullState& s);

// Canonical reversibility map rho: momenta negated, positions fixed.
FullState reversal(const FullState& s);
ReducedState reversal(const ReducedState& s);

namespace presets {

/// f(q3) = q3, m = k = 1, F = (q3^2 + p3^2)/2.
SystemSpec contact();

/// CVT gearbox coupling f(q3) = q3/(1 - q3), valid for q3 < 1; m = k = 1,
/// harmonic subsystem.
SystemSpec cvt();

/// f identically zero: two uncoupled oscillators plus the subsystem.
SystemSpec decoupled();

} // namespace presets

// Named catalogues used by experiment configs.
// Couplings: "linear" (f = q3), "cvt", "zero", "polynomial" (coefficients
// c0 + c1 q3 + ...). Subsystems: "harmonic", "quartic" (p3^2/2 + q3^4/4),
// "polynomial" (p3^2/2 + potential with given coefficients). Perturbations:
// "none", "q1_quartic" (G = q1^4), "p1_quadratic" (G = p1^2/2),
// "mixed_nonreversible" (G = q1^2 p2, odd in p).
Coupling make_coupling(const std::string& name, std::span<const double> coefficients = {});
Subsystem make_subsystem(const std::string& name, std::span<const double> coefficients = {});
std::optional<Perturbation> make_perturbation(const std::string& name);

// Finite-difference consistency checks; each returns the worst relative
// mismatch over the sample points (scale-protected denominator).
double coupling_derivative_defect(const Coupling& c, std::span<const double> q3_samples);
double subsystem_gradient_defect(const Subsystem& s,
                                 std::span<const std::pair<double, double>> samples);
double perturbation_gradient_defect(const Perturbation& g, std::span<const Vec6> samples);

/// Max |F(q3,-p3) - F(q3,p3)| over the samples (zero for reversible F).
double subsystem_reversibility_defect(const Subsystem& s,
                                      std::span<const std::pair<double, double>> samples);

/// Max |G(q,-p) - G(q,p)| over the samples.
double perturbation_reversibility_defect(const Perturbation& g, std::span<const Vec6> samples);

} // namespace nonholo
