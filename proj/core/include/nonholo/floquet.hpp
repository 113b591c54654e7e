#pragma once

#include <memory>
#include <utility>

#include "nonholo/integrators.hpp"

namespace nonholo {

/// sigma within this distance of 0 or pi marks a resonant torus.
inline constexpr double kResonanceTol = 1e-8;

struct OrbitOptions {
    double window_min = -10.0;
    double window_max = 10.0;
    /// Section root selection: the root of F(q3, 0) = a nearest this seed;
    /// NaN picks the largest root in the window.
    double seed_q3 = std::numeric_limits<double>::quiet_NaN();
    double time_cap = 1000.0;
};

/// Closed orbit of the (q3, p3) subsystem on the level F = a, parametrized by
/// the angle theta in [0, 1) with theta = 0 at the section point (q3*, 0).
/// The section convention makes q3(theta) even and p3(theta) odd in theta.
class SubsystemOrbit {
  public:
    double a = 0.0;
    double period = 0.0; // infinity on the equilibrium branch
    double omega = 0.0;  // 1/period, cycles per unit time
    double basepoint_q3 = 0.0;
    int crossing_sign = -1; // sign of p3dot at the basepoint
    bool equilibrium = false;

    /// (q3, p3) at phase theta (any real theta; wrapped mod 1).
    std::pair<double, double> state_at(double theta) const;

    std::shared_ptr<const DenseSolution> dense; // one period in real time
};

SubsystemOrbit subsystem_orbit(const SystemSpec& spec, double a, const OrbitOptions& opts = {},
                               const StepperConfig& cfg = {});

/// The so(3)-valued coefficient matrix of the reduced skew system
/// udot = B(q3) u, u = (sqrt(k1) q1, sqrt(k2) q2, p).
Mat3 skew_field_B(const SystemSpec& spec, double q3);
Mat3 skew_field_B(const SystemSpec& spec, const SubsystemOrbit& orbit, double theta);

Mat3 hat(const Vec3& w);
Mat3 so3_exp(const Vec3& w);

struct So3Log {
    Mat3 Abar;
    double sigma; // rotation angle in [0, pi]
    Vec3 axis;    // unit axis, zero vector when sigma == 0
};

/// Principal logarithm of a rotation matrix via axis-angle extraction.
/// Throws NotARotation when R fails the orthogonality/determinant check and
/// HalfTurn when the rotation angle is within kResonanceTol of pi.
So3Log so3_log(const Mat3& R, double tol = 1e-8);

struct MonodromyResult {
    Mat3 Phi1; // raw integrated flow map over one theta-period
    double ortho_defect;
    double det_defect;
};

/// Integrates Wdot = A(theta) W, A = B/omega, over theta in [0, 1],
/// co-integrating the subsystem for q3(theta). Throws OmegaZero on the
/// degenerate branch.
MonodromyResult monodromy(const SystemSpec& spec, const SubsystemOrbit& orbit,
                          const StepperConfig& cfg = {});

/// Fundamental solution Phi(theta) for any theta (fresh integration from 0).
Mat3 flow_Phi(const SystemSpec& spec, const SubsystemOrbit& orbit, double theta,
              const StepperConfig& cfg = {});

/// Cached fundamental solution over one period; out-of-range arguments are
/// reduced with the Floquet property Phi(theta + n) = Phi(theta) Phi(1)^n.
class PhiFlow {
  public:
    Mat3 eval(double theta) const;

    static PhiFlow from_dense(std::shared_ptr<const DenseSolution> dense, const Mat3& Phi1);
    static PhiFlow frozen(const Mat3& B0);

  private:
    std::shared_ptr<const DenseSolution> dense_;
    Mat3 Phi1_ = Mat3::Identity();
    Mat3 Phi1_inv_ = Mat3::Identity();
    bool frozen_ = false;
    Vec3 w0_ = Vec3::Zero(); // generator axis*angle of the frozen branch
};

struct FloquetData {
    double a = 0.0;
    Mat3 Phi1 = Mat3::Identity(); // raw monodromy as integrated
    Mat3 Abar = Mat3::Zero();
    double sigma = 0.0;
    Vec3 axis = Vec3::Zero();
    double omega = 0.0; // subsystem frequency, cycles per unit time
    double xi = 0.0;    // omega * sigma / (2 pi), cycles per unit time
    bool resonant = false;

    double ortho_defect = 0.0;
    double det_defect = 0.0;
    double exp_defect = 0.0;

    std::shared_ptr<const PhiFlow> flow;
};

/// Monodromy + principal logarithm + frequencies for one torus label. The
/// omega = 0 equilibrium branch freezes q3 and uses the matrix exponential of
/// B(q3*) directly.
FloquetData compute_floquet(const SystemSpec& spec, const SubsystemOrbit& orbit,
                            const StepperConfig& cfg = {});

/// v = exp(Abar theta) Phi(theta)^{-1} u; theta is wrapped mod 1. Norm
/// preserving and period one in theta. Throws HalfTurn on sigma ~ pi.
Vec3 psi_transform(const SystemSpec& spec, const SubsystemOrbit& orbit, const FloquetData& fd,
                   const Vec3& u, double theta);

/// Phase in [0, 1) of a subsystem point, measured by time of flight to the
/// orbit section with matching crossing direction.
double orbit_phase(const SystemSpec& spec, const SubsystemOrbit& orbit, double q3, double p3,
                   const StepperConfig& cfg = {});

/// u = (sqrt(k1) q1, sqrt(k2) q2, p).
Vec3 u_coords(const SystemSpec& spec, const ReducedState& s);

struct ActionAngle {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double theta = 0.0;
    double phi = 0.0;
    Vec3 v = Vec3::Zero();
};

/// Full action-angle coordinates (a, b, c, theta, phi) of a reduced state:
/// a the subsystem energy, c the axis component and b the rotation-plane
/// radius of v = Psi(u, theta), phi the plane angle oriented so phidot =
/// +xi(a). Throws HalfTurn / DegenerateRotation on resonant tori.
ActionAngle action_angle_coords(const SystemSpec& spec, const SubsystemOrbit& orbit,
                                const FloquetData& fd, const ReducedState& s,
                                const StepperConfig& cfg = {});

struct FrequencyPair {
    double omega = 0.0;
    double xi = 0.0;
};

/// (omega(a), xi(a)) = (1/T3, sigma/(2 pi T3)).
FrequencyPair frequencies(const SystemSpec& spec, const SubsystemOrbit& orbit,
                          const FloquetData& fd);

struct ReversibilityReport {
    double field_identity_defect = 0.0; // rho A(theta) rho + A(-theta)
    double flow_defect = 0.0;           // rho Phi(-tau) - Phi(tau) rho
    double generator_defect = 0.0;      // rho Abar rho + Abar
    double psi_defect = 0.0;            // Psi(rho u, -theta) - rho Psi(u, theta)

    double max_defect() const {
        return std::max({field_identity_defect, flow_defect, generator_defect, psi_defect});
    }
    bool pass(double tol = 1e-8) const { return max_defect() <= tol; }
};

/// Verifies the three reversibility identities of the construction on grids
/// of tau and (u, theta), with rho = diag(1, 1, -1). Throws HalfTurn on
/// sigma ~ pi.
ReversibilityReport check_reversibility(const SystemSpec& spec, const SubsystemOrbit& orbit,
                                        const FloquetData& fd, const StepperConfig& cfg = {});

/// Classical subsystem action (contour integral of p3 dq3)/(2 pi); optional
/// diagnostic, monotone in a for the shipped presets.
double classical_action(const SystemSpec& spec, const SubsystemOrbit& orbit,
                        const StepperConfig& cfg = {});

} // namespace nonholo
