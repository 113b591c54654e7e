#include "nonholo/reduction.hpp"

#include <cmath>
#include <sstream>

namespace nonholo {

namespace {

constexpr double kDirStep = 1e-6;

// Hessian-vector product HessG(x) * w by a central difference of gradG along
// w. Exact (up to rounding) when G is quadratic.
Vec6 hess_g_times(const Perturbation& g, const Vec6& x, const Vec6& w) {
    const double wn = w.lpNorm<Eigen::Infinity>();
    if (wn == 0.0) return Vec6::Zero();
    const double delta = kDirStep * std::max(1.0, x.lpNorm<Eigen::Infinity>()) / wn;
    return (g.gradG(x + delta * w) - g.gradG(x - delta * w)) / (2.0 * delta);
}

// d/dq3 and d/dp3 of dF/dp3, central differences on the supplied partial.
double d2F_dp3dq3(const SystemSpec& spec, double q3, double p3) {
    const double d = kDirStep * std::max(1.0, std::abs(q3));
    return (spec.dFdp3(q3 + d, p3) - spec.dFdp3(q3 - d, p3)) / (2.0 * d);
}

double d2F_dp3dp3(const SystemSpec& spec, double q3, double p3) {
    const double d = kDirStep * std::max(1.0, std::abs(p3));
    return (spec.dFdp3(q3, p3 + d) - spec.dFdp3(q3, p3 - d)) / (2.0 * d);
}

void require_on_manifold(const SystemSpec& spec, const FullState& s, double tol) {
    const double res = constraint_residual(spec, s);
    if (std::abs(res) > tol) {
        std::ostringstream os;
        os << "state off the constraint manifold: |residual| = " << std::abs(res) << " > " << tol;
        throw ConstraintViolation(os.str());
    }
}

// Directional derivative of the constraint residual g = f(q3) v1 + v2 along a
// phase-space direction w, using the linearised velocity map.
double residual_derivative(const SystemSpec& spec, const FullState& s, const Vec3& v,
                           const Vec6& w) {
    const auto& p = spec.params;
    Vec6 hg = Vec6::Zero();
    if (spec.perturbed()) hg = spec.epsilon * hess_g_times(*spec.perturbation, s.to_vector(), w);
    const double dv1 = w[3] / p.m1 + hg[3];
    const double dv2 = w[4] / p.m2 + hg[4];
    return spec.df(s.q3) * w[2] * v[0] + spec.f(s.q3) * dv1 + dv2;
}

Vec3 momentum_fibre_jacobian_times(const SystemSpec& spec, const Vec3& q, const Vec3& p,
                                   const Vec3& dir) {
    // d(velocity_map)/dp applied to dir, central difference; exact for
    // quadratic-in-p Hamiltonians.
    const double dn = dir.lpNorm<Eigen::Infinity>();
    if (dn == 0.0) return Vec3::Zero();
    const double delta = kDirStep * std::max(1.0, p.lpNorm<Eigen::Infinity>()) / dn;
    FullState sp{q[0], q[1], q[2], p[0] + delta * dir[0], p[1] + delta * dir[1],
                 p[2] + delta * dir[2]};
    FullState sm{q[0], q[1], q[2], p[0] - delta * dir[0], p[1] - delta * dir[1],
                 p[2] - delta * dir[2]};
    return (velocity_map(spec, sp) - velocity_map(spec, sm)) / (2.0 * delta);
}

} // namespace

VectorFieldHandle reduced_field(const SystemSpec& spec) {
    if (spec.perturbed())
        throw PerturbationPresent("reduced_field requires epsilon = 0; use induced_field");
    VectorFieldHandle h;
    h.dimension = 5;
    h.label = "reduced:" + spec.label;
    h.eval = [spec](const Vec& x) {
        const auto& p = spec.params;
        const double a1 = alpha1(spec, x[2]);
        const double a2 = alpha2(spec, x[2]);
        Vec dx(5);
        dx[0] = a1 * x[3] / p.m1;
        dx[1] = a2 * x[3] / p.m2;
        dx[2] = spec.dFdp3(x[2], x[4]);
        dx[3] = -(p.k1 / p.m1) * a1 * x[0] - (p.k2 / p.m2) * a2 * x[1];
        dx[4] = -spec.dFdq3(x[2], x[4]);
        return dx;
    };
    return h;
}

namespace {

double multiplier_unchecked(const SystemSpec& spec, const FullState& s) {
    const auto& p = spec.params;
    const double fv = spec.f(s.q3);
    if (!spec.perturbed()) {
        const double q3dot = spec.dFdp3(s.q3, s.p3);
        const double num = p.k1 * fv * s.q1 / p.m1 + p.k2 * s.q2 / p.m2 -
                           spec.df(s.q3) * q3dot * s.p1 / p.m1;
        const double den = fv * fv / p.m1 + 1.0 / p.m2;
        return num / den;
    }
    // lambda from d/dt(residual) = dg.Y + lambda dg.Z = 0, where Y is the
    // unconstrained Hamiltonian field of H_eps and Z the constraint force
    // direction (0, tau).
    const Vec3 v = velocity_map(spec, s);
    const Vec3 gq = position_gradient(spec, s);
    Vec6 Y;
    Y << v[0], v[1], v[2], -gq[0], -gq[1], -gq[2];
    Vec6 Z = Vec6::Zero();
    Z[3] = fv;
    Z[4] = 1.0;
    const double dgY = residual_derivative(spec, s, v, Y);
    const double dgZ = residual_derivative(spec, s, v, Z);
    if (std::abs(dgZ) < 1e-14)
        throw FibreSolveFailure("constraint force direction is degenerate (dg.Z ~ 0)");
    return -dgY / dgZ;
}

} // namespace

double multiplier(const SystemSpec& spec, const FullState& s) {
    require_on_manifold(spec, s, 1e-8);
    return multiplier_unchecked(spec, s);
}

VectorFieldHandle dae_field(const SystemSpec& spec) {
    VectorFieldHandle h;
    h.dimension = 6;
    h.label = "dae:" + spec.label;
    h.eval = [spec](const Vec& x) {
        const FullState s = FullState::from_vector(x);
        // The multiplier extension transports the residual as a first
        // integral, so one-step methods may evaluate O(h^2) off the manifold
        // at stage points; the guard only rejects inconsistent states.
        require_on_manifold(spec, s, 1e-3);
        const double lam = multiplier_unchecked(spec, s);
        const Vec3 v = velocity_map(spec, s);
        const Vec3 gq = position_gradient(spec, s);
        Vec dx(6);
        dx[0] = v[0];
        dx[1] = v[1];
        dx[2] = v[2];
        dx[3] = -gq[0] + lam * spec.f(s.q3);
        dx[4] = -gq[1] + lam;
        dx[5] = -gq[2];
        return dx;
    };
    return h;
}

Vec3 perturbed_manifold_solve(const SystemSpec& spec, const Vec3& q, const Vec3& v,
                              const NewtonOptions& opts) {
    const auto& par = spec.params;
    Vec3 p{par.m1 * v[0], par.m2 * v[1], v[2]};

    auto residual4 = [&](const Vec3& pm) {
        FullState s{q[0], q[1], q[2], pm[0], pm[1], pm[2]};
        const Vec3 vel = velocity_map(spec, s);
        Eigen::Vector4d r;
        r.head<3>() = vel - v;
        r[3] = spec.f(q[2]) * vel[0] + vel[1];
        return r;
    };

    const double vscale = 1.0 + v.lpNorm<Eigen::Infinity>();
    Eigen::Vector4d r = residual4(p);
    for (int iter = 0; iter < opts.max_iters; ++iter) {
        if (r.lpNorm<Eigen::Infinity>() <= opts.tol * vscale) return p;

        Eigen::Matrix3d Jv;
        for (int j = 0; j < 3; ++j)
            Jv.col(j) = momentum_fibre_jacobian_times(spec, q, p, Vec3::Unit(j));

        Eigen::JacobiSVD<Eigen::Matrix3d> svd(Jv);
        const double smin = svd.singularValues()[2];
        if (smin <= 0.0 || svd.singularValues()[0] / smin > opts.max_condition) {
            std::ostringstream os;
            os << "fibre map Jacobian ill-conditioned (cond > " << opts.max_condition
               << "); epsilon too large";
            throw FibreSolveFailure(os.str());
        }

        Eigen::Matrix<double, 4, 3> J;
        J.topRows<3>() = Jv;
        J.row(3) = spec.f(q[2]) * Jv.row(0) + Jv.row(1);
        const Vec3 dp = J.colPivHouseholderQr().solve(-r);

        double t = 1.0;
        const double r0 = r.norm();
        Vec3 pnext = p + dp;
        Eigen::Vector4d rnext = residual4(pnext);
        while (rnext.norm() > (1.0 - 0.25 * t) * r0 && t > 1.0 / 1024.0) {
            t *= 0.5;
            pnext = p + t * dp;
            rnext = residual4(pnext);
        }
        if (t <= 1.0 / 1024.0 && rnext.norm() >= r0)
            throw FibreSolveFailure("damped Newton stalled solving the momentum fibre");
        p = pnext;
        r = rnext;
    }
    if (r.lpNorm<Eigen::Infinity>() <= opts.tol * vscale) return p;
    std::ostringstream os;
    os << "fibre Newton did not converge in " << opts.max_iters
       << " iterations (|r| = " << r.lpNorm<Eigen::Infinity>() << ")";
    throw FibreSolveFailure(os.str());
}

VectorFieldHandle induced_field(const SystemSpec& spec, const NewtonOptions& opts) {
    VectorFieldHandle dae = dae_field(spec);
    VectorFieldHandle h;
    h.dimension = 5;
    h.label = "induced:" + spec.label;
    h.eval = [spec, dae, opts](const Vec& x) {
        const auto& par = spec.params;
        const ReducedState s = ReducedState::from_vector(Vec5(x));
        const double a1 = alpha1(spec, s.q3);
        const Vec3 q{s.q1, s.q2, s.q3};
        const FullState s0 = embed(spec, s);

        // Velocities of the unperturbed state; lies in D by construction.
        const Vec3 v{s0.p1 / par.m1, s0.p2 / par.m2, spec.dFdp3(s.q3, s.p3)};

        // Matching point on the perturbed manifold and the field there.
        const Vec3 pe = perturbed_manifold_solve(spec, q, v, opts);
        Vec6 xe;
        xe << q[0], q[1], q[2], pe[0], pe[1], pe[2];
        const Vec w = dae.eval(xe);

        // Pull the tangent back through the fibre isomorphism
        // Theta: M_eps -> M0, defined by dH0/dp(q, P) = dH_eps/dp(q, p).
        Vec6 hg = Vec6::Zero();
        if (spec.perturbed())
            hg = spec.epsilon * hess_g_times(*spec.perturbation, xe, Vec6(w));
        const double dVe1 = w[3] / par.m1 + hg[3];
        const double dVe2 = w[4] / par.m2 + hg[4];
        const double dVe3 = d2F_dp3dq3(spec, s.q3, pe[2]) * w[2] +
                            d2F_dp3dp3(spec, s.q3, pe[2]) * w[5] + hg[5];

        const double dP1 = par.m1 * dVe1;
        const double Fpp0 = d2F_dp3dp3(spec, s.q3, s.p3);
        if (std::abs(Fpp0) < 1e-12)
            throw FibreSolveFailure("subsystem fibre map degenerate (d2F/dp3^2 ~ 0)");
        const double dP3 = (dVe3 - d2F_dp3dq3(spec, s.q3, s.p3) * w[2]) / Fpp0;

        // Chart differential: p = P1/alpha1(q3).
        const double a1p = alpha1_prime(spec, s.q3);
        Vec dx(5);
        dx[0] = w[0];
        dx[1] = w[1];
        dx[2] = w[2];
        dx[3] = dP1 / a1 - s0.p1 * a1p * w[2] / (a1 * a1);
        dx[4] = dP3;
        return dx;
    };
    return h;
}

} // namespace nonholo
