#include "nonholo/floquet.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace nonholo {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_unit(double x) {
    double w = x - std::floor(x);
    if (w >= 1.0) w -= 1.0; // floor rounding at the seam
    return w;
}

VectorFieldHandle subsystem_field(const SystemSpec& spec) {
    VectorFieldHandle h;
    h.dimension = 2;
    h.label = "subsystem:" + spec.subsystem.label;
    h.eval = [spec](const Vec& x) {
        Vec dx(2);
        dx[0] = spec.dFdp3(x[0], x[1]);
        dx[1] = -spec.dFdq3(x[0], x[1]);
        return dx;
    };
    return h;
}

// z = (W column-major | q3, p3) in the rescaled time theta = t/T3.
VectorFieldHandle theta_frame_field(const SystemSpec& spec, double period) {
    VectorFieldHandle h;
    h.dimension = 11;
    h.label = "floquet-frame:" + spec.label;
    h.eval = [spec, period](const Vec& z) {
        const double q3 = z[9];
        const double p3 = z[10];
        const Mat3 A = period * skew_field_B(spec, q3);
        Eigen::Map<const Mat3> W(z.data());
        Vec dz(11);
        Eigen::Map<Mat3>(dz.data()) = A * W;
        dz[9] = period * spec.dFdp3(q3, p3);
        dz[10] = -period * spec.dFdq3(q3, p3);
        return dz;
    };
    return h;
}

Vec frame_initial_state(const SubsystemOrbit& orbit) {
    Vec z0 = Vec::Zero(11);
    Eigen::Map<Mat3>(z0.data()) = Mat3::Identity();
    z0[9] = orbit.basepoint_q3;
    z0[10] = 0.0;
    return z0;
}

Mat3 extract_W(const Vec& z) { return Eigen::Map<const Mat3>(z.data()); }

Mat3 project_to_so3(const Mat3& R) {
    Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 out = svd.matrixU() * svd.matrixV().transpose();
    if (out.determinant() < 0.0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1.0;
        out = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return out;
}

const Mat3 kRho = (Mat3() << 1, 0, 0, 0, 1, 0, 0, 0, -1).finished();

} // namespace

std::pair<double, double> SubsystemOrbit::state_at(double theta) const {
    if (equilibrium) return {basepoint_q3, 0.0};
    const double t = wrap_unit(theta) * period;
    const Vec s = dense->eval(t);
    return {s[0], s[1]};
}

SubsystemOrbit subsystem_orbit(const SystemSpec& spec, double a, const OrbitOptions& opts,
                               const StepperConfig& cfg) {
    // Roots of F(q3, 0) = a in the window, by grid scan plus bisection.
    const auto level = [&](double q3) { return spec.F(q3, 0.0) - a; };
    constexpr int kGrid = 4096;
    std::vector<double> roots;
    double prev_q = opts.window_min;
    double prev_g = level(prev_q);
    for (int i = 1; i <= kGrid; ++i) {
        const double q = opts.window_min +
                         (opts.window_max - opts.window_min) * static_cast<double>(i) / kGrid;
        const double g = level(q);
        if (prev_g == 0.0) {
            roots.push_back(prev_q);
        } else if (prev_g * g < 0.0) {
            double lo = prev_q, hi = q, glo = prev_g;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
                const double mid = 0.5 * (lo + hi);
                const double gm = level(mid);
                if (gm == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if ((gm > 0.0) == (glo > 0.0)) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        prev_q = q;
        prev_g = g;
    }
    if (prev_g == 0.0) roots.push_back(prev_q);
    if (roots.empty()) {
        std::ostringstream os;
        os << "F(q3, 0) = " << a << " has no root in [" << opts.window_min << ", "
           << opts.window_max << "]";
        throw NoSectionCrossing(os.str());
    }

    double q3_star;
    if (std::isnan(opts.seed_q3)) {
        q3_star = roots.back();
    } else {
        q3_star = roots.front();
        for (double r : roots)
            if (std::abs(r - opts.seed_q3) < std::abs(q3_star - opts.seed_q3)) q3_star = r;
    }

    SubsystemOrbit orbit;
    orbit.a = a;
    orbit.basepoint_q3 = q3_star;

    const double p3dot0 = -spec.dFdq3(q3_star, 0.0);
    if (std::abs(p3dot0) < 1e-12) {
        orbit.equilibrium = true;
        orbit.period = std::numeric_limits<double>::infinity();
        orbit.omega = 0.0;
        orbit.crossing_sign = 0;
        return orbit;
    }
    orbit.crossing_sign = p3dot0 > 0.0 ? 1 : -1;

    const VectorFieldHandle field = subsystem_field(spec);
    Vec x0(2);
    x0 << q3_star, 0.0;
    const auto ret = integrate_to_event(
        field, x0, 0.0, [](const Vec& x) { return x[1]; }, orbit.crossing_sign, opts.time_cap,
        cfg);
    if (!ret) {
        std::ostringstream os;
        os << "no first return to the section within time cap " << opts.time_cap;
        throw NoClosedOrbit(os.str());
    }
    orbit.period = ret->t;
    orbit.omega = 1.0 / orbit.period;
    orbit.dense = std::make_shared<DenseSolution>(
        reference_dense(field, x0, 0.0, orbit.period, cfg));
    return orbit;
}

Mat3 skew_field_B(const SystemSpec& spec, double q3) {
    const auto& p = spec.params;
    const double b1 = std::sqrt(p.k1) * alpha1(spec, q3) / p.m1;
    const double b2 = std::sqrt(p.k2) * alpha2(spec, q3) / p.m2;
    Mat3 B = Mat3::Zero();
    B(0, 2) = b1;
    B(1, 2) = b2;
    B(2, 0) = -b1;
    B(2, 1) = -b2;
    return B;
}

Mat3 skew_field_B(const SystemSpec& spec, const SubsystemOrbit& orbit, double theta) {
    return skew_field_B(spec, orbit.state_at(theta).first);
}

Mat3 hat(const Vec3& w) {
    Mat3 m;
    m << 0, -w[2], w[1], w[2], 0, -w[0], -w[1], w[0], 0;
    return m;
}

Mat3 so3_exp(const Vec3& w) {
    const double th = w.norm();
    const Mat3 K = hat(w);
    if (th < 1e-8) return Mat3::Identity() + K + 0.5 * K * K;
    return Mat3::Identity() + (std::sin(th) / th) * K + ((1.0 - std::cos(th)) / (th * th)) * K * K;
}

So3Log so3_log(const Mat3& R, double tol) {
    const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
    const double det = R.determinant();
    if (ortho > tol || std::abs(det - 1.0) > tol) {
        std::ostringstream os;
        os << "input is not a rotation: orthogonality defect " << ortho << ", det " << det;
        throw NotARotation(os.str());
    }
    // atan2 of the skew-part norm against (trace-1)/2 stays well conditioned
    // near the identity, where acos of the trace alone loses half the digits.
    Vec3 w{0.5 * (R(2, 1) - R(1, 2)), 0.5 * (R(0, 2) - R(2, 0)), 0.5 * (R(1, 0) - R(0, 1))};
    const double s = w.norm();
    const double c = 0.5 * (R.trace() - 1.0);
    const double sigma = std::atan2(s, c);
    if (sigma > kPi - kResonanceTol)
        throw HalfTurn("rotation angle within tolerance of pi; principal axis is ambiguous");
    So3Log out;
    out.sigma = sigma;
    if (sigma < 1e-12 || s == 0.0) {
        out.Abar = Mat3::Zero();
        out.axis = Vec3::Zero();
        out.sigma = std::max(sigma, 0.0);
        return out;
    }
    out.axis = w / s;
    out.Abar = sigma * hat(out.axis);
    return out;
}

MonodromyResult monodromy(const SystemSpec& spec, const SubsystemOrbit& orbit,
                          const StepperConfig& cfg) {
    if (orbit.equilibrium || orbit.omega == 0.0)
        throw OmegaZero("omega(a) = 0: use the frozen-coefficient branch of compute_floquet");
    const VectorFieldHandle field = theta_frame_field(spec, orbit.period);
    const Vec z1 = reference_endpoint(field, frame_initial_state(orbit), 0.0, 1.0, cfg);
    MonodromyResult out;
    out.Phi1 = extract_W(z1);
    out.ortho_defect = (out.Phi1.transpose() * out.Phi1 - Mat3::Identity()).cwiseAbs().maxCoeff();
    out.det_defect = std::abs(out.Phi1.determinant() - 1.0);
    return out;
}

Mat3 flow_Phi(const SystemSpec& spec, const SubsystemOrbit& orbit, double theta,
              const StepperConfig& cfg) {
    if (orbit.equilibrium || orbit.omega == 0.0)
        throw OmegaZero("omega(a) = 0: the rescaled flow is not defined");
    if (theta == 0.0) return Mat3::Identity();
    const VectorFieldHandle field = theta_frame_field(spec, orbit.period);
    const Vec z = reference_endpoint(field, frame_initial_state(orbit), 0.0, theta, cfg);
    return extract_W(z);
}

PhiFlow PhiFlow::from_dense(std::shared_ptr<const DenseSolution> dense, const Mat3& Phi1) {
    PhiFlow out;
    out.dense_ = std::move(dense);
    out.Phi1_ = Phi1;
    out.Phi1_inv_ = Phi1.inverse();
    return out;
}

PhiFlow PhiFlow::frozen(const Mat3& B0) {
    PhiFlow out;
    out.frozen_ = true;
    out.w0_ = Vec3{-B0(1, 2), B0(0, 2), -B0(0, 1)};
    return out;
}

Mat3 PhiFlow::eval(double theta) const {
    if (frozen_) return so3_exp(theta * w0_);
    const double n = std::floor(theta);
    const double frac = theta - n;
    Mat3 out = extract_W(dense_->eval(frac));
    // Phi(theta + n) = Phi(frac) Phi(1)^n
    for (int i = 0; i < static_cast<int>(n); ++i) out = out * Phi1_;
    for (int i = 0; i > static_cast<int>(n); --i) out = out * Phi1_inv_;
    return out;
}

FloquetData compute_floquet(const SystemSpec& spec, const SubsystemOrbit& orbit,
                            const StepperConfig& cfg) {
    FloquetData fd;
    fd.a = orbit.a;
    fd.omega = orbit.omega;

    if (orbit.equilibrium || orbit.omega == 0.0) {
        // Frozen branch: B is constant on the degenerate level, the flow is
        // the plain matrix exponential and xi is its rotation rate.
        const Mat3 B0 = skew_field_B(spec, orbit.basepoint_q3);
        const Vec3 w0{-B0(1, 2), B0(0, 2), -B0(0, 1)};
        fd.Phi1 = so3_exp(w0);
        const double speed = w0.norm(); // radians per unit time
        double rem = std::remainder(speed, 2.0 * kPi);
        Vec3 axis = speed > 0.0 ? Vec3(w0 / speed) : Vec3::Zero();
        if (rem < 0.0) {
            rem = -rem;
            axis = -axis;
        }
        fd.sigma = rem;
        fd.axis = rem > 0.0 ? axis : Vec3::Zero();
        fd.Abar = rem * hat(fd.axis);
        fd.xi = speed / (2.0 * kPi);
        fd.resonant = fd.sigma < kResonanceTol || fd.sigma > kPi - kResonanceTol;
        fd.exp_defect = (so3_exp(fd.sigma * fd.axis) - fd.Phi1).cwiseAbs().maxCoeff();
        fd.flow = std::make_shared<PhiFlow>(PhiFlow::frozen(B0));
        return fd;
    }

    const VectorFieldHandle field = theta_frame_field(spec, orbit.period);
    auto dense = std::make_shared<DenseSolution>(
        reference_dense(field, frame_initial_state(orbit), 0.0, 1.0, cfg));
    fd.Phi1 = extract_W(dense->eval(1.0));
    fd.ortho_defect = (fd.Phi1.transpose() * fd.Phi1 - Mat3::Identity()).cwiseAbs().maxCoeff();
    fd.det_defect = std::abs(fd.Phi1.determinant() - 1.0);
    fd.flow = std::make_shared<PhiFlow>(PhiFlow::from_dense(dense, fd.Phi1));

    const Mat3 R = project_to_so3(fd.Phi1);
    bool half_turn = false;
    try {
        const So3Log lg = so3_log(R, 1e-6);
        fd.Abar = lg.Abar;
        fd.sigma = lg.sigma;
        fd.axis = lg.axis;
    } catch (const HalfTurn&) {
        half_turn = true;
        // Keep the log data representable: angle pi about the symmetric-part
        // axis; downstream reversible constructions refuse this torus.
        fd.sigma = kPi;
        Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (R + R.transpose()));
        Eigen::Index imax;
        es.eigenvalues().maxCoeff(&imax);
        fd.axis = es.eigenvectors().col(imax).normalized();
        fd.Abar = kPi * hat(fd.axis);
    }
    fd.exp_defect = (so3_exp(fd.sigma * fd.axis) - fd.Phi1).cwiseAbs().maxCoeff();
    fd.xi = fd.omega * fd.sigma / (2.0 * kPi);
    fd.resonant = half_turn || fd.sigma < kResonanceTol || fd.sigma > kPi - kResonanceTol;
    return fd;
}

Vec3 psi_transform(const SystemSpec& spec, const SubsystemOrbit& orbit, const FloquetData& fd,
                   const Vec3& u, double theta) {
    (void)spec;
    (void)orbit;
    if (fd.sigma > kPi - kResonanceTol)
        throw HalfTurn("Psi is not reversible on a half-turn torus");
    const double tw = wrap_unit(theta);
    const Mat3 Phi = fd.flow->eval(tw);
    return so3_exp(fd.sigma * tw * fd.axis) * Phi.inverse() * u;
}

double orbit_phase(const SystemSpec& spec, const SubsystemOrbit& orbit, double q3, double p3,
                   const StepperConfig& cfg) {
    if (orbit.equilibrium) return 0.0;
    const VectorFieldHandle field = subsystem_field(spec);
    Vec x0(2);
    x0 << q3, p3;
    const auto ret = integrate_to_event(
        field, x0, 0.0, [](const Vec& x) { return x[1]; }, orbit.crossing_sign,
        2.5 * orbit.period, cfg);
    if (!ret) throw NoClosedOrbit("no section return when measuring the orbit phase");
    return wrap_unit(1.0 - ret->t * orbit.omega);
}

Vec3 u_coords(const SystemSpec& spec, const ReducedState& s) {
    return {std::sqrt(spec.params.k1) * s.q1, std::sqrt(spec.params.k2) * s.q2, s.p};
}

ActionAngle action_angle_coords(const SystemSpec& spec, const SubsystemOrbit& orbit,
                                const FloquetData& fd, const ReducedState& s,
                                const StepperConfig& cfg) {
    if (fd.sigma > kPi - kResonanceTol)
        throw HalfTurn("action-angle chart undefined on a half-turn torus");
    if (fd.sigma <= kResonanceTol)
        throw DegenerateRotation("sigma ~ 0: rotation plane undefined; report v directly");

    ActionAngle out;
    out.a = spec.F(s.q3, s.p3);
    out.theta = orbit_phase(spec, orbit, s.q3, s.p3, cfg);
    const Vec3 u = u_coords(spec, s);
    out.v = psi_transform(spec, orbit, fd, u, out.theta);
    out.c = out.v.dot(fd.axis);
    out.b = (out.v - out.c * fd.axis).norm();

    // Plane basis: e1 = normalize(z x n), e2 = n x e1. For reversible tori
    // the axis lies in the (u1, u2) plane, so rho fixes e1 and flips e2 and
    // phi transforms as phi -> -phi. Right-handedness gives phidot = +xi.
    const Vec3 z = Vec3::UnitZ();
    Vec3 e1 = z.cross(fd.axis);
    if (e1.norm() < 1e-6) {
        const Vec3 x = Vec3::UnitX();
        e1 = x - x.dot(fd.axis) * fd.axis;
    }
    e1.normalize();
    const Vec3 e2 = fd.axis.cross(e1);
    // On the axis the plane angle is undefined; report 0.
    if (out.b <= 1e-9 * std::max(1.0, out.v.norm()))
        out.phi = 0.0;
    else
        out.phi = wrap_unit(std::atan2(out.v.dot(e2), out.v.dot(e1)) / (2.0 * kPi));
    return out;
}

FrequencyPair frequencies(const SystemSpec& spec, const SubsystemOrbit& orbit,
                          const FloquetData& fd) {
    (void)spec;
    (void)orbit;
    return {fd.omega, fd.omega * fd.sigma / (2.0 * kPi)};
}

ReversibilityReport check_reversibility(const SystemSpec& spec, const SubsystemOrbit& orbit,
                                        const FloquetData& fd, const StepperConfig& cfg) {
    if (fd.sigma > kPi - kResonanceTol)
        throw HalfTurn("reversibility identities are not guaranteed on a half-turn torus");
    ReversibilityReport rep;

    // (pre) rho A(theta) rho = -A(-theta) on a theta grid.
    for (int i = 0; i < 20; ++i) {
        const double theta = static_cast<double>(i) / 20.0;
        const Mat3 A1 = orbit.period * skew_field_B(spec, orbit, theta);
        const Mat3 A2 = orbit.period * skew_field_B(spec, orbit, -theta);
        rep.field_identity_defect =
            std::max(rep.field_identity_defect, (kRho * A1 * kRho + A2).cwiseAbs().maxCoeff());
    }

    // (i) rho Phi(-tau) = Phi(tau) rho, fresh integrations both ways.
    for (int i = 1; i <= 5; ++i) {
        const double tau = 0.2 * static_cast<double>(i);
        const Mat3 Pp = flow_Phi(spec, orbit, tau, cfg);
        const Mat3 Pm = flow_Phi(spec, orbit, -tau, cfg);
        rep.flow_defect =
            std::max(rep.flow_defect, (kRho * Pm - Pp * kRho).cwiseAbs().maxCoeff());
    }

    // (ii) rho Abar rho = -Abar.
    rep.generator_defect = (kRho * fd.Abar * kRho + fd.Abar).cwiseAbs().maxCoeff();

    // (iii) Psi(rho u, -theta) = rho Psi(u, theta) on sampled (u, theta).
    const Vec3 samples[4] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(),
                             Vec3(0.3, -1.1, 0.7)};
    const double thetas[3] = {0.15, 0.4, 0.73};
    for (const Vec3& u : samples) {
        for (double theta : thetas) {
            const Vec3 lhs = psi_transform(spec, orbit, fd, kRho * u, -theta);
            const Vec3 rhs = kRho * psi_transform(spec, orbit, fd, u, theta);
            rep.psi_defect = std::max(rep.psi_defect, (lhs - rhs).cwiseAbs().maxCoeff());
        }
    }
    return rep;
}

double classical_action(const SystemSpec& spec, const SubsystemOrbit& orbit,
                        const StepperConfig& cfg) {
    if (orbit.equilibrium) return 0.0;
    VectorFieldHandle h;
    h.dimension = 3;
    h.label = "action-quadrature";
    h.eval = [spec](const Vec& x) {
        Vec dx(3);
        dx[0] = spec.dFdp3(x[0], x[1]);
        dx[1] = -spec.dFdq3(x[0], x[1]);
        dx[2] = x[1] * dx[0]; // p3 dq3/dt
        return dx;
    };
    Vec x0(3);
    x0 << orbit.basepoint_q3, 0.0, 0.0;
    const Vec xT = reference_endpoint(h, x0, 0.0, orbit.period, cfg);
    return xT[2] / (2.0 * kPi);
}

} // namespace nonholo
