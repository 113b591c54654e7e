#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "nonholo/floquet.hpp"
#include "nonholo/integrators.hpp"

using namespace nonholo;

namespace {

VectorFieldHandle scalar_field(std::function<double(double)> f, const std::string& label) {
    VectorFieldHandle h;
    h.dimension = 1;
    h.label = label;
    h.eval = [f](const Vec& x) {
        Vec dx(1);
        dx[0] = f(x[0]);
        return dx;
    };
    return h;
}

VectorFieldHandle zero_field(int n) {
    VectorFieldHandle h;
    h.dimension = n;
    h.label = "zero";
    h.eval = [n](const Vec&) { return Vec(Vec::Zero(n)); };
    return h;
}

// Planar harmonic oscillator (q, p), H = (q^2 + p^2)/2.
VectorFieldHandle harmonic2() {
    VectorFieldHandle h;
    h.dimension = 2;
    h.label = "harmonic";
    h.eval = [](const Vec& x) {
        Vec dx(2);
        dx[0] = x[1];
        dx[1] = -x[0];
        return dx;
    };
    return h;
}

VectorFieldHandle contact_reduced() { return reduced_field(presets::contact()); }

Vec rho5(const Vec& x) {
    Vec out = x;
    out[3] = -x[3];
    out[4] = -x[4];
    return out;
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

} // namespace

TEST(Rk4, TrivialAndExponential) {
    Vec x0(1);
    x0 << 1.0;
    EXPECT_EQ(step_rk4(zero_field(1), x0, 0.25)[0], 1.0);

    const auto f = scalar_field([](double x) { return x; }, "exp");
    // Hand-evaluated tableau for xdot = x, h = 0.1.
    EXPECT_NEAR(step_rk4(f, x0, 0.1)[0], 1.1051708333333333, 1e-15);
}

TEST(Rk4, HarmonicEnergyDriftIsMonotone) {
    const auto f = harmonic2();
    Vec x(2);
    x << 1.0, 0.0;
    double prev_E = 0.5;
    bool nonincreasing = true;
    double final_E = prev_E;
    for (int i = 1; i <= 10000; ++i) {
        x = step_rk4(f, x, 0.1);
        if (i % 100 == 0) {
            const double E = 0.5 * (x[0] * x[0] + x[1] * x[1]);
            nonincreasing = nonincreasing && (E <= prev_E + 1e-15);
            prev_E = E;
            final_E = E;
        }
    }
    EXPECT_TRUE(nonincreasing);
    EXPECT_LT(final_E, 0.5 - 1e-6); // strictly dissipative, not just noise
}

TEST(ImplicitMidpoint, TrivialAndCayley) {
    StepperConfig cfg;
    Vec x0(1);
    x0 << 1.0;
    EXPECT_EQ(step_implicit_midpoint(zero_field(1), x0, 0.3, cfg)[0], 1.0);

    // For udot = A u the midpoint rule is the Cayley transform
    // (I - hA/2)^{-1} (I + hA/2); for skew A it preserves the norm.
    const auto f = harmonic2();
    Vec u(2);
    u << 0.8, -0.6;
    Eigen::Matrix2d A;
    A << 0, 1, -1, 0;
    const double h = 0.13;
    const Eigen::Matrix2d cayley = (Eigen::Matrix2d::Identity() - 0.5 * h * A).inverse() *
                                   (Eigen::Matrix2d::Identity() + 0.5 * h * A);
    const Vec got = step_implicit_midpoint(f, u, h, cfg);
    EXPECT_NEAR((got - Vec(cayley * u)).lpNorm<Eigen::Infinity>(), 0.0, 1e-12);
    EXPECT_NEAR(got.norm(), u.norm(), 1e-12);
}

TEST(ImplicitMidpoint, NormPreservationOnSkewSystem) {
    // Frozen coefficient matrix of the contact oscillator's u block.
    const SystemSpec contact = presets::contact();
    const Mat3 B = skew_field_B(contact, 0.6);
    VectorFieldHandle f;
    f.dimension = 3;
    f.label = "skew";
    f.eval = [B](const Vec& x) { return Vec(B * Vec3(x)); };

    StepperConfig cfg;
    Vec u(3);
    u << 1.0, -0.5, 0.25;
    const double n0 = u.norm();
    for (int i = 0; i < 200; ++i) {
        u = step_implicit_midpoint(f, u, 0.05, cfg);
        EXPECT_NEAR(u.norm(), n0, 10 * cfg.newton_tol);
    }
}

TEST(ImplicitMidpoint, NonConvergenceGuard) {
    StepperConfig cfg;
    cfg.newton_max_iters = 1;
    cfg.newton_tol = 1e-15;
    const auto f = scalar_field([](double x) { return std::sin(25.0 * x) * 40.0; }, "stiff");
    Vec x0(1);
    x0 << 0.3;
    EXPECT_THROW(step_implicit_midpoint(f, x0, 0.5, cfg), NonConvergence);
}

TEST(Reference, ConstantAndPeriodicReturn) {
    StepperConfig cfg;
    Vec x0(2);
    x0 << 1.0, 0.0;
    const std::vector<double> times{0.0, 1.0, 2.0};
    const Trajectory t0 = reference_solve(zero_field(2), x0, 0.0, times, cfg);
    ASSERT_EQ(t0.states.size(), 3u);
    EXPECT_EQ((t0.states[2] - x0).cwiseAbs().maxCoeff(), 0.0);

    const Vec xT = reference_endpoint(harmonic2(), x0, 0.0, kTwoPi, cfg);
    EXPECT_LE((xT - x0).cwiseAbs().maxCoeff(), cfg.reference_tol * 100);
}

TEST(Reference, DenseOutputAccuracy) {
    StepperConfig cfg;
    Vec x0(2);
    x0 << 1.0, 0.0;
    std::vector<double> times;
    for (int i = 0; i <= 200; ++i) times.push_back(10.0 * i / 200.0);
    const Trajectory traj = reference_solve(harmonic2(), x0, 0.0, times, cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        worst = std::max(worst, std::abs(traj.states[i][0] - std::cos(t)));
        worst = std::max(worst, std::abs(traj.states[i][1] + std::sin(t)));
    }
    EXPECT_LE(worst, 1e-9);
}

TEST(Reference, ContactEnergyConservation) {
    StepperConfig cfg;
    const SystemSpec contact = presets::contact();
    Vec s0(5);
    s0 << 1, 0, 0, 0, 1;
    const Vec sT = reference_endpoint(contact_reduced(), s0, 0.0, 100.0, cfg);
    const auto H = [&](const Vec& v) {
        return hamiltonian(contact, embed(contact, ReducedState::from_vector(Vec5(v))));
    };
    EXPECT_LE(std::abs(H(sT) - H(s0)), cfg.reference_tol * 100);
}

TEST(Reference, BackwardIntegration) {
    StepperConfig cfg;
    Vec x0(2);
    x0 << 0.3, 0.7;
    const Vec back = reference_endpoint(harmonic2(), x0, 0.0, -1.3, cfg);
    const Vec again = reference_endpoint(harmonic2(), back, -1.3, 0.0, cfg);
    EXPECT_LE((again - x0).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Reference, StepSizeUnderflowOnBlowup) {
    StepperConfig cfg;
    const auto f = scalar_field([](double x) { return x * x; }, "blowup");
    Vec x0(1);
    x0 << 1.0;
    EXPECT_THROW(reference_endpoint(f, x0, 0.0, 2.0, cfg), StepSizeUnderflow);
}

TEST(Events, HarmonicPeriod) {
    StepperConfig cfg;
    Vec x0(2);
    x0 << 1.0, 0.0;
    // p = x[1] starts at 0 and decreases; the first falling return is at 2*pi.
    const auto ev = integrate_to_event(
        harmonic2(), x0, 0.0, [](const Vec& x) { return x[1]; }, -1, 100.0, cfg);
    ASSERT_TRUE(ev.has_value());
    EXPECT_NEAR(ev->t, kTwoPi, 1e-10);
    EXPECT_NEAR(ev->state[0], 1.0, 1e-9);

    // Rising crossing happens half a period earlier.
    const auto half = integrate_to_event(
        harmonic2(), x0, 0.0, [](const Vec& x) { return x[1]; }, +1, 100.0, cfg);
    ASSERT_TRUE(half.has_value());
    EXPECT_NEAR(half->t, std::numbers::pi, 1e-10);

    // No crossing before the cap.
    const auto none = integrate_to_event(
        harmonic2(), x0, 0.0, [](const Vec& x) { return x[1] - 5.0; }, 0, 50.0, cfg);
    EXPECT_FALSE(none.has_value());
}

TEST(ReversibilityDefect, MidpointVsRk4) {
    StepperConfig cfg;
    const auto field = contact_reduced();
    Vec s(5);
    s << 0.7, -0.4, 0.3, 0.5, -0.8;
    const double mid = reversibility_defect(field, Method::implicit_midpoint, s, 0.1, cfg, rho5);
    EXPECT_LE(mid, 1e-10); // 10x newton_tol headroom
    const double rk = reversibility_defect(field, Method::rk4, s, 0.1, cfg, rho5);
    EXPECT_GT(rk, 1e-12);
    EXPECT_LT(rk, 1e-4); // O(h^5) magnitude

    // Fixed point of rho with a vanishing field: defect is exactly zero.
    Vec origin = Vec::Zero(5);
    EXPECT_EQ(reversibility_defect(field, Method::implicit_midpoint, origin, 0.1, cfg, rho5),
              0.0);
}

TEST(OrderOfAccuracy, GlobalErrorRatios) {
    StepperConfig cfg;
    const auto field = contact_reduced();
    Vec s0(5);
    s0 << 1, 0, 0, 0, 1;
    const double t_end = 5.0;
    const Vec ref = reference_endpoint(field, s0, 0.0, t_end, cfg);

    auto global_error = [&](Method m, double h) {
        StepperConfig c = cfg;
        c.h = h;
        const int n = static_cast<int>(std::llround(t_end / h));
        const Trajectory tr = fixed_step_solve(field, s0, 0.0, n, m, c, n);
        return (tr.states.back() - ref).lpNorm<Eigen::Infinity>();
    };

    const double rk_ratio = global_error(Method::rk4, 0.05) / global_error(Method::rk4, 0.025);
    EXPECT_GE(rk_ratio, 12.0);
    EXPECT_LE(rk_ratio, 20.0);

    const double mid_ratio = global_error(Method::implicit_midpoint, 0.05) /
                             global_error(Method::implicit_midpoint, 0.025);
    EXPECT_GE(mid_ratio, 3.4);
    EXPECT_LE(mid_ratio, 4.6);
}

TEST(Determinism, BitwiseIdenticalTrajectories) {
    StepperConfig cfg;
    cfg.h = 0.05;
    const auto field = contact_reduced();
    Vec s0(5);
    s0 << 0.9, 0.1, -0.2, 0.4, 0.8;
    const Trajectory a = fixed_step_solve(field, s0, 0.0, 200, Method::implicit_midpoint, cfg);
    const Trajectory b = fixed_step_solve(field, s0, 0.0, 200, Method::implicit_midpoint, cfg);
    ASSERT_EQ(a.states.size(), b.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i)
        EXPECT_EQ(std::memcmp(a.states[i].data(), b.states[i].data(),
                              sizeof(double) * a.states[i].size()),
                  0);
}

TEST(StepperConfig, Validation) {
    StepperConfig cfg;
    cfg.h = 0.0;
    EXPECT_THROW(cfg.validate(), SpecError);
    cfg = {};
    cfg.newton_tol = -1;
    EXPECT_THROW(cfg.validate(), SpecError);
    EXPECT_EQ(method_from_string("midpoint"), Method::implicit_midpoint);
    EXPECT_EQ(method_from_string("rk4"), Method::rk4);
    EXPECT_THROW(method_from_string("euler"), SpecError);
}
