#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nonholo/model.hpp"

using namespace nonholo;

namespace {

SystemSpec zero_coupling_spec(double m1) {
    SystemSpec spec = presets::decoupled();
    spec.params.m1 = m1;
    return spec;
}

SystemSpec generic_masses_spec() {
    SystemSpec spec;
    spec.params = {2.0, 3.0, 4.0, 5.0};
    spec.coupling = make_coupling("linear");
    spec.subsystem = make_subsystem("harmonic");
    spec.label = "generic";
    return spec;
}

std::mt19937_64 rng(12345);

double uniform(double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

ReducedState random_reduced() {
    return {uniform(-2, 2), uniform(-2, 2), uniform(-2, 2), uniform(-2, 2), uniform(-2, 2)};
}

} // namespace

TEST(Alpha, ClosedFormValues) {
    const SystemSpec contact = presets::contact();
    EXPECT_DOUBLE_EQ(alpha1(zero_coupling_spec(2.0), 0.7), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(alpha1(contact, 0.0), 1.0);
    EXPECT_NEAR(alpha1(contact, 1.0), 0.7071067811865476, 1e-16);
    EXPECT_DOUBLE_EQ(alpha2(zero_coupling_spec(2.0), -1.3), 0.0);
    EXPECT_NEAR(alpha2(contact, 1.0), -0.7071067811865476, 1e-16);
    EXPECT_NEAR(alpha2(contact, -2.0), 0.8944271909999159, 1e-15);
}

TEST(Alpha, NormalizationIdentity) {
    for (const SystemSpec& spec : {presets::contact(), presets::cvt(), generic_masses_spec()}) {
        for (int i = 0; i <= 40; ++i) {
            const double q3 = -0.9 + 1.8 * i / 40.0;
            const double a1 = alpha1(spec, q3);
            const double a2 = alpha2(spec, q3);
            EXPECT_NEAR(a1 * a1 / spec.params.m1 + a2 * a2 / spec.params.m2, 1.0, 1e-12);
        }
    }
}

TEST(Alpha, DerivativeIdentity) {
    // alpha1 alpha1'/m1 + alpha2 alpha2'/m2 = 0; also the analytic primes must
    // match central differences of the alphas.
    for (const SystemSpec& spec : {presets::contact(), generic_masses_spec()}) {
        for (int i = 0; i <= 20; ++i) {
            const double q3 = -2.0 + 4.0 * i / 20.0;
            const double a1 = alpha1(spec, q3);
            const double a2 = alpha2(spec, q3);
            const double d1 = alpha1_prime(spec, q3);
            const double d2 = alpha2_prime(spec, q3);
            EXPECT_NEAR(a1 * d1 / spec.params.m1 + a2 * d2 / spec.params.m2, 0.0, 1e-12);
            const double h = 1e-5;
            const double fd1 = (alpha1(spec, q3 + h) - alpha1(spec, q3 - h)) / (2 * h);
            const double fd2 = (alpha2(spec, q3 + h) - alpha2(spec, q3 - h)) / (2 * h);
            EXPECT_NEAR(d1, fd1, 1e-6 * std::max(1.0, std::abs(fd1)));
            EXPECT_NEAR(d2, fd2, 1e-6 * std::max(1.0, std::abs(fd2)));
        }
    }
}

TEST(Embed, Examples) {
    const SystemSpec contact = presets::contact();
    FullState s = embed(contact, {0, 0, 0, 1, 0});
    EXPECT_DOUBLE_EQ(s.p1, 1.0);
    EXPECT_DOUBLE_EQ(s.p2, 0.0);
    EXPECT_DOUBLE_EQ(s.p3, 0.0);

    s = embed(contact, {1, 1, 1, std::sqrt(2.0), 0});
    EXPECT_NEAR(s.p1, 1.0, 1e-15);
    EXPECT_NEAR(s.p2, -1.0, 1e-15);

    s = embed(zero_coupling_spec(4.0), {0, 0, 5, 1, 0});
    EXPECT_DOUBLE_EQ(s.p1, 2.0);
    EXPECT_DOUBLE_EQ(s.p2, 0.0);
}

TEST(Project, ExamplesAndGuard) {
    const SystemSpec contact = presets::contact();
    ReducedState r = project(contact, {0, 0, 0, 1, 0, 0});
    EXPECT_DOUBLE_EQ(r.p, 1.0);

    r = project(contact, {1, 1, 1, 1, -1, 0});
    EXPECT_NEAR(r.p, std::sqrt(2.0), 1e-15);

    EXPECT_THROW(project(contact, {0, 0, 0, 1, 1, 0}, 1e-10), ConstraintViolation);
}

TEST(Project, RoundTripAndResidual) {
    for (const SystemSpec& spec : {presets::contact(), generic_masses_spec()}) {
        for (int i = 0; i < 50; ++i) {
            const ReducedState s = random_reduced();
            const FullState f = embed(spec, s);
            EXPECT_LE(std::abs(constraint_residual(spec, f)), 1e-14);
            const ReducedState back = project(spec, f, 1e-12);
            EXPECT_LE((back.to_vector() - s.to_vector()).cwiseAbs().maxCoeff(), 1e-14);
        }
    }
}

TEST(ConstraintResidual, Examples) {
    const SystemSpec contact = presets::contact();
    EXPECT_DOUBLE_EQ(constraint_residual(contact, {0, 0, 0, 1, 0, 0}), 0.0);
    EXPECT_DOUBLE_EQ(constraint_residual(contact, {0, 0, 1, 1, 0, 0}), 1.0);
    EXPECT_DOUBLE_EQ(constraint_residual(contact, {0, 0, 1, 1, -1, 0}), 0.0);
}

TEST(ConstraintResidual, PerturbedVelocityMap) {
    // With G = p1^2/2 the velocity map gains eps*p1 in the first slot.
    SystemSpec spec = presets::contact();
    spec.perturbation = make_perturbation("p1_quadratic");
    spec.epsilon = 0.01;
    const FullState s{0, 0, 1, 1, 0, 0};
    EXPECT_NEAR(constraint_residual(spec, s), 1.0 * (1.0 + 0.01), 1e-15);
}

TEST(Hamiltonian, Examples) {
    SystemSpec contact = presets::contact();
    EXPECT_DOUBLE_EQ(hamiltonian(contact, {1, 0, 0, 0, 0, 0}), 0.5);
    EXPECT_DOUBLE_EQ(hamiltonian(contact, {0, 0, 0, 1, 0, 1}), 1.0);

    contact.perturbation = make_perturbation("q1_quartic");
    contact.epsilon = 0.01;
    EXPECT_DOUBLE_EQ(hamiltonian(contact, {1, 0, 0, 0, 0, 0}), 0.51);
}

TEST(Reversal, InvolutionAndEquivariance) {
    const FullState f = reversal(FullState{1, 2, 3, 4, 5, 6});
    EXPECT_EQ(f.p1, -4.0);
    EXPECT_EQ(f.p2, -5.0);
    EXPECT_EQ(f.p3, -6.0);
    const ReducedState r = reversal(ReducedState{1, 2, 3, 4, 5});
    EXPECT_EQ(r.p, -4.0);
    EXPECT_EQ(r.p3, -5.0);

    const FullState fixed{1, 2, 3, 0, 0, 0};
    EXPECT_EQ((reversal(fixed).to_vector() - fixed.to_vector()).cwiseAbs().maxCoeff(), 0.0);

    const SystemSpec contact = presets::contact();
    for (int i = 0; i < 20; ++i) {
        const ReducedState s = random_reduced();
        EXPECT_EQ((reversal(reversal(s)).to_vector() - s.to_vector()).cwiseAbs().maxCoeff(), 0.0);
        // rho commutes with the chart inverse.
        EXPECT_EQ((embed(contact, reversal(s)).to_vector() -
                   reversal(embed(contact, s)).to_vector())
                      .cwiseAbs()
                      .maxCoeff(),
                  0.0);
    }
}

TEST(Hamiltonian, ReversalInvariance) {
    SystemSpec spec = presets::contact();
    for (int i = 0; i < 20; ++i) {
        const FullState s = embed(spec, random_reduced());
        EXPECT_DOUBLE_EQ(hamiltonian(spec, reversal(s)), hamiltonian(spec, s));
    }
    spec.perturbation = make_perturbation("q1_quartic");
    spec.epsilon = 0.3;
    for (int i = 0; i < 20; ++i) {
        const FullState s = embed(spec, random_reduced());
        EXPECT_DOUBLE_EQ(hamiltonian(spec, reversal(s)), hamiltonian(spec, s));
    }
}

TEST(Params, Validation) {
    Params p;
    p.m1 = -1.0;
    EXPECT_THROW(p.validate(), SpecError);
    try {
        p.validate();
        FAIL();
    } catch (const SpecError& e) {
        EXPECT_NE(std::string(e.what()).find("m1"), std::string::npos);
    }
    SystemSpec spec = presets::contact();
    spec.epsilon = -0.5;
    EXPECT_THROW(spec.validate(), SpecError);
    spec.epsilon = 0.5; // no perturbation set
    EXPECT_THROW(spec.validate(), SpecError);
}

TEST(Coupling, CvtDomainGuard) {
    const SystemSpec cvt = presets::cvt();
    EXPECT_NEAR(cvt.f(0.5), 1.0, 1e-15);
    EXPECT_THROW(cvt.f(1.0), DomainViolation);
    EXPECT_THROW(alpha1(cvt, 1.5), DomainViolation);
    EXPECT_NO_THROW(alpha1(cvt, 0.99));
}

TEST(Catalogue, DerivativeConsistency) {
    const std::vector<double> grid{-2.0, -0.5, 0.0, 0.3, 0.7};
    const std::vector<std::pair<double, double>> qp{{0.1, 0.2}, {-1.0, 0.5}, {0.8, -0.7}};
    const std::vector<double> poly{0.5, -1.0, 0.25, 0.125};

    for (const char* name : {"linear", "zero", "cvt"})
        EXPECT_LT(coupling_derivative_defect(make_coupling(name), grid), 1e-6) << name;
    EXPECT_LT(coupling_derivative_defect(make_coupling("polynomial", poly), grid), 1e-6);

    for (const char* name : {"harmonic", "quartic"})
        EXPECT_LT(subsystem_gradient_defect(make_subsystem(name), qp), 1e-6) << name;
    EXPECT_LT(subsystem_gradient_defect(make_subsystem("polynomial", poly), qp), 1e-6);

    std::vector<Vec6> pts;
    for (int i = 0; i < 5; ++i) {
        Vec6 x;
        x << uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), uniform(-1, 1),
            uniform(-1, 1);
        pts.push_back(x);
    }
    for (const char* name : {"q1_quartic", "p1_quadratic", "mixed_nonreversible"}) {
        const auto g = make_perturbation(name);
        ASSERT_TRUE(g.has_value()) << name;
        EXPECT_LT(perturbation_gradient_defect(*g, pts), 1e-6) << name;
    }
    EXPECT_FALSE(make_perturbation("none").has_value());
    EXPECT_THROW(make_perturbation("bogus"), SpecError);
    EXPECT_THROW(make_coupling("bogus"), SpecError);
    EXPECT_THROW(make_subsystem("bogus"), SpecError);
}

TEST(Catalogue, ReversibilityFlags) {
    const std::vector<std::pair<double, double>> qp{{0.1, 0.2}, {-1.0, 0.5}, {0.8, -0.7}};
    std::vector<Vec6> pts;
    for (int i = 0; i < 8; ++i) {
        Vec6 x;
        x << uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), uniform(-1, 1),
            uniform(-1, 1);
        pts.push_back(x);
    }
    EXPECT_EQ(subsystem_reversibility_defect(make_subsystem("harmonic"), qp), 0.0);
    EXPECT_EQ(subsystem_reversibility_defect(make_subsystem("quartic"), qp), 0.0);
    EXPECT_EQ(perturbation_reversibility_defect(*make_perturbation("q1_quartic"), pts), 0.0);
    EXPECT_EQ(perturbation_reversibility_defect(*make_perturbation("p1_quadratic"), pts), 0.0);
    const auto mixed = *make_perturbation("mixed_nonreversible");
    EXPECT_FALSE(mixed.reversible);
    EXPECT_GT(perturbation_reversibility_defect(mixed, pts), 1e-3);
}
