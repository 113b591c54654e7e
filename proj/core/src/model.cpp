#include "nonholo/model.hpp"

#include <cmath>
#include <sstream>

namespace nonholo {

namespace {

double poly_eval(std::span<const double> c, double x) {
    double y = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) y = y * x + *it;
    return y;
}

double poly_deriv_eval(std::span<const double> c, double x) {
    double y = 0.0;
    for (std::size_t i = c.size(); i-- > 1;) y = y * x + static_cast<double>(i) * c[i];
    return y;
}

[[noreturn]] void fail_spec(const std::string& what) { throw SpecError(what); }

} // namespace

void Params::validate() const {
    auto check = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            std::ostringstream os;
            os << "Params invariant violated: " << name << " > 0 required, got " << v;
            fail_spec(os.str());
        }
    };
    check(m1, "m1");
    check(m2, "m2");
    check(k1, "k1");
    check(k2, "k2");
}

Vec6 FullState::to_vector() const {
    Vec6 x;
    x << q1, q2, q3, p1, p2, p3;
    return x;
}

FullState FullState::from_vector(const Vec6& x) {
    return {x[0], x[1], x[2], x[3], x[4], x[5]};
}

Vec5 ReducedState::to_vector() const {
    Vec5 x;
    x << q1, q2, q3, p, p3;
    return x;
}

ReducedState ReducedState::from_vector(const Vec5& x) {
    return {x[0], x[1], x[2], x[3], x[4]};
}

double SystemSpec::f(double q3) const {
    if (!coupling.in_domain(q3)) {
        std::ostringstream os;
        os << "coupling '" << coupling.label << "' evaluated at q3 = " << q3
           << " outside its validity interval (" << coupling.q3_min << ", " << coupling.q3_max
           << ")";
        throw DomainViolation(os.str());
    }
    return coupling.f(q3);
}

double SystemSpec::df(double q3) const {
    if (!coupling.in_domain(q3)) {
        std::ostringstream os;
        os << "coupling '" << coupling.label << "' derivative evaluated at q3 = " << q3
           << " outside its validity interval (" << coupling.q3_min << ", " << coupling.q3_max
           << ")";
        throw DomainViolation(os.str());
    }
    return coupling.df(q3);
}

void SystemSpec::validate() const {
    params.validate();
    if (!coupling.f || !coupling.df) fail_spec("coupling functions f, df must be set");
    if (!subsystem.F || !subsystem.dFdq3 || !subsystem.dFdp3)
        fail_spec("subsystem F and both partials must be set");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
        std::ostringstream os;
        os << "SystemSpec invariant violated: epsilon >= 0 required, got " << epsilon;
        fail_spec(os.str());
    }
    if (epsilon > 0.0 && !perturbation.has_value())
        fail_spec("epsilon > 0 requires a perturbation G");
    if (perturbation && (!perturbation->G || !perturbation->gradG))
        fail_spec("perturbation G and gradG must be set");
}

double alpha1(const SystemSpec& spec, double q3) {
    const double fv = spec.f(q3);
    const auto& p = spec.params;
    return std::sqrt(p.m1 / (1.0 + (p.m2 / p.m1) * fv * fv));
}

double alpha2(const SystemSpec& spec, double q3) {
    const auto& p = spec.params;
    return -(p.m2 / p.m1) * spec.f(q3) * alpha1(spec, q3);
}

double alpha1_prime(const SystemSpec& spec, double q3) {
    const auto& p = spec.params;
    const double a1 = alpha1(spec, q3);
    return -(p.m2 / (p.m1 * p.m1)) * spec.f(q3) * spec.df(q3) * a1 * a1 * a1;
}

double alpha2_prime(const SystemSpec& spec, double q3) {
    const auto& p = spec.params;
    return -(p.m2 / p.m1) *
           (spec.df(q3) * alpha1(spec, q3) + spec.f(q3) * alpha1_prime(spec, q3));
}

FullState embed(const SystemSpec& spec, const ReducedState& s) {
    FullState out;
    out.q1 = s.q1;
    out.q2 = s.q2;
    out.q3 = s.q3;
    out.p1 = alpha1(spec, s.q3) * s.p;
    out.p2 = alpha2(spec, s.q3) * s.p;
    out.p3 = s.p3;
    return out;
}

ReducedState project(const SystemSpec& spec, const FullState& s, double tol) {
    const double res = constraint_residual(spec, s);
    if (std::abs(res) > tol) {
        std::ostringstream os;
        os << "state is off the constraint manifold: |residual| = " << std::abs(res) << " > tol = "
           << tol;
        throw ConstraintViolation(os.str());
    }
    ReducedState out;
    out.q1 = s.q1;
    out.q2 = s.q2;
    out.q3 = s.q3;
    out.p = s.p1 / alpha1(spec, s.q3);
    out.p3 = s.p3;
    return out;
}

double constraint_residual(const SystemSpec& spec, const FullState& s) {
    const Vec3 v = velocity_map(spec, s);
    return spec.f(s.q3) * v[0] + v[1];
}

double hamiltonian(const SystemSpec& spec, const FullState& s) {
    const auto& p = spec.params;
    double h = 0.5 * (s.p1 * s.p1 / p.m1 + p.k1 * s.q1 * s.q1) +
               0.5 * (s.p2 * s.p2 / p.m2 + p.k2 * s.q2 * s.q2) + spec.F(s.q3, s.p3);
    if (spec.perturbed()) h += spec.epsilon * spec.perturbation->G(s.to_vector());
    return h;
}

Vec3 velocity_map(const SystemSpec& spec, const FullState& s) {
    const auto& p = spec.params;
    Vec3 v{s.p1 / p.m1, s.p2 / p.m2, spec.dFdp3(s.q3, s.p3)};
    if (spec.perturbed()) {
        const Vec6 g = spec.perturbation->gradG(s.to_vector());
        v += spec.epsilon * g.tail<3>();
    }
    return v;
}

Vec3 position_gradient(const SystemSpec& spec, const FullState& s) {
    const auto& p = spec.params;
    Vec3 g{p.k1 * s.q1, p.k2 * s.q2, spec.dFdq3(s.q3, s.p3)};
    if (spec.perturbed()) {
        const Vec6 gg = spec.perturbation->gradG(s.to_vector());
        g += spec.epsilon * gg.head<3>();
    }
    return g;
}

FullState reversal(const FullState& s) { return {s.q1, s.q2, s.q3, -s.p1, -s.p2, -s.p3}; }

ReducedState reversal(const ReducedState& s) { return {s.q1, s.q2, s.q3, -s.p, -s.p3}; }

namespace presets {

SystemSpec contact() {
    SystemSpec spec;
    spec.coupling = make_coupling("linear");
    spec.subsystem = make_subsystem("harmonic");
    spec.label = "contact";
    return spec;
}

SystemSpec cvt() {
    SystemSpec spec;
    spec.coupling = make_coupling("cvt");
    spec.subsystem = make_subsystem("harmonic");
    spec.label = "cvt";
    return spec;
}

SystemSpec decoupled() {
    SystemSpec spec;
    spec.coupling = make_coupling("zero");
    spec.subsystem = make_subsystem("harmonic");
    spec.label = "decoupled";
    return spec;
}

} // namespace presets

Coupling make_coupling(const std::string& name, std::span<const double> coefficients) {
    Coupling c;
    c.label = name;
    if (name == "linear") {
        c.f = [](double q3) { return q3; };
        c.df = [](double) { return 1.0; };
    } else if (name == "zero") {
        c.f = [](double) { return 0.0; };
        c.df = [](double) { return 0.0; };
    } else if (name == "cvt") {
        // Gear-ratio coupling; the belt geometry assumes q3 < 1.
        c.f = [](double q3) { return q3 / (1.0 - q3); };
        c.df = [](double q3) { return 1.0 / ((1.0 - q3) * (1.0 - q3)); };
        c.q3_max = 1.0;
    } else if (name == "polynomial") {
        if (coefficients.empty()) throw SpecError("polynomial coupling needs coefficients");
        std::vector<double> cv(coefficients.begin(), coefficients.end());
        c.f = [cv](double q3) { return poly_eval(cv, q3); };
        c.df = [cv](double q3) { return poly_deriv_eval(cv, q3); };
    } else {
        throw SpecError("unknown coupling '" + name + "'");
    }
    return c;
}

Subsystem make_subsystem(const std::string& name, std::span<const double> coefficients) {
    Subsystem s;
    s.label = name;
    if (name == "harmonic") {
        s.F = [](double q3, double p3) { return 0.5 * (q3 * q3 + p3 * p3); };
        s.dFdq3 = [](double q3, double) { return q3; };
        s.dFdp3 = [](double, double p3) { return p3; };
    } else if (name == "quartic") {
        s.F = [](double q3, double p3) { return 0.5 * p3 * p3 + 0.25 * q3 * q3 * q3 * q3; };
        s.dFdq3 = [](double q3, double) { return q3 * q3 * q3; };
        s.dFdp3 = [](double, double p3) { return p3; };
    } else if (name == "polynomial") {
        if (coefficients.empty()) throw SpecError("polynomial subsystem needs coefficients");
        std::vector<double> cv(coefficients.begin(), coefficients.end());
        s.F = [cv](double q3, double p3) { return 0.5 * p3 * p3 + poly_eval(cv, q3); };
        s.dFdq3 = [cv](double q3, double) { return poly_deriv_eval(cv, q3); };
        s.dFdp3 = [](double, double p3) { return p3; };
    } else {
        throw SpecError("unknown subsystem '" + name + "'");
    }
    return s;
}

std::optional<Perturbation> make_perturbation(const std::string& name) {
    if (name == "none" || name.empty()) return std::nullopt;
    Perturbation g;
    g.label = name;
    if (name == "q1_quartic") {
        g.G = [](const Vec6& x) { return x[0] * x[0] * x[0] * x[0]; };
        g.gradG = [](const Vec6& x) {
            Vec6 out = Vec6::Zero();
            out[0] = 4.0 * x[0] * x[0] * x[0];
            return out;
        };
        g.reversible = true;
    } else if (name == "p1_quadratic") {
        g.G = [](const Vec6& x) { return 0.5 * x[3] * x[3]; };
        g.gradG = [](const Vec6& x) {
            Vec6 out = Vec6::Zero();
            out[3] = x[3];
            return out;
        };
        g.reversible = true;
    } else if (name == "mixed_nonreversible") {
        // G = q3 p1: odd in p (so reversible-KAM persistence no longer applies) and couples
        // the subsystem to oscillator 1, so the torus labels can wander.
        g.G = [](const Vec6& x) { return x[2] * x[3]; };
        g.gradG = [](const Vec6& x) {
            Vec6 out = Vec6::Zero();
            out[2] = x[3];
            out[3] = x[2];
            return out;
        };
        g.reversible = false;
    } else {
        throw SpecError("unknown perturbation '" + name + "'");
    }
    return g;
}

namespace {

constexpr double kFdStep = 1e-5;

double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

} // namespace

double coupling_derivative_defect(const Coupling& c, std::span<const double> q3_samples) {
    double worst = 0.0;
    for (double q3 : q3_samples) {
        if (!c.in_domain(q3 - kFdStep) || !c.in_domain(q3 + kFdStep)) continue;
        const double fd = (c.f(q3 + kFdStep) - c.f(q3 - kFdStep)) / (2.0 * kFdStep);
        worst = std::max(worst, rel_err(fd, c.df(q3)));
    }
    return worst;
}

double subsystem_gradient_defect(const Subsystem& s,
                                 std::span<const std::pair<double, double>> samples) {
    double worst = 0.0;
    for (auto [q3, p3] : samples) {
        const double fdq = (s.F(q3 + kFdStep, p3) - s.F(q3 - kFdStep, p3)) / (2.0 * kFdStep);
        const double fdp = (s.F(q3, p3 + kFdStep) - s.F(q3, p3 - kFdStep)) / (2.0 * kFdStep);
        worst = std::max(worst, rel_err(fdq, s.dFdq3(q3, p3)));
        worst = std::max(worst, rel_err(fdp, s.dFdp3(q3, p3)));
    }
    return worst;
}

double perturbation_gradient_defect(const Perturbation& g, std::span<const Vec6> samples) {
    double worst = 0.0;
    for (const Vec6& x : samples) {
        const Vec6 grad = g.gradG(x);
        for (int i = 0; i < 6; ++i) {
            Vec6 xp = x, xm = x;
            xp[i] += kFdStep;
            xm[i] -= kFdStep;
            const double fd = (g.G(xp) - g.G(xm)) / (2.0 * kFdStep);
            worst = std::max(worst, rel_err(fd, grad[i]));
        }
    }
    return worst;
}

double subsystem_reversibility_defect(const Subsystem& s,
                                      std::span<const std::pair<double, double>> samples) {
    double worst = 0.0;
    for (auto [q3, p3] : samples) worst = std::max(worst, std::abs(s.F(q3, -p3) - s.F(q3, p3)));
    return worst;
}

double perturbation_reversibility_defect(const Perturbation& g, std::span<const Vec6> samples) {
    double worst = 0.0;
    for (const Vec6& x : samples) {
        Vec6 rx = x;
        rx.tail<3>() *= -1.0;
        worst = std::max(worst, std::abs(g.G(rx) - g.G(x)));
    }
    return worst;
}

} // namespace nonholo
