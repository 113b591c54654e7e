// Acceptance suite: long-horizon correctness checks of the whole pipeline,
// one pass/fail line per criterion. Exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "nonholo/diagnostics.hpp"

using namespace nonholo;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    std::printf("[%s] criterion %d: %s (%s) [%.1fs]\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double elapsed() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3g", x);
    return buf;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

ReducedState torus_state(const TorusFrame& frame, double theta0, const Vec3& u) {
    const auto [q3, p3] = frame.orbit.state_at(theta0);
    return {u[0] / std::sqrt(frame.chart_spec.params.k1),
            u[1] / std::sqrt(frame.chart_spec.params.k2), q3, u[2], p3};
}

// 1. DAE integration and reduced-ODE integration agree at t = 50.
void criterion1() {
    Timer timer;
    StepperConfig ref;
    double worst = 0.0;
    for (const auto& [spec, s0] :
         {std::pair{presets::contact(), ReducedState{1, 0.5, 0, 0.3, 1}},
          std::pair{presets::cvt(), ReducedState{1, 0.5, 0, 0.3, 0.6}}}) {
        const Vec xr = reference_endpoint(reduced_field(spec), s0.to_vector(), 0.0, 50.0, ref);
        const Vec xf = reference_endpoint(dae_field(spec), embed(spec, s0).to_vector(), 0.0,
                                          50.0, ref);
        const ReducedState proj = project(spec, FullState::from_vector(Vec6(xf)), 1e-6);
        worst = std::max(worst, (proj.to_vector() - Vec5(xr)).cwiseAbs().maxCoeff());
    }
    report(1, "reduction correctness (DAE vs reduced ODE, t=50)", worst <= 1e-8,
           "sup=" + fmt(worst) + " tol=1e-8", timer.elapsed());
}

// 2. Energy and |u| conserved to 1e-9 over t = 100, 20 random ICs per preset.
void criterion2() {
    Timer timer;
    StepperConfig ref;
    std::mt19937_64 rng(11);
    double worstH = 0.0, worstU = 0.0;
    for (const SystemSpec& spec : {presets::contact(), presets::cvt()}) {
        const VectorFieldHandle field = reduced_field(spec);
        for (int ic = 0; ic < 20; ++ic) {
            // CVT coupling needs |q3| < 1 along the orbit; cap the subsystem
            // energy so the turning points stay inside.
            ReducedState s0{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -0.5, 0.5),
                            uniform(rng, -1, 1), uniform(rng, -0.5, 0.5)};
            const auto H = [&](const Vec& x) {
                return hamiltonian(spec, embed(spec, ReducedState::from_vector(Vec5(x))));
            };
            const auto U = [&](const Vec& x) {
                return u_coords(spec, ReducedState::from_vector(Vec5(x))).norm();
            };
            std::vector<double> times;
            for (int i = 0; i <= 100; ++i) times.push_back(static_cast<double>(i));
            const Trajectory traj = reference_solve(field, s0.to_vector(), 0.0, times, ref);
            for (const Vec& x : traj.states) {
                worstH = std::max(worstH, std::abs(H(x) - H(traj.states[0])));
                worstU = std::max(worstU, std::abs(U(x) - U(traj.states[0])));
            }
        }
    }
    report(2, "conservation of H and |u| (t=100, 20 ICs/preset)",
           worstH <= 1e-9 && worstU <= 1e-9, "dH=" + fmt(worstH) + " d|u|=" + fmt(worstU),
           timer.elapsed());
}

// 3. Floquet suite over 10 tori.
void criterion3() {
    Timer timer;
    StepperConfig ref;
    const SystemSpec contact = presets::contact();
    double worst_ortho = 0.0, worst_det = 0.0, worst_exp = 0.0, worst_floq = 0.0;
    bool sigma_in_range = true;
    for (int i = 0; i < 10; ++i) {
        const double a = 0.2 + 1.8 * i / 9.0;
        const SubsystemOrbit orbit = subsystem_orbit(contact, a);
        const FloquetData fd = compute_floquet(contact, orbit, ref);
        worst_ortho = std::max(worst_ortho, fd.ortho_defect);
        worst_det = std::max(worst_det, fd.det_defect);
        worst_exp = std::max(worst_exp, fd.exp_defect);
        sigma_in_range = sigma_in_range && fd.sigma >= 0.0 && fd.sigma <= std::numbers::pi;
        for (int k = 1; k <= 10; ++k) {
            const double tau = static_cast<double>(k) / 10.0;
            const Mat3 lhs = flow_Phi(contact, orbit, tau + 1.0, ref);
            const Mat3 rhs = flow_Phi(contact, orbit, tau, ref) * fd.Phi1;
            worst_floq = std::max(worst_floq, (lhs - rhs).cwiseAbs().maxCoeff());
        }
    }
    const bool pass = worst_ortho <= 1e-10 && worst_det <= 1e-10 && worst_exp <= 1e-9 &&
                      worst_floq <= 1e-9 && sigma_in_range;
    report(3, "Floquet suite (10 tori)", pass,
           "ortho=" + fmt(worst_ortho) + " det=" + fmt(worst_det) + " exp=" + fmt(worst_exp) +
               " floquet=" + fmt(worst_floq),
           timer.elapsed());
}

// 4. Action-angle constancy/linearity along a 100-period trajectory; the
// fitted slopes reproduce (omega, xi).
void criterion4() {
    Timer timer;
    StepperConfig ref;
    const SystemSpec contact = presets::contact();
    const TorusFrame frame = make_torus_frame(contact, 0.5, {}, ref);
    const ReducedState s0 = torus_state(frame, 0.37, Vec3{0.9, -0.35, 0.6});

    const double T = 100.0 * frame.orbit.period;
    const DriftReport drift = invariant_drift(contact, s0, ref, T, frame.orbit.period / 8.0,
                                              frame);
    const double const_defect = std::max(
        {drift.find("a")->max_abs, drift.find("b")->max_abs, drift.find("c")->max_abs});

    const Trajectory traj =
        integrate_chart(contact, s0, ref, T, frame.orbit.period / 8.0);
    const RotationNumbers rn = rotation_numbers(contact, frame.orbit, frame.data, traj, ref);
    const FrequencyPair fp = frequencies(contact, frame.orbit, frame.data);
    const double slope_err =
        std::max(std::abs(rn.omega_est - fp.omega), std::abs(rn.xi_est - fp.xi));
    const double resid = std::max(rn.theta_resid, rn.phi_resid);

    const bool pass = const_defect <= 1e-7 && resid <= 1e-5 && slope_err <= 1e-5 && rn.reliable;
    report(4, "Theorem-1 reproduction (100 periods)", pass,
           "max|d(a,b,c)|=" + fmt(const_defect) + " resid=" + fmt(resid) +
               " slope_err=" + fmt(slope_err),
           timer.elapsed());
}

// 5. Reversibility identities and the trajectory-reversal test.
void criterion5() {
    Timer timer;
    StepperConfig ref;
    const SystemSpec contact = presets::contact();
    double worst_identity = 0.0;
    for (double a : {0.3, 0.5, 1.2}) {
        const SubsystemOrbit orbit = subsystem_orbit(contact, a);
        const FloquetData fd = compute_floquet(contact, orbit, ref);
        const ReversibilityReport rep = check_reversibility(contact, orbit, fd, ref);
        worst_identity = std::max(worst_identity, rep.max_defect());
    }

    // rho of a trajectory endpoint, flowed for the same time, returns to rho
    // of the start.
    const VectorFieldHandle field = reduced_field(contact);
    Vec s0(5);
    s0 << 1, 0.3, 0.2, -0.4, 0.9;
    const Vec fwd = reference_endpoint(field, s0, 0.0, 20.0, ref);
    const Vec back = reference_endpoint(field, reversal_vec(fwd), 0.0, 20.0, ref);
    const double rev_err = (back - reversal_vec(s0)).cwiseAbs().maxCoeff();

    const bool pass = worst_identity <= 1e-8 && rev_err <= 1e-8;
    report(5, "reversibility suite", pass,
           "identities=" + fmt(worst_identity) + " trajectory=" + fmt(rev_err),
           timer.elapsed());
}

// 6. Frequency-map verdicts; the ratio variation must dwarf the measurement
// noise of the frequencies (trajectory-fit residual scale).
void criterion6() {
    Timer timer;
    StepperConfig ref;
    std::vector<double> grid;
    for (int i = 0; i < 10; ++i) grid.push_back(0.1 + 1.9 * i / 9.0);

    const FrequencyMapResult fm = frequency_map(presets::contact(), grid, {}, ref);
    const FrequencyMapResult fd = frequency_map(presets::decoupled(), grid, {}, ref);

    // Measurement noise of xi: cross-validate one grid point against the
    // trajectory fit (criterion 4 machinery).
    const SystemSpec contact = presets::contact();
    const TorusFrame frame = make_torus_frame(contact, 0.5, {}, ref);
    const ReducedState s0 = torus_state(frame, 0.2, Vec3{0.8, 0.3, -0.5});
    const Trajectory traj = integrate_chart(contact, s0, ref, 60.0 * frame.orbit.period,
                                            frame.orbit.period / 8.0);
    const RotationNumbers rn = rotation_numbers(contact, frame.orbit, frame.data, traj, ref);
    const double xi_noise =
        std::max({std::abs(rn.xi_est - frequencies(contact, frame.orbit, frame.data).xi),
                  rn.phi_resid, 1e-12});

    const bool pass = fm.verdict == "independent" && fd.verdict == "dependent" &&
                      fm.ratio_variation > 10.0 * xi_noise;
    report(6, "frequency independence (KAM nondegeneracy)", pass,
           "contact=" + fm.verdict + " decoupled=" + fd.verdict + " variation=" +
               fmt(fm.ratio_variation) + " noise=" + fmt(xi_noise),
           timer.elapsed());
}

// 7. Long-time experiment: implicit midpoint preserves the invariants, RK4
// does not. A trend only counts when it projects above the 1e-7
// control-consistency scale over the horizon (solver-tolerance ramps are far
// below it, method-error drift far above).
void criterion7() {
    Timer timer;
    const SystemSpec contact = presets::contact();
    KamScanConfig cfg;
    cfg.g_labels = {"q1_quartic"};
    cfg.epsilons = {0.0, 1e-2};
    cfg.methods = {Method::implicit_midpoint, Method::rk4};
    cfg.seeds = {1};
    cfg.T = 1e4;
    cfg.sample_dt = 1.0;
    cfg.torus_a = 0.5;
    cfg.stepper.h = 0.05;
    cfg.threads = 4;
    const ScanResult res = kam_scan(contact, cfg);

    auto trending = [&](const ScanRow& r) {
        int count = 0;
        const double slopes[4] = {r.slope_H, r.slope_a, r.slope_b, r.slope_c};
        const double errs[4] = {r.slope_stderr_H, r.slope_stderr_a, r.slope_stderr_b,
                                r.slope_stderr_c};
        for (int i = 0; i < 4; ++i)
            if (std::isfinite(slopes[i]) && std::abs(slopes[i]) > 5.0 * errs[i] &&
                std::abs(slopes[i]) * r.T > 1e-7)
                ++count;
        return count;
    };

    bool midpoint_clean = true, rk4_drifts = true;
    std::string detail;
    for (const ScanRow& r : res.rows) {
        const int n = trending(r);
        if (r.method == "implicit_midpoint") midpoint_clean = midpoint_clean && n == 0;
        if (r.method == "rk4") rk4_drifts = rk4_drifts && n >= 1;
        detail += r.method.substr(0, 2) + "@eps=" + fmt(r.epsilon) + ":" +
                  (n > 0 ? "secular" : "bounded") + " ";
    }
    report(7, "reversible vs non-reversible integrator (T=1e4, h=0.05)",
           midpoint_clean && rk4_drifts, detail, timer.elapsed());
}

// 8. Perturbation lemma: induced field deviates O(eps) and stays reversible.
void criterion8() {
    Timer timer;
    const SystemSpec contact = presets::contact();
    const VectorFieldHandle red = reduced_field(contact);
    std::mt19937_64 rng(5);
    std::vector<Vec> states;
    for (int i = 0; i < 10; ++i) {
        Vec x(5);
        x << uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -0.7, 0.7),
            uniform(rng, -1, 1), uniform(rng, -0.7, 0.7);
        states.push_back(x);
    }
    bool ratios_ok = true;
    double rev_defect = 0.0;
    std::string detail;
    for (const char* g : {"q1_quartic", "p1_quadratic"}) {
        double prev = 0.0;
        for (double eps : {1e-3, 2e-3, 4e-3}) {
            SystemSpec spec = contact;
            spec.perturbation = make_perturbation(g);
            spec.epsilon = eps;
            const VectorFieldHandle ind = induced_field(spec);
            double dev = 0.0;
            for (const Vec& x : states) {
                dev = std::max(dev, (ind.eval(x) - red.eval(x)).lpNorm<Eigen::Infinity>());
                const Vec lhs = ind.eval(reversal_vec(x));
                const Vec rhs = -reversal_vec(ind.eval(x));
                rev_defect = std::max(rev_defect, (lhs - rhs).cwiseAbs().maxCoeff());
            }
            if (prev > 0.0) {
                const double ratio = dev / prev;
                ratios_ok = ratios_ok && ratio >= 1.7 && ratio <= 2.3;
                detail += std::string(g).substr(0, 2) + ":" + fmt(ratio) + " ";
            }
            prev = dev;
        }
    }
    const bool pass = ratios_ok && rev_defect <= 1e-9;
    report(8, "perturbation lemma (O(eps) + reversibility)", pass,
           detail + "revdef=" + fmt(rev_defect), timer.elapsed());
}

// 9. Order of accuracy and the discrete reversibility defect.
void criterion9() {
    Timer timer;
    StepperConfig cfg;
    const SystemSpec contact = presets::contact();
    const VectorFieldHandle field = reduced_field(contact);
    Vec s0(5);
    s0 << 1, 0, 0, 0, 1;
    const double t_end = 5.0;
    const Vec refv = reference_endpoint(field, s0, 0.0, t_end, cfg);
    auto global_error = [&](Method m, double h) {
        StepperConfig c = cfg;
        c.h = h;
        const int n = static_cast<int>(std::llround(t_end / h));
        return (fixed_step_solve(field, s0, 0.0, n, m, c, n).states.back() - refv)
            .lpNorm<Eigen::Infinity>();
    };
    const double rk_ratio = global_error(Method::rk4, 0.05) / global_error(Method::rk4, 0.025);
    const double mid_ratio = global_error(Method::implicit_midpoint, 0.05) /
                             global_error(Method::implicit_midpoint, 0.025);

    Vec s(5);
    s << 0.7, -0.4, 0.3, 0.5, -0.8;
    const double defect =
        reversibility_defect(field, Method::implicit_midpoint, s, 0.05, cfg, reversal_vec);

    const bool pass = rk_ratio >= 12.0 && rk_ratio <= 20.0 && mid_ratio >= 3.4 &&
                      mid_ratio <= 4.6 && defect <= 10.0 * cfg.newton_tol;
    report(9, "order of accuracy + midpoint reversibility defect", pass,
           "rk4_ratio=" + fmt(rk_ratio) + " mid_ratio=" + fmt(mid_ratio) +
               " defect=" + fmt(defect),
           timer.elapsed());
}

} // namespace

int main() {
    std::printf("nonholo acceptance suite\n");
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    if (failures == 0)
        std::printf("acceptance: all 9 criteria PASS\n");
    else
        std::printf("acceptance: %d criterion(s) FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
