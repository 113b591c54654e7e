#include "nonholo/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

namespace nonholo {

namespace {

double wrap_diff(double d) {
    // Difference of two unit-circle angles mapped to (-0.5, 0.5].
    d -= std::round(d);
    return d;
}

std::vector<double> unwrap_unit(std::span<const double> wrapped) {
    std::vector<double> out;
    out.reserve(wrapped.size());
    if (wrapped.empty()) return out;
    out.push_back(wrapped[0]);
    for (std::size_t i = 1; i < wrapped.size(); ++i)
        out.push_back(out.back() + wrap_diff(wrapped[i] - wrapped[i - 1]));
    return out;
}

ReducedState state_from_vec(const Vec& x) { return ReducedState::from_vector(Vec5(x)); }

} // namespace

FullState lift_to_physical(const SystemSpec& spec, const SystemSpec& chart_spec,
                           const ReducedState& s) {
    const FullState s0 = embed(chart_spec, s);
    if (!spec.perturbed()) return s0;
    const Vec3 q{s.q1, s.q2, s.q3};
    const Vec3 v{s0.p1 / spec.params.m1, s0.p2 / spec.params.m2, spec.dFdp3(s.q3, s.p3)};
    const Vec3 pe = perturbed_manifold_solve(spec, q, v);
    return FullState{q[0], q[1], q[2], pe[0], pe[1], pe[2]};
}

Trajectory integrate_chart(const SystemSpec& spec, const ReducedState& s0,
                           const StepperConfig& cfg, double T, double sample_dt) {
    const VectorFieldHandle field =
        spec.perturbed() ? induced_field(spec) : reduced_field(spec);
    const Vec x0 = s0.to_vector();
    Trajectory traj;
    if (cfg.method == Method::reference) {
        std::vector<double> samples;
        const auto n = static_cast<std::size_t>(std::floor(T / sample_dt + 1e-9));
        samples.reserve(n + 1);
        for (std::size_t i = 0; i <= n; ++i) samples.push_back(sample_dt * static_cast<double>(i));
        traj = reference_solve(field, x0, 0.0, samples, cfg);
    } else {
        const int stride = std::max(1, static_cast<int>(std::llround(sample_dt / cfg.h)));
        const auto n_samples = static_cast<int>(std::floor(T / (stride * cfg.h) + 1e-9));
        traj = fixed_step_solve(field, x0, 0.0, stride * n_samples, cfg.method, cfg, stride);
    }
    traj.spec_label = spec.label;
    return traj;
}

bool LinearFit::significant(double k) const {
    return std::isfinite(slope_stderr) && std::abs(slope) > k * slope_stderr;
}

LinearFit ols_fit(std::span<const double> t, std::span<const double> y) {
    LinearFit fit;
    const std::size_t n = t.size();
    if (n != y.size() || n < 3) return fit;
    double tm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        tm += t[i];
        ym += y[i];
    }
    tm /= static_cast<double>(n);
    ym /= static_cast<double>(n);
    double stt = 0.0, sty = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        stt += (t[i] - tm) * (t[i] - tm);
        sty += (t[i] - tm) * (y[i] - ym);
    }
    if (stt == 0.0) return fit;
    fit.slope = sty / stt;
    fit.intercept = ym - fit.slope * tm;
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * t[i]);
        ssr += r * r;
        fit.resid_max = std::max(fit.resid_max, std::abs(r));
    }
    fit.slope_stderr = std::sqrt(ssr / static_cast<double>(n - 2) / stt);
    return fit;
}

TorusFrame make_torus_frame(const SystemSpec& spec, double a, const OrbitOptions& opts,
                            const StepperConfig& cfg) {
    TorusFrame frame{spec, {}, {}};
    frame.chart_spec.epsilon = 0.0;
    frame.chart_spec.perturbation.reset();
    frame.orbit = subsystem_orbit(frame.chart_spec, a, opts, cfg);
    frame.data = compute_floquet(frame.chart_spec, frame.orbit, cfg);
    return frame;
}

const DriftSeries* DriftReport::find(const std::string& label) const {
    for (const auto& s : series)
        if (s.label == label) return &s;
    return nullptr;
}

DriftReport invariant_drift(const SystemSpec& spec, const ReducedState& s0,
                            const StepperConfig& cfg, double T, double sample_dt,
                            const TorusFrame& frame) {
    const Trajectory traj = integrate_chart(spec, s0, cfg, T, sample_dt);
    const SystemSpec& chart = frame.chart_spec;
    const bool angles_defined =
        !frame.data.resonant && frame.data.sigma > kResonanceTol;

    DriftReport rep;
    rep.times = traj.times;
    std::vector<std::vector<double>> values(angles_defined ? 5 : 3);
    for (const Vec& x : traj.states) {
        const ReducedState s = state_from_vec(x);
        values[0].push_back(hamiltonian(spec, lift_to_physical(spec, chart, s)));
        values[1].push_back(u_coords(chart, s).norm());
        values[2].push_back(chart.F(s.q3, s.p3));
        if (angles_defined) {
            const ActionAngle aa = action_angle_coords(chart, frame.orbit, frame.data, s, cfg);
            values[3].push_back(aa.b);
            values[4].push_back(aa.c);
        }
    }
    const char* labels[5] = {"H", "u_norm", "a", "b", "c"};
    for (std::size_t q = 0; q < values.size(); ++q) {
        DriftSeries ser;
        ser.label = labels[q];
        ser.deviation.reserve(values[q].size());
        for (double v : values[q]) {
            ser.deviation.push_back(v - values[q][0]);
            ser.max_abs = std::max(ser.max_abs, std::abs(ser.deviation.back()));
        }
        ser.trend = ols_fit(rep.times, ser.deviation);
        rep.series.push_back(std::move(ser));
    }
    return rep;
}

DriftReport invariant_drift(const SystemSpec& spec, const ReducedState& s0,
                            const StepperConfig& cfg, double T, double sample_dt) {
    const TorusFrame frame = make_torus_frame(spec, spec.F(s0.q3, s0.p3), {}, cfg);
    return invariant_drift(spec, s0, cfg, T, sample_dt, frame);
}

RotationNumbers rotation_numbers(const SystemSpec& spec, const SubsystemOrbit& orbit,
                                 const FloquetData& fd, const Trajectory& traj,
                                 const StepperConfig& cfg) {
    RotationNumbers out;
    if (traj.times.size() < 3) return out;
    const double duration = traj.times.back() - traj.times.front();
    out.reliable = duration >= 50.0 * orbit.period;

    std::vector<double> thetas, phis;
    thetas.reserve(traj.times.size());
    phis.reserve(traj.times.size());
    for (const Vec& x : traj.states) {
        const ActionAngle aa = action_angle_coords(spec, orbit, fd, state_from_vec(x), cfg);
        thetas.push_back(aa.theta);
        phis.push_back(aa.phi);
    }
    const std::vector<double> th_u = unwrap_unit(thetas);
    const std::vector<double> ph_u = unwrap_unit(phis);
    const LinearFit tf = ols_fit(traj.times, th_u);
    const LinearFit pf = ols_fit(traj.times, ph_u);
    out.omega_est = tf.slope;
    out.xi_est = pf.slope;
    out.theta_resid = tf.resid_max;
    out.phi_resid = pf.resid_max;
    (void)fd;
    return out;
}

std::vector<SectionPoint> poincare_section(const SystemSpec& spec, const TorusFrame& frame,
                                           const Trajectory& traj, const StepperConfig& cfg) {
    const SystemSpec& chart = frame.chart_spec;
    const int dir = frame.orbit.crossing_sign;
    const bool angles_defined =
        !frame.data.resonant && frame.data.sigma > kResonanceTol;
    std::vector<SectionPoint> out;

    for (std::size_t i = 0; i + 1 < traj.times.size(); ++i) {
        const double pl = traj.states[i][4];
        const double pr = traj.states[i + 1][4];
        const bool falls = pl > 0.0 && pr <= 0.0;
        const bool rises = pl < 0.0 && pr >= 0.0;
        if (!((dir > 0 && rises) || (dir < 0 && falls) || (dir == 0 && (rises || falls))))
            continue;
        const double tl = traj.times[i], tr = traj.times[i + 1];
        const double frac = pl / (pl - pr);
        SectionPoint pt;
        pt.t = tl + frac * (tr - tl);
        const Vec xi = traj.states[i] + frac * (traj.states[i + 1] - traj.states[i]);
        pt.u = u_coords(chart, state_from_vec(xi));

        const ReducedState sl = state_from_vec(traj.states[i]);
        if (angles_defined) {
            const ActionAngle aa = action_angle_coords(chart, frame.orbit, frame.data, sl, cfg);
            pt.b = aa.b;
            pt.c = aa.c;
            pt.phi = aa.phi + frame.data.xi * (pt.t - tl);
            pt.phi -= std::floor(pt.phi);
            // v rotates at rate omega*Abar in real time.
            pt.v = so3_exp(frame.data.omega * frame.data.sigma * (pt.t - tl) * frame.data.axis) *
                   aa.v;
        } else {
            const double theta = orbit_phase(chart, frame.orbit, sl.q3, sl.p3, cfg);
            pt.v = psi_transform(chart, frame.orbit, frame.data, u_coords(chart, sl), theta);
        }
        out.push_back(std::move(pt));
    }
    if (out.empty()) throw NoCrossings("trajectory never crosses the subsystem section");
    return out;
}

Vec reversal_vec(const Vec& x) {
    Vec out = x;
    if (x.size() == 5) {
        out[3] = -x[3];
        out[4] = -x[4];
    } else if (x.size() == 6) {
        out[3] = -x[3];
        out[4] = -x[4];
        out[5] = -x[5];
    } else {
        throw Error("reversal_vec expects a chart (5) or full (6) state");
    }
    return out;
}

namespace {

ReducedState seeded_initial_state(const SystemSpec& chart, const SubsystemOrbit& orbit,
                                  std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    const double theta0 = unit();
    Vec3 u;
    do {
        u = Vec3{2.0 * unit() - 1.0, 2.0 * unit() - 1.0, 2.0 * unit() - 1.0};
    } while (u.norm() < 0.2);
    u *= (0.75 + 0.75 * unit()) / u.norm();
    const auto [q3, p3] = orbit.state_at(theta0);
    ReducedState s;
    s.q1 = u[0] / std::sqrt(chart.params.k1);
    s.q2 = u[1] / std::sqrt(chart.params.k2);
    s.q3 = q3;
    s.p = u[2];
    s.p3 = p3;
    return s;
}

void fill_row_from_drift(ScanRow& row, const DriftReport& drift) {
    auto grab = [&](const char* label, double& max_drift, double& slope, double& stderr_out) {
        const DriftSeries* s = drift.find(label);
        if (!s) {
            max_drift = slope = stderr_out = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        max_drift = s->max_abs;
        slope = s->trend.slope;
        stderr_out = s->trend.slope_stderr;
    };
    grab("H", row.max_drift_H, row.slope_H, row.slope_stderr_H);
    grab("a", row.max_drift_a, row.slope_a, row.slope_stderr_a);
    grab("b", row.max_drift_b, row.slope_b, row.slope_stderr_b);
    grab("c", row.max_drift_c, row.slope_c, row.slope_stderr_c);
}

// A statistically significant slope only counts as secular when the trend it
// projects over the horizon clears the control-consistency scale; roundoff
// ramps from solver tolerances produce tiny slopes with even tinier standard
// errors and must not flag.
constexpr double kSecularDriftFloor = 1e-7;

bool row_secular(const ScanRow& row, const ScanRow* control) {
    const double maxd[4] = {row.max_drift_H, row.max_drift_a, row.max_drift_b, row.max_drift_c};
    const double slope[4] = {row.slope_H, row.slope_a, row.slope_b, row.slope_c};
    const double se[4] = {row.slope_stderr_H, row.slope_stderr_a, row.slope_stderr_b,
                          row.slope_stderr_c};
    const double ctl[4] = {control ? control->max_drift_H : 0.0,
                           control ? control->max_drift_a : 0.0,
                           control ? control->max_drift_b : 0.0,
                           control ? control->max_drift_c : 0.0};
    for (int i = 0; i < 4; ++i) {
        if (!std::isfinite(slope[i]) || !std::isfinite(se[i])) continue;
        const bool trending = std::abs(slope[i]) > 5.0 * se[i] &&
                              std::abs(slope[i]) * row.T > kSecularDriftFloor;
        const bool above_control = control == nullptr || maxd[i] > 10.0 * ctl[i];
        if (trending && above_control) return true;
    }
    return false;
}

void run_parallel(std::size_t n, int threads, const std::function<void(std::size_t)>& work) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int count = std::min<int>(threads, static_cast<int>(n));
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int t = 0; t < count; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    work(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace

ScanResult kam_scan(const SystemSpec& base, const KamScanConfig& cfg) {
    if (std::find(cfg.epsilons.begin(), cfg.epsilons.end(), 0.0) == cfg.epsilons.end())
        throw SpecError("kam_scan epsilon grid must include 0 (controls)");
    for (const auto& g : cfg.g_labels)
        if (g == "none") throw SpecError("kam_scan g_labels must name actual perturbations");

    const TorusFrame frame = make_torus_frame(base, cfg.torus_a, {}, cfg.stepper);

    struct Cell {
        std::string g;
        double eps;
        Method method;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& g : cfg.g_labels)
        for (double eps : cfg.epsilons)
            for (Method m : cfg.methods)
                for (std::uint64_t seed : cfg.seeds) cells.push_back({g, eps, m, seed});

    std::vector<ScanRow> rows(cells.size());
    auto run_cell = [&](std::size_t i) {
        const Cell& cell = cells[i];
        SystemSpec spec = base;
        spec.perturbation = make_perturbation(cell.g);
        spec.epsilon = cell.eps;
        spec.validate();

        StepperConfig scfg = cfg.stepper;
        scfg.method = cell.method;

        ScanRow row;
        row.g_label = cell.g;
        row.epsilon = cell.eps;
        row.method = to_string(cell.method);
        row.h = scfg.h;
        row.T = cfg.T;
        row.seed = cell.seed;

        const ReducedState s0 = seeded_initial_state(frame.chart_spec, frame.orbit, cell.seed);
        const DriftReport drift = invariant_drift(spec, s0, scfg, cfg.T, cfg.sample_dt, frame);
        fill_row_from_drift(row, drift);

        const VectorFieldHandle field =
            spec.perturbed() ? induced_field(spec) : reduced_field(spec);
        row.rev_defect =
            reversibility_defect(field, cell.method, s0.to_vector(), scfg.h, scfg, reversal_vec);
        rows[i] = std::move(row);
    };

    // Controls first so epsilon > 0 verdicts can compare against them.
    std::vector<std::size_t> control_idx, perturbed_idx;
    for (std::size_t i = 0; i < cells.size(); ++i)
        (cells[i].eps == 0.0 ? control_idx : perturbed_idx).push_back(i);
    run_parallel(control_idx.size(), cfg.threads,
                 [&](std::size_t k) { run_cell(control_idx[k]); });
    run_parallel(perturbed_idx.size(), cfg.threads,
                 [&](std::size_t k) { run_cell(perturbed_idx[k]); });

    auto control_for = [&](const Cell& cell) -> const ScanRow* {
        for (std::size_t i : control_idx) {
            const Cell& c = cells[i];
            if (c.g == cell.g && c.method == cell.method && c.seed == cell.seed) return &rows[i];
        }
        return nullptr;
    };
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const ScanRow* control = cells[i].eps == 0.0 ? nullptr : control_for(cells[i]);
        rows[i].verdict = row_secular(rows[i], control) ? "secular" : "bounded";
    }

    std::sort(rows.begin(), rows.end(), [](const ScanRow& a, const ScanRow& b) {
        return std::tie(a.g_label, a.epsilon, a.method, a.seed) <
               std::tie(b.g_label, b.epsilon, b.method, b.seed);
    });
    return ScanResult{std::move(rows)};
}

FrequencyMapResult frequency_map(const SystemSpec& spec, std::span<const double> a_grid,
                                 const OrbitOptions& opts, const StepperConfig& cfg) {
    FrequencyMapResult out;
    for (double a : a_grid) {
        const SubsystemOrbit orbit = subsystem_orbit(spec, a, opts, cfg);
        const FloquetData fd = compute_floquet(spec, orbit, cfg);
        if (fd.sigma > std::numbers::pi - kResonanceTol) {
            out.skipped_a.push_back(a);
            continue;
        }
        out.points.push_back({a, fd.omega, fd.xi, fd.sigma, fd.resonant});
    }
    if (out.points.size() < 10) {
        std::ostringstream os;
        os << "frequency map needs >= 10 valid grid points, got " << out.points.size();
        throw InsufficientGrid(os.str());
    }
    double sww = 0.0, swx = 0.0;
    for (const auto& p : out.points) {
        sww += p.omega * p.omega;
        swx += p.omega * p.xi;
    }
    out.c_fit = sww > 0.0 ? swx / sww : 0.0;
    double rmin = std::numeric_limits<double>::infinity(), rmax = -rmin;
    for (const auto& p : out.points) {
        out.max_residual = std::max(out.max_residual, std::abs(p.xi - out.c_fit * p.omega));
        if (p.omega != 0.0) {
            rmin = std::min(rmin, p.xi / p.omega);
            rmax = std::max(rmax, p.xi / p.omega);
        }
    }
    out.ratio_variation = std::isfinite(rmax - rmin) ? rmax - rmin : 0.0;
    out.verdict = out.max_residual < 1e-8 ? "dependent" : "independent";
    return out;
}

} // namespace nonholo
