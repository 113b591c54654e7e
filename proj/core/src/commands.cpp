#include "nonholo/commands.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace nonholo::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kFormatVersion = 1;

std::string error_kind(const Error& e) {
    if (dynamic_cast<const ConstraintViolation*>(&e)) return "ConstraintViolation";
    if (dynamic_cast<const DomainViolation*>(&e)) return "DomainViolation";
    if (dynamic_cast<const PerturbationPresent*>(&e)) return "PerturbationPresent";
    if (dynamic_cast<const FibreSolveFailure*>(&e)) return "FibreSolveFailure";
    if (dynamic_cast<const NonConvergence*>(&e)) return "NonConvergence";
    if (dynamic_cast<const StepSizeUnderflow*>(&e)) return "StepSizeUnderflow";
    if (dynamic_cast<const NoClosedOrbit*>(&e)) return "NoClosedOrbit";
    if (dynamic_cast<const NoSectionCrossing*>(&e)) return "NoSectionCrossing";
    if (dynamic_cast<const OmegaZero*>(&e)) return "OmegaZero";
    if (dynamic_cast<const NotARotation*>(&e)) return "NotARotation";
    if (dynamic_cast<const HalfTurn*>(&e)) return "HalfTurn";
    if (dynamic_cast<const DegenerateRotation*>(&e)) return "DegenerateRotation";
    if (dynamic_cast<const NoCrossings*>(&e)) return "NoCrossings";
    if (dynamic_cast<const InsufficientGrid*>(&e)) return "InsufficientGrid";
    return "Error";
}

std::ofstream open_artifact(const fs::path& path, bool force) {
    if (fs::exists(path) && !force)
        throw SpecError("output '" + path.string() + "' exists; pass --force to overwrite");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw SpecError("cannot open output '" + path.string() + "'");
    return out;
}

void write_csv_header(std::ostream& out, const char* kind, const ExperimentConfig& cfg) {
    out << "# nonholo " << kind << " v" << kFormatVersion << "\n";
    out << "# config " << cfg.to_json_text() << "\n";
}

json matrix_to_json(const Mat3& m) {
    json rows = json::array();
    for (int i = 0; i < 3; ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
    return rows;
}

} // namespace

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("NONHOLO_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

int run_simulate(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
    const SystemSpec spec = cfg.build_spec();
    SystemSpec chart = spec;
    chart.epsilon = 0.0;
    chart.perturbation.reset();
    const StepperConfig stepper = cfg.build_stepper();
    const ReducedState s0 = cfg.build_initial_state();

    const Trajectory traj =
        integrate_chart(spec, s0, stepper, cfg.experiment.T, cfg.experiment.sample_dt);

    std::ofstream out = open_artifact(fs::path(opts.out_dir) / "trajectory.csv", opts.force);
    write_csv_header(out, "trajectory", cfg);
    out << "t,q1,q2,q3,p,p3,H,u_norm\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const ReducedState s = ReducedState::from_vector(Vec5(traj.states[i]));
        const double H = hamiltonian(spec, lift_to_physical(spec, chart, s));
        const double un = u_coords(chart, s).norm();
        out << format_double(traj.times[i]) << ',' << format_double(s.q1) << ','
            << format_double(s.q2) << ',' << format_double(s.q3) << ',' << format_double(s.p)
            << ',' << format_double(s.p3) << ',' << format_double(H) << ',' << format_double(un)
            << "\n";
    }
    log << "simulate: wrote " << traj.times.size() << " samples ("
        << (fs::path(opts.out_dir) / "trajectory.csv").string() << ")\n";
    return 0;
}

int run_floquet(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
    if (cfg.experiment.a_grid.empty()) throw SpecError("floquet needs a non-empty a_grid");
    const SystemSpec spec = cfg.build_spec();
    const StepperConfig stepper = cfg.build_stepper();
    const OrbitOptions orbit_opts = cfg.build_orbit_options();

    json records = json::array();
    for (double a : cfg.experiment.a_grid) {
        const TorusFrame frame = make_torus_frame(spec, a, orbit_opts, stepper);
        const FloquetData& fd = frame.data;
        json rec;
        rec["a"] = a;
        rec["omega"] = fd.omega;
        rec["xi"] = fd.xi;
        rec["sigma"] = fd.sigma;
        rec["axis"] = {fd.axis[0], fd.axis[1], fd.axis[2]};
        rec["resonant"] = fd.resonant;
        rec["period"] = frame.orbit.period;
        rec["basepoint_q3"] = frame.orbit.basepoint_q3;
        rec["Phi1"] = matrix_to_json(fd.Phi1);
        rec["Abar"] = matrix_to_json(fd.Abar);
        rec["ortho_defect"] = fd.ortho_defect;
        rec["det_defect"] = fd.det_defect;
        rec["exp_defect"] = fd.exp_defect;
        records.push_back(std::move(rec));
    }

    json doc;
    doc["format_version"] = kFormatVersion;
    doc["kind"] = "floquet";
    doc["config"] = json::parse(cfg.to_json_text());
    doc["records"] = std::move(records);

    std::ofstream out = open_artifact(fs::path(opts.out_dir) / "floquet.json", opts.force);
    out << doc.dump(2) << "\n";
    log << "floquet: wrote " << cfg.experiment.a_grid.size() << " records ("
        << (fs::path(opts.out_dir) / "floquet.json").string() << ")\n";
    return 0;
}

int run_scan(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
    const SystemSpec base = cfg.build_spec();
    KamScanConfig scan_cfg = cfg.build_scan_config();
    if (opts.seed_override) scan_cfg.seeds = {*opts.seed_override};
    scan_cfg.threads = resolve_threads(opts.threads);

    const ScanResult result = kam_scan(base, scan_cfg);

    const fs::path csv_path = fs::path(opts.out_dir) / "scan.csv";
    const fs::path json_path = fs::path(opts.out_dir) / "scan.json";
    std::ofstream csv = open_artifact(csv_path, opts.force);
    write_csv_header(csv, "scan", cfg);
    csv << "g_label,epsilon,method,h,T,seed,max_drift_H,max_drift_a,max_drift_b,max_drift_c,"
           "slope_H,slope_a,slope_b,slope_c,"
           "slope_stderr_H,slope_stderr_a,slope_stderr_b,slope_stderr_c,rev_defect,verdict\n";
    json rows = json::array();
    for (const ScanRow& r : result.rows) {
        csv << r.g_label << ',' << format_double(r.epsilon) << ',' << r.method << ','
            << format_double(r.h) << ',' << format_double(r.T) << ',' << r.seed << ','
            << format_double(r.max_drift_H) << ',' << format_double(r.max_drift_a) << ','
            << format_double(r.max_drift_b) << ',' << format_double(r.max_drift_c) << ','
            << format_double(r.slope_H) << ',' << format_double(r.slope_a) << ','
            << format_double(r.slope_b) << ',' << format_double(r.slope_c) << ','
            << format_double(r.slope_stderr_H) << ',' << format_double(r.slope_stderr_a) << ','
            << format_double(r.slope_stderr_b) << ',' << format_double(r.slope_stderr_c) << ','
            << format_double(r.rev_defect) << ',' << r.verdict << "\n";
        json jr;
        jr["g_label"] = r.g_label;
        jr["epsilon"] = r.epsilon;
        jr["method"] = r.method;
        jr["h"] = r.h;
        jr["T"] = r.T;
        jr["seed"] = r.seed;
        jr["max_drift"] = {{"H", r.max_drift_H},
                           {"a", r.max_drift_a},
                           {"b", r.max_drift_b},
                           {"c", r.max_drift_c}};
        jr["slope"] = {{"H", r.slope_H}, {"a", r.slope_a}, {"b", r.slope_b}, {"c", r.slope_c}};
        jr["slope_stderr"] = {{"H", r.slope_stderr_H},
                              {"a", r.slope_stderr_a},
                              {"b", r.slope_stderr_b},
                              {"c", r.slope_stderr_c}};
        jr["rev_defect"] = r.rev_defect;
        jr["verdict"] = r.verdict;
        rows.push_back(std::move(jr));
    }
    json doc;
    doc["format_version"] = kFormatVersion;
    doc["kind"] = "scan";
    doc["config"] = json::parse(cfg.to_json_text());
    doc["rows"] = std::move(rows);
    std::ofstream js = open_artifact(json_path, opts.force);
    js << doc.dump(2) << "\n";

    log << "scan: " << result.rows.size() << " rows (" << csv_path.string() << ", "
        << json_path.string() << ")\n";
    return 0;
}

int run_check(const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
    (void)opts;
    const SystemSpec spec = cfg.build_spec();
    SystemSpec chart = spec;
    chart.epsilon = 0.0;
    chart.perturbation.reset();
    const StepperConfig stepper = cfg.build_stepper();
    const OrbitOptions orbit_opts = cfg.build_orbit_options();
    const ReducedState s0 = cfg.build_initial_state();

    struct CheckLine {
        std::string name;
        double defect = 0.0;
        double tol = 0.0;
        bool skipped = false;
        std::string note;
    };
    std::vector<CheckLine> checks;
    auto add = [&](const std::string& name, double defect, double tol) {
        checks.push_back({name, defect, tol, false, {}});
    };
    auto skip = [&](const std::string& name, const std::string& note) {
        checks.push_back({name, 0.0, 0.0, true, note});
    };

    StepperConfig ref = stepper;
    ref.method = Method::reference;

    // Chart equivalence: DAE vs reduced integration from matched states.
    {
        const double t_end = 20.0;
        const VectorFieldHandle red = reduced_field(chart);
        const VectorFieldHandle dae = dae_field(chart);
        const Vec xr = reference_endpoint(red, s0.to_vector(), 0.0, t_end, ref);
        const Vec xf =
            reference_endpoint(dae, embed(chart, s0).to_vector(), 0.0, t_end, ref);
        const ReducedState proj =
            project(chart, FullState::from_vector(Vec6(xf)), 1e-6);
        add("chart_equivalence", (proj.to_vector() - Vec5(xr)).cwiseAbs().maxCoeff(), 1e-8);
    }

    const double a0 = chart.F(s0.q3, s0.p3);
    const TorusFrame frame = make_torus_frame(chart, a0, orbit_opts, ref);

    // Conservation along a reference trajectory.
    {
        const DriftReport drift = invariant_drift(chart, s0, ref, 100.0, 1.0, frame);
        add("energy_conservation", drift.find("H")->max_abs, 1e-9);
        add("u_norm_conservation", drift.find("u_norm")->max_abs, 1e-9);
    }

    // Floquet machinery.
    add("monodromy_orthogonality", frame.data.ortho_defect, 1e-10);
    add("monodromy_determinant", frame.data.det_defect, 1e-10);
    add("exp_log_roundtrip", frame.data.exp_defect, 1e-9);
    {
        const Mat3 lhs = flow_Phi(chart, frame.orbit, 1.35, ref);
        const Mat3 rhs = flow_Phi(chart, frame.orbit, 0.35, ref) * frame.data.Phi1;
        add("floquet_property", (lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
    }

    // Reversibility identities of the construction.
    try {
        const ReversibilityReport rep = check_reversibility(chart, frame.orbit, frame.data, ref);
        add("reversibility_identities", rep.max_defect(), 1e-8);
    } catch (const HalfTurn& e) {
        skip("reversibility_identities", e.what());
    }

    // Psi conjugacy: v(t) stays on the exp(Abar theta) rotation of v(0).
    try {
        if (frame.data.sigma <= kResonanceTol) {
            skip("psi_conjugacy", "sigma ~ 0 (resonant torus)");
        } else {
            const double T10 = 10.0 * frame.orbit.period;
            const Trajectory traj = integrate_chart(chart, s0, ref, T10, frame.orbit.period / 8);
            double defect = 0.0;
            ActionAngle aa0 = action_angle_coords(chart, frame.orbit, frame.data,
                                                  ReducedState::from_vector(Vec5(traj.states[0])),
                                                  ref);
            double theta_prev = aa0.theta, theta_unwrapped = aa0.theta;
            for (std::size_t i = 1; i < traj.states.size(); ++i) {
                const ReducedState s = ReducedState::from_vector(Vec5(traj.states[i]));
                const double th = orbit_phase(chart, frame.orbit, s.q3, s.p3, ref);
                double dth = th - theta_prev;
                dth -= std::round(dth - frame.orbit.omega * frame.orbit.period / 8);
                theta_unwrapped += dth;
                theta_prev = th;
                const Vec3 v = psi_transform(chart, frame.orbit, frame.data,
                                             u_coords(chart, s), th);
                const Vec3 expected =
                    so3_exp(frame.data.sigma * (theta_unwrapped - aa0.theta) * frame.data.axis) *
                    aa0.v;
                defect = std::max(defect, (v - expected).cwiseAbs().maxCoeff());
            }
            add("psi_conjugacy", defect, 1e-7);
        }
    } catch (const HalfTurn& e) {
        skip("psi_conjugacy", e.what());
    }

    // Discrete reversibility of the midpoint rule at the configured tolerances.
    {
        StepperConfig mid = stepper;
        mid.method = Method::implicit_midpoint;
        const double defect = reversibility_defect(reduced_field(chart), Method::implicit_midpoint,
                                                   s0.to_vector(), mid.h, mid, reversal_vec);
        add("midpoint_reversibility_defect", defect, 1e-10);
    }

    bool all_pass = true;
    for (const CheckLine& c : checks) {
        if (c.skipped) {
            log << "[SKIP] " << c.name << " (" << c.note << ")\n";
            continue;
        }
        const bool pass = c.defect <= c.tol;
        all_pass = all_pass && pass;
        log << (pass ? "[PASS] " : "[FAIL] ") << c.name << " defect=" << format_double(c.defect)
            << " tol=" << format_double(c.tol) << "\n";
    }
    log << (all_pass ? "check: all properties hold\n" : "check: FAILURES present\n");
    return all_pass ? 0 : 1;
}

int dispatch(const std::string& subcommand, const std::string& config_path,
             const RunOptions& opts, std::ostream& log, std::ostream& err) {
    try {
        const ExperimentConfig cfg =
            config_path.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(config_path);
        if (subcommand == "simulate") return run_simulate(cfg, opts, log);
        if (subcommand == "floquet") return run_floquet(cfg, opts, log);
        if (subcommand == "scan") return run_scan(cfg, opts, log);
        if (subcommand == "check") return run_check(cfg, opts, log);
        err << "unknown subcommand '" << subcommand << "'\n";
        return 2;
    } catch (const SpecError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "numerical failure (" << error_kind(e) << "): " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace nonholo::cli
