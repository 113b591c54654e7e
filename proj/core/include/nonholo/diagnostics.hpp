#pragma once

#include <cstdint>
#include <map>
#include <optional>

#include "nonholo/floquet.hpp"

namespace nonholo {

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = std::numeric_limits<double>::infinity();
    double resid_max = 0.0;

    /// |slope| > k standard errors.
    bool significant(double k = 5.0) const;
};

LinearFit ols_fit(std::span<const double> t, std::span<const double> y);

/// Action-angle frame of one torus: the subsystem orbit and its Floquet data,
/// always taken at epsilon = 0 (perturbed runs are measured through the
/// unperturbed chart).
struct TorusFrame {
    SystemSpec chart_spec; // epsilon forced to 0
    SubsystemOrbit orbit;
    FloquetData data;
};

TorusFrame make_torus_frame(const SystemSpec& spec, double a, const OrbitOptions& opts = {},
                            const StepperConfig& cfg = {});

/// Integrates the chart dynamics of spec (reduced field, or the induced field
/// when perturbed) from s0 over [0, T], sampled every sample_dt. Fixed-step
/// methods round sample_dt to a whole number of steps.
Trajectory integrate_chart(const SystemSpec& spec, const ReducedState& s0,
                           const StepperConfig& cfg, double T, double sample_dt);

/// Physical phase-space point of a chart point: the embedded M0 state for
/// unperturbed specs, the matching M_eps point otherwise.
FullState lift_to_physical(const SystemSpec& spec, const SystemSpec& chart_spec,
                           const ReducedState& s);

struct DriftSeries {
    std::string label;
    std::vector<double> deviation; // value(t) - value(0)
    double max_abs = 0.0;
    LinearFit trend;
};

/// Deviation-from-initial time series of the tracked invariants. H and |u|
/// are always present; a, b, c require a non-resonant frame.
struct DriftReport {
    std::vector<double> times;
    std::vector<DriftSeries> series;

    const DriftSeries* find(const std::string& label) const;
};

/// Integrates spec from s0 with the configured method over [0, T], sampling
/// every sample_dt, and reports invariant deviations with fitted trends.
/// Perturbed specs are integrated with the induced field on the M0 chart and
/// measured through the epsilon = 0 chart of `frame`.
DriftReport invariant_drift(const SystemSpec& spec, const ReducedState& s0,
                            const StepperConfig& cfg, double T, double sample_dt,
                            const TorusFrame& frame);

/// Convenience overload: the frame is built on s0's subsystem level set.
DriftReport invariant_drift(const SystemSpec& spec, const ReducedState& s0,
                            const StepperConfig& cfg, double T, double sample_dt);

struct RotationNumbers {
    double omega_est = 0.0;
    double xi_est = 0.0;
    double theta_resid = 0.0;
    double phi_resid = 0.0;
    bool reliable = false; // >= 50 subsystem periods of data
};

/// Unwraps theta(t), phi(t) along a reduced-chart trajectory and fits their
/// slopes by least squares.
RotationNumbers rotation_numbers(const SystemSpec& spec, const SubsystemOrbit& orbit,
                                 const FloquetData& fd, const Trajectory& traj,
                                 const StepperConfig& cfg = {});

struct SectionPoint {
    double t = 0.0;
    Vec3 u = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    double b = std::numeric_limits<double>::quiet_NaN();
    double c = std::numeric_limits<double>::quiet_NaN();
    double phi = std::numeric_limits<double>::quiet_NaN();
};

/// Crossings of the subsystem section theta = 0 along a reduced trajectory.
/// Crossing times are located by linear interpolation of p3 between samples;
/// the invariants (b, c) are read at the bracketing sample and phi is
/// advanced linearly to the crossing. Throws NoCrossings.
std::vector<SectionPoint> poincare_section(const SystemSpec& spec, const TorusFrame& frame,
                                           const Trajectory& traj,
                                           const StepperConfig& cfg = {});

struct ScanRow {
    std::string g_label;
    double epsilon = 0.0;
    std::string method;
    double h = 0.0;
    double T = 0.0;
    std::uint64_t seed = 0;
    double max_drift_H = 0.0, max_drift_a = 0.0, max_drift_b = 0.0, max_drift_c = 0.0;
    double slope_H = 0.0, slope_a = 0.0, slope_b = 0.0, slope_c = 0.0;
    double slope_stderr_H = 0.0, slope_stderr_a = 0.0, slope_stderr_b = 0.0,
           slope_stderr_c = 0.0;
    double rev_defect = 0.0;
    std::string verdict; // "secular" | "bounded"
};

struct KamScanConfig {
    std::vector<std::string> g_labels = {"q1_quartic"};
    std::vector<double> epsilons = {0.0, 1e-3, 1e-2}; // must contain 0
    std::vector<Method> methods = {Method::implicit_midpoint, Method::rk4};
    std::vector<std::uint64_t> seeds = {1};
    double T = 1e4;
    double sample_dt = 1.0;
    double torus_a = 0.5;
    StepperConfig stepper;
    int threads = 1;
};

struct ScanResult {
    std::vector<ScanRow> rows; // sorted by (g_label, epsilon, method, seed)
};

/// Long-time drift experiment over the (G, epsilon, method, seed) grid.
/// epsilon = 0 rows are the controls; a row is "secular" when some invariant
/// trend is > 5 standard errors from zero and (for epsilon > 0) its total
/// drift exceeds 10x the matching control row.
ScanResult kam_scan(const SystemSpec& base, const KamScanConfig& cfg);

struct FrequencyPoint {
    double a = 0.0;
    double omega = 0.0;
    double xi = 0.0;
    double sigma = 0.0;
    bool resonant = false;
};

struct FrequencyMapResult {
    std::vector<FrequencyPoint> points;
    std::vector<double> skipped_a; // half-turn or failed tori
    double c_fit = 0.0;            // best xi ~ c * omega
    double max_residual = 0.0;
    double ratio_variation = 0.0; // max - min of xi/omega over the grid
    std::string verdict;          // "independent" | "dependent"
};

/// Frequencies per torus over the grid plus the linear-dependence verdict of
/// the frequency-independence condition of reversible KAM stability. Throws
/// InsufficientGrid below 10 valid points.
FrequencyMapResult frequency_map(const SystemSpec& spec, std::span<const double> a_grid,
                                 const OrbitOptions& opts = {}, const StepperConfig& cfg = {});

/// Reversal maps for the chart (dimension 5) and full (dimension 6) states.
Vec reversal_vec(const Vec& x);

} // namespace nonholo
