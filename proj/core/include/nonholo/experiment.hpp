#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nonholo/diagnostics.hpp"

namespace nonholo {

/// Experiment configuration, a strict one-document JSON schema. Unknown keys
/// are rejected; serialization materializes every resolved field so emitted
/// artifacts are self-describing and round-trip byte-for-byte.
struct ExperimentConfig {
    struct System {
        std::string preset; // "", "contact", "cvt", "decoupled"
        Params params;
        std::string coupling = "linear";
        std::vector<double> coupling_coefficients;
        std::string subsystem = "harmonic";
        std::vector<double> subsystem_coefficients;
    };
    struct PerturbationCfg {
        std::string g = "none";
        double epsilon = 0.0;
    };
    struct Integrator {
        std::string method = "reference";
        double h = 0.05;
        double newton_tol = 1e-12;
        int newton_max_iters = 50;
        double reference_tol = 1e-12;
    };
    struct Experiment {
        double T = 100.0;
        double sample_dt = 1.0;
        std::array<double, 5> initial_state{1.0, 0.0, 0.0, 0.0, 1.0};
        std::vector<double> a_grid{0.25, 0.5, 1.0};
        double torus_a = 0.5;
        std::vector<std::uint64_t> seeds{1};
        std::vector<double> epsilons{0.0, 1e-3, 1e-2};
        std::vector<std::string> methods{"implicit_midpoint", "rk4"};
        std::vector<std::string> g_labels{"q1_quartic"};
        std::array<double, 2> orbit_window{-10.0, 10.0};
        double time_cap = 1000.0;
    };

    System system;
    PerturbationCfg perturbation;
    Integrator integrator;
    Experiment experiment;

    /// Strict parse; throws SpecError on unknown keys, wrong types, or
    /// malformed JSON.
    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);

    /// Canonical single-line JSON with every field materialized.
    std::string to_json_text() const;

    SystemSpec build_spec() const;
    StepperConfig build_stepper() const;
    OrbitOptions build_orbit_options() const;
    ReducedState build_initial_state() const;
    KamScanConfig build_scan_config() const;
};

} // namespace nonholo
