#include "nonholo/experiment.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace nonholo {

namespace {

using json = nlohmann::ordered_json;

void check_keys(const json& j, const char* ctx, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw SpecError(std::string(ctx) + " must be a JSON object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw SpecError("unknown key '" + item.key() + "' in " + ctx);
    }
}

template <typename T>
void get_if_present(const json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) {
        try {
            out = it->get<T>();
        } catch (const json::exception& e) {
            throw SpecError(std::string("bad value for '") + key + "': " + e.what());
        }
    }
}

void apply_preset(ExperimentConfig::System& sys) {
    if (sys.preset.empty()) return;
    if (sys.preset == "contact") {
        sys.coupling = "linear";
        sys.subsystem = "harmonic";
    } else if (sys.preset == "cvt") {
        sys.coupling = "cvt";
        sys.subsystem = "harmonic";
    } else if (sys.preset == "decoupled") {
        sys.coupling = "zero";
        sys.subsystem = "harmonic";
    } else {
        throw SpecError("unknown preset '" + sys.preset + "'");
    }
    sys.params = Params{};
}

} // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw SpecError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "config", {"system", "perturbation", "integrator", "experiment"});

    ExperimentConfig cfg;
    if (j.contains("system")) {
        const json& s = j["system"];
        check_keys(s, "system",
                   {"preset", "params", "coupling", "coupling_coefficients", "subsystem",
                    "subsystem_coefficients"});
        get_if_present(s, "preset", cfg.system.preset);
        apply_preset(cfg.system); // explicit keys below override preset choices
        if (s.contains("params")) {
            const json& p = s["params"];
            check_keys(p, "system.params", {"m1", "m2", "k1", "k2"});
            get_if_present(p, "m1", cfg.system.params.m1);
            get_if_present(p, "m2", cfg.system.params.m2);
            get_if_present(p, "k1", cfg.system.params.k1);
            get_if_present(p, "k2", cfg.system.params.k2);
        }
        get_if_present(s, "coupling", cfg.system.coupling);
        get_if_present(s, "coupling_coefficients", cfg.system.coupling_coefficients);
        get_if_present(s, "subsystem", cfg.system.subsystem);
        get_if_present(s, "subsystem_coefficients", cfg.system.subsystem_coefficients);
    }
    if (j.contains("perturbation")) {
        const json& p = j["perturbation"];
        check_keys(p, "perturbation", {"g", "epsilon"});
        get_if_present(p, "g", cfg.perturbation.g);
        get_if_present(p, "epsilon", cfg.perturbation.epsilon);
    }
    if (j.contains("integrator")) {
        const json& i = j["integrator"];
        check_keys(i, "integrator",
                   {"method", "h", "newton_tol", "newton_max_iters", "reference_tol"});
        get_if_present(i, "method", cfg.integrator.method);
        get_if_present(i, "h", cfg.integrator.h);
        get_if_present(i, "newton_tol", cfg.integrator.newton_tol);
        get_if_present(i, "newton_max_iters", cfg.integrator.newton_max_iters);
        get_if_present(i, "reference_tol", cfg.integrator.reference_tol);
    }
    if (j.contains("experiment")) {
        const json& e = j["experiment"];
        check_keys(e, "experiment",
                   {"T", "sample_dt", "initial_state", "a_grid", "torus_a", "seeds", "epsilons",
                    "methods", "g_labels", "orbit_window", "time_cap"});
        get_if_present(e, "T", cfg.experiment.T);
        get_if_present(e, "sample_dt", cfg.experiment.sample_dt);
        get_if_present(e, "initial_state", cfg.experiment.initial_state);
        get_if_present(e, "a_grid", cfg.experiment.a_grid);
        get_if_present(e, "torus_a", cfg.experiment.torus_a);
        get_if_present(e, "seeds", cfg.experiment.seeds);
        get_if_present(e, "epsilons", cfg.experiment.epsilons);
        get_if_present(e, "methods", cfg.experiment.methods);
        get_if_present(e, "g_labels", cfg.experiment.g_labels);
        get_if_present(e, "orbit_window", cfg.experiment.orbit_window);
        get_if_present(e, "time_cap", cfg.experiment.time_cap);
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string ExperimentConfig::to_json_text() const {
    json j;
    j["system"] = {{"preset", system.preset},
                   {"params",
                    {{"m1", system.params.m1},
                     {"m2", system.params.m2},
                     {"k1", system.params.k1},
                     {"k2", system.params.k2}}},
                   {"coupling", system.coupling},
                   {"coupling_coefficients", system.coupling_coefficients},
                   {"subsystem", system.subsystem},
                   {"subsystem_coefficients", system.subsystem_coefficients}};
    j["perturbation"] = {{"g", perturbation.g}, {"epsilon", perturbation.epsilon}};
    j["integrator"] = {{"method", integrator.method},
                       {"h", integrator.h},
                       {"newton_tol", integrator.newton_tol},
                       {"newton_max_iters", integrator.newton_max_iters},
                       {"reference_tol", integrator.reference_tol}};
    j["experiment"] = {{"T", experiment.T},
                       {"sample_dt", experiment.sample_dt},
                       {"initial_state", experiment.initial_state},
                       {"a_grid", experiment.a_grid},
                       {"torus_a", experiment.torus_a},
                       {"seeds", experiment.seeds},
                       {"epsilons", experiment.epsilons},
                       {"methods", experiment.methods},
                       {"g_labels", experiment.g_labels},
                       {"orbit_window", experiment.orbit_window},
                       {"time_cap", experiment.time_cap}};
    return j.dump();
}

SystemSpec ExperimentConfig::build_spec() const {
    SystemSpec spec;
    spec.params = system.params;
    spec.coupling = make_coupling(system.coupling, system.coupling_coefficients);
    spec.subsystem = make_subsystem(system.subsystem, system.subsystem_coefficients);
    spec.perturbation = make_perturbation(perturbation.g);
    spec.epsilon = perturbation.epsilon;
    spec.label = system.preset.empty() ? "custom" : system.preset;
    spec.validate();
    return spec;
}

StepperConfig ExperimentConfig::build_stepper() const {
    StepperConfig cfg;
    cfg.method = method_from_string(integrator.method);
    cfg.h = integrator.h;
    cfg.newton_tol = integrator.newton_tol;
    cfg.newton_max_iters = integrator.newton_max_iters;
    cfg.reference_tol = integrator.reference_tol;
    cfg.validate();
    return cfg;
}

OrbitOptions ExperimentConfig::build_orbit_options() const {
    OrbitOptions opts;
    opts.window_min = experiment.orbit_window[0];
    opts.window_max = experiment.orbit_window[1];
    opts.time_cap = experiment.time_cap;
    return opts;
}

ReducedState ExperimentConfig::build_initial_state() const {
    const auto& x = experiment.initial_state;
    return ReducedState{x[0], x[1], x[2], x[3], x[4]};
}

KamScanConfig ExperimentConfig::build_scan_config() const {
    KamScanConfig scan;
    scan.g_labels = experiment.g_labels;
    scan.epsilons = experiment.epsilons;
    scan.methods.clear();
    for (const auto& m : experiment.methods) scan.methods.push_back(method_from_string(m));
    scan.seeds = experiment.seeds;
    scan.T = experiment.T;
    scan.sample_dt = experiment.sample_dt;
    scan.torus_a = experiment.torus_a;
    scan.stepper = build_stepper();
    return scan;
}

} // namespace nonholo
