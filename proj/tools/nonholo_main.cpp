#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nonholo/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{
        "nonholo: nonholonomically coupled oscillators - constraint reduction, "
        "Floquet action-angle construction, and long-time integrator experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    bool force = false;
    std::int64_t seed = -1;
    int threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment configuration file (JSON)");
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_flag("--force", force, "overwrite existing artifacts");
        sub->add_option("--seed", seed, "override the config seed list with a single seed");
        sub->add_option("--threads", threads, "worker threads (0 = auto, NONHOLO_THREADS fallback)");
    };
    add_common(app.add_subcommand("simulate", "integrate one trajectory and write CSV"));
    add_common(app.add_subcommand("floquet", "monodromy and frequency data over the a-grid"));
    add_common(app.add_subcommand("scan", "long-time invariant-drift scan over (G, eps, method)"));
    add_common(app.add_subcommand("check", "run the invariant/property suite"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    nonholo::cli::RunOptions opts;
    opts.out_dir = out_dir;
    opts.force = force;
    opts.threads = threads;
    if (seed >= 0) opts.seed_override = static_cast<std::uint64_t>(seed);

    const std::string sub = app.get_subcommands().front()->get_name();
    return nonholo::cli::dispatch(sub, config_path, opts, std::cout, std::cerr);
}
