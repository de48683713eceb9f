// Command-line driver for the homogenized electroporation engine.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epcell/experiments.hpp"

namespace {

int default_threads() {
    if (const char* env = std::getenv("EPCELL_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

epcell::ModelParams resolve_params(const std::string& preset_name,
                                   const std::string& config_path,
                                   const std::vector<std::string>& sets) {
    epcell::ModelParams p = epcell::preset(preset_name);
    if (!config_path.empty()) p = epcell::parse_params_file(config_path, p);
    std::string overrides;
    for (const auto& s : sets) overrides += s + "\n";
    if (!overrides.empty()) p = epcell::parse_params(overrides, p);
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Effective conductivity of periodically arranged porated cells"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", preset_name = "paper2024";
    std::vector<std::string> sets;
    int threads = default_threads();
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--set", sets, "inline override, key=value (repeatable)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--preset", preset_name, "parameter preset name");
    app.add_option("--threads", threads, "worker thread count");

    auto* run = app.add_subcommand("run", "single simulation; writes sigma_eff.csv and membrane.csv");
    bool emit_kernel = false;
    run->add_flag("--kernel", emit_kernel, "also write the kernel triangle (kernel.csv)");

    auto* sweep = app.add_subcommand("sweep", "pulse-magnitude sweep; writes sweep.csv");
    std::vector<double> fields;
    int sweep_steps = 600;
    sweep->add_option("--fields", fields, "|E| values in V/cm (default: built-in table)");
    sweep->add_option("--steps", sweep_steps, "time steps per sweep point");

    auto* cmesh = app.add_subcommand("converge-mesh", "h-refinement study");
    std::vector<double> hs = {0.04, 0.02, 0.01};
    cmesh->add_option("--levels", hs, "mesh sizes, coarse to fine");

    auto* ctime = app.add_subcommand("converge-time", "dt-refinement study (factor 1.5)");
    int time_levels = 4;
    ctime->add_option("--levels", time_levels, "number of refinements");

    app.add_subcommand("validate", "compare static tensors against the multipole reference");

    CLI11_PARSE(app, argc, argv);

    epcell::ExperimentSpec spec;
    try {
        spec.params = resolve_params(preset_name, config_path, sets);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    spec.out_dir = out_dir;
    spec.threads = threads;
    spec.emit_kernel = emit_kernel;
    spec.sweep_fields = fields.empty() ? epcell::default_sweep_fields() : fields;
    spec.sweep_steps = sweep_steps;
    spec.mesh_levels = hs;
    spec.time_levels = time_levels;

    if (run->parsed()) spec.kind = epcell::ExperimentSpec::Kind::Run;
    else if (sweep->parsed()) spec.kind = epcell::ExperimentSpec::Kind::SweepField;
    else if (cmesh->parsed()) spec.kind = epcell::ExperimentSpec::Kind::ConvergenceMesh;
    else if (ctime->parsed()) spec.kind = epcell::ExperimentSpec::Kind::ConvergenceTime;
    else spec.kind = epcell::ExperimentSpec::Kind::Validate;

    try {
        return epcell::run_experiment(spec);
    } catch (const epcell::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
