#pragma once

#include <string>
#include <vector>

#include "epcell/evolution.hpp"
#include "epcell/model.hpp"

namespace epcell {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
    enum class Kind { Run, SweepField, ConvergenceMesh, ConvergenceTime, Validate };
    Kind kind = Kind::Run;
    ModelParams params;
    std::vector<double> sweep_fields;   // |E| values [V/cm]
    std::vector<double> mesh_levels = {0.04, 0.02, 0.01};
    int time_levels = 4;                // refinements by 1/1.5
    int sweep_steps = 600;              // time steps per sweep point
    bool emit_kernel = false;
    std::string out_dir = ".";
    int threads = 1;
};

/// Default sweep grid: the tabulated pulse magnitudes.
std::vector<double> default_sweep_fields();

struct SweepPoint {
    double e_field = 0.0;
    double t_end = 0.0;
    double sigma_eff11_final = 0.0;
    double sm_avg_final = 0.0;
};

struct ConvergenceReport {
    std::vector<double> level;       // h or dt
    std::vector<double> sigma11;     // sigma_eff,11(T) per level
    std::vector<double> difference;  // |level i vs refined|
    double slope = 0.0;              // fitted log-log slope
};

std::vector<SweepPoint> sweep_field(const ExperimentSpec& spec);
ConvergenceReport converge_mesh(const ExperimentSpec& spec);
ConvergenceReport converge_time(const ExperimentSpec& spec);

/// Runs the experiment and writes its artifact files into spec.out_dir.
/// Returns the process exit status (0 ok). Configuration problems throw
/// ConfigError; numerical failures propagate as other exceptions.
int run_experiment(const ExperimentSpec& spec);

/// CSV writers (comma-separated, header row, 12 significant digits).
void write_sigma_eff_csv(const EvolutionResult& r, const std::string& path);
void write_membrane_csv(const EvolutionResult& r, const std::string& path);
void write_kernel_csv(const EvolutionResult& r, const std::string& path);

}  // namespace epcell
