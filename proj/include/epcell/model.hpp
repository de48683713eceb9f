#pragma once

#include <map>
#include <optional>
#include <string>

namespace epcell {

/// Initial membrane jump V^in on the interface: either a constant or a
/// cosine profile amp*cos(theta) in the interface angle.
struct InitialJump {
    enum class Kind { Constant, Cosine };
    Kind kind = Kind::Constant;
    double amplitude = 0.0;

    double eval(double theta) const;
};

/// Quadrature rule for the memory integrals over tau.
enum class TauQuadrature { Trapezoid, Rectangle };

/// How the initial kernel trace -(sigma_c/c_m)(grad M_1 + e_1).n is
/// extracted at interface nodes.
enum class FluxExtraction { EdgeAverage, Multiplier };

/// All physical and numerical constants of the cell-scale model.
/// Units are whatever the configuration uses; the engine only requires
/// internal consistency (voltages in V so that beta's thresholds apply,
/// times in the unit of tau_ep/tau_res).
struct ModelParams {
    double sigma_c = 4.789e-3;  // intracellular bulk conductivity
    double sigma_e = 0.0526;    // extracellular bulk conductivity
    double c_m = 1.0;         // membrane capacitance
    double S_L = 2e-4;        // lipid membrane surface conductivity
    double S_ir = 2.63e4;     // irreversible-threshold surface conductivity
    double tau_ep = 1.0;      // electropermeabilization time
    double tau_res = 1000.0;  // resealing time
    double k_ep = 40.0;       // beta steepness [1/V]
    double V_rev = 1.5;       // beta threshold voltage [V]
    double radius = 0.25;     // inclusion radius in the unit cell
    double g = 0.0;           // applied boundary voltage amplitude
    double L = 1.0;           // plate separation (macroscopic gradient g/L)
    double ell = 2e-4;        // microscopic cell size [m]
    double L0 = 1e-2;         // sample size [m]
    double t_end = 100.0;     // final time
    double dt = 1.0 / 6.0;    // time step
    double mesh_h = 0.02;     // target mesh size
    std::optional<double> trunc_M;  // truncation level; absent = untruncated
    double x_init = 0.0;      // initial poration degree
    InitialJump v_init;       // initial membrane jump V^in

    // Engine options (documented config keys, not physics).
    TauQuadrature quadrature = TauQuadrature::Trapezoid;
    FluxExtraction flux_mode = FluxExtraction::EdgeAverage;
    bool full_tensor = false;  // evolve both kernel directions

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Named defaults: "paper2024" is the disc r=0.25 configuration with the
/// published dimensionless constants (sigma_e = 0.0526, sigma_c =
/// 4.789e-3, contrast 0.091). Multiply conductivity outputs by
/// 5 / 0.0526 to convert to the mS/cm scale of the published static
/// limits 3.5941 / 3.3587.
ModelParams preset(const std::string& name);

/// beta(v) = (1 + tanh(k_ep (|v| - V_rev))) / 2, even in v, in [0,1].
double beta(double v, const ModelParams& p);

/// S_m(X) = S_L + X (S_ir - S_L). Requires X in [0,1].
double membrane_conductivity(double x, const ModelParams& p);

/// f(v, X) = max((beta(v)-X)/tau_ep, (beta(v)-X)/tau_res).
double poration_rhs(double v, double x, const ModelParams& p);

/// Rate 1/tau used by the semi-implicit poration update: 1/tau_ep while
/// beta(v) >= X, else 1/tau_res.
double poration_rate(double v, double x, const ModelParams& p);

/// S_L v + (S_ir - S_L) X clamp(v, +-M); coincides with S_m(X) v for
/// |v| <= M. Without trunc_M configured, falls back to S_m(X) v.
double truncated_membrane_current(double v, double x, const ModelParams& p);

/// |E| in V/cm for applied voltage g, via E = g/ell [V/m].
double voltage_to_field(double g, const ModelParams& p);
double field_to_voltage(double e_field, const ModelParams& p);

/// Paper end times per pulse magnitude |E| in V/cm; empty if |E| is not
/// one of the tabulated values.
std::optional<double> end_time_for_field(double e_field);
const std::map<double, double>& end_time_table();

/// Parses flat "key = value" text ('#' comments). Unknown keys throw.
/// Keys match the ModelParams field names.
ModelParams parse_params(const std::string& text, ModelParams base = {});
ModelParams parse_params_file(const std::string& path, ModelParams base = {});

/// Serializes the effective configuration in the same key = value format.
std::string echo_params(const ModelParams& p);

}  // namespace epcell
