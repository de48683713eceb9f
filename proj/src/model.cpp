#include "epcell/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace epcell {

double InitialJump::eval(double theta) const {
    switch (kind) {
        case Kind::Constant: return amplitude;
        case Kind::Cosine: return amplitude * std::cos(theta);
    }
    return 0.0;
}

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("ModelParams: " + what);
}

}  // namespace

void ModelParams::validate() const {
    require(sigma_c > 0, "sigma_c must be > 0");
    require(sigma_e > 0, "sigma_e must be > 0");
    require(c_m > 0, "c_m must be > 0");
    require(S_L >= 0, "S_L must be >= 0");
    require(S_ir >= S_L, "S_ir must be >= S_L");
    require(tau_ep > 0, "tau_ep must be > 0");
    require(tau_res >= tau_ep, "tau_res must be >= tau_ep");
    require(x_init >= 0 && x_init <= 1, "x_init must be in [0,1]");
    require(radius > 0 && radius < 0.5, "radius must be in (0, 0.5)");
    require(mesh_h > 0, "mesh_h must be > 0");
    require(dt > 0, "dt must be > 0");
    require(t_end >= dt, "t_end must be >= dt");
    require(ell > 0, "ell must be > 0");
    require(L0 > 0, "L0 must be > 0");
    require(L > 0, "L must be > 0");
    require(k_ep > 0, "k_ep must be > 0");
    if (trunc_M) require(*trunc_M > 0, "trunc_M must be > 0");
}

ModelParams preset(const std::string& name) {
    if (name == "paper2024" || name == "default") {
        return ModelParams{};  // field initializers are the paper set
    }
    if (name == "homogeneous") {
        ModelParams p;
        p.sigma_c = p.sigma_e = 1.0;
        return p;
    }
    throw std::invalid_argument("unknown preset: " + name);
}

double beta(double v, const ModelParams& p) {
    if (!std::isfinite(v)) throw std::domain_error("beta: non-finite voltage");
    return 0.5 * (1.0 + std::tanh(p.k_ep * (std::abs(v) - p.V_rev)));
}

double membrane_conductivity(double x, const ModelParams& p) {
    if (!(x >= 0.0 && x <= 1.0))
        throw std::invalid_argument("membrane_conductivity: X outside [0,1]");
    return p.S_L + x * (p.S_ir - p.S_L);
}

double poration_rhs(double v, double x, const ModelParams& p) {
    if (!(x >= 0.0 && x <= 1.0))
        throw std::invalid_argument("poration_rhs: X outside [0,1]");
    const double d = beta(v, p) - x;
    return std::max(d / p.tau_ep, d / p.tau_res);
}

double poration_rate(double v, double x, const ModelParams& p) {
    return beta(v, p) >= x ? 1.0 / p.tau_ep : 1.0 / p.tau_res;
}

double truncated_membrane_current(double v, double x, const ModelParams& p) {
    const double s1 = p.S_ir - p.S_L;
    if (!p.trunc_M) return membrane_conductivity(x, p) * v;
    const double m = *p.trunc_M;
    return p.S_L * v + s1 * x * std::clamp(v, -m, m);
}

double voltage_to_field(double g, const ModelParams& p) {
    return g / p.ell / 100.0;  // V/m -> V/cm
}

double field_to_voltage(double e_field, const ModelParams& p) {
    return e_field * 100.0 * p.ell;
}

const std::map<double, double>& end_time_table() {
    static const std::map<double, double> table = {
        {0, 200},    {250, 200},  {500, 100}, {1000, 50}, {1250, 50},
        {1500, 30},  {2000, 30},  {2500, 20}, {3750, 20}, {5000, 10},
    };
    return table;
}

std::optional<double> end_time_for_field(double e_field) {
    for (const auto& [e, t] : end_time_table())
        if (std::abs(e - e_field) < 1e-9 * std::max(1.0, e)) return t;
    return std::nullopt;
}

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: unparsable value for '" + key +
                                    "': " + v);
    }
}

InitialJump parse_v_init(const std::string& v) {
    InitialJump j;
    if (v.rfind("cos:", 0) == 0) {
        j.kind = InitialJump::Kind::Cosine;
        j.amplitude = to_double("v_init", v.substr(4));
    } else {
        j.kind = InitialJump::Kind::Constant;
        j.amplitude = to_double("v_init", v);
    }
    return j;
}

}  // namespace

ModelParams parse_params(const std::string& text, ModelParams base) {
    ModelParams p = base;
    std::optional<double> e_field;
    bool t_end_set = false;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key == "sigma_c") p.sigma_c = to_double(key, val);
        else if (key == "sigma_e") p.sigma_e = to_double(key, val);
        else if (key == "c_m") p.c_m = to_double(key, val);
        else if (key == "S_L") p.S_L = to_double(key, val);
        else if (key == "S_ir") p.S_ir = to_double(key, val);
        else if (key == "tau_ep") p.tau_ep = to_double(key, val);
        else if (key == "tau_res") p.tau_res = to_double(key, val);
        else if (key == "k_ep") p.k_ep = to_double(key, val);
        else if (key == "V_rev") p.V_rev = to_double(key, val);
        else if (key == "radius") p.radius = to_double(key, val);
        else if (key == "g") p.g = to_double(key, val);
        else if (key == "L") p.L = to_double(key, val);
        else if (key == "ell") p.ell = to_double(key, val);
        else if (key == "L0") p.L0 = to_double(key, val);
        else if (key == "t_end") { p.t_end = to_double(key, val); t_end_set = true; }
        else if (key == "dt") p.dt = to_double(key, val);
        else if (key == "mesh_h") p.mesh_h = to_double(key, val);
        else if (key == "trunc_M") p.trunc_M = to_double(key, val);
        else if (key == "x_init") p.x_init = to_double(key, val);
        else if (key == "v_init") p.v_init = parse_v_init(val);
        else if (key == "E_field") e_field = to_double(key, val);
        else if (key == "quadrature") {
            if (val == "trapezoid") p.quadrature = TauQuadrature::Trapezoid;
            else if (val == "rectangle") p.quadrature = TauQuadrature::Rectangle;
            else throw std::invalid_argument("config: bad quadrature: " + val);
        } else if (key == "flux_mode") {
            if (val == "edge_average") p.flux_mode = FluxExtraction::EdgeAverage;
            else if (val == "multiplier") p.flux_mode = FluxExtraction::Multiplier;
            else throw std::invalid_argument("config: bad flux_mode: " + val);
        } else if (key == "full_tensor") {
            if (val == "true" || val == "1") p.full_tensor = true;
            else if (val == "false" || val == "0") p.full_tensor = false;
            else throw std::invalid_argument("config: bad full_tensor: " + val);
        } else {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
    if (e_field) {
        // Resolved last so it does not depend on key order relative to ell.
        p.g = field_to_voltage(*e_field, p);
        if (!t_end_set)
            if (auto t = end_time_for_field(*e_field)) p.t_end = *t;
    }
    p.validate();
    return p;
}

ModelParams parse_params_file(const std::string& path, ModelParams base) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_params(buf.str(), base);
}

std::string echo_params(const ModelParams& p) {
    std::ostringstream out;
    out.precision(17);
    out << "sigma_c = " << p.sigma_c << "\n"
        << "sigma_e = " << p.sigma_e << "\n"
        << "c_m = " << p.c_m << "\n"
        << "S_L = " << p.S_L << "\n"
        << "S_ir = " << p.S_ir << "\n"
        << "tau_ep = " << p.tau_ep << "\n"
        << "tau_res = " << p.tau_res << "\n"
        << "k_ep = " << p.k_ep << "\n"
        << "V_rev = " << p.V_rev << "\n"
        << "radius = " << p.radius << "\n"
        << "g = " << p.g << "\n"
        << "L = " << p.L << "\n"
        << "ell = " << p.ell << "\n"
        << "L0 = " << p.L0 << "\n"
        << "t_end = " << p.t_end << "\n"
        << "dt = " << p.dt << "\n"
        << "mesh_h = " << p.mesh_h << "\n";
    if (p.trunc_M) out << "trunc_M = " << *p.trunc_M << "\n";
    out << "x_init = " << p.x_init << "\n";
    if (p.v_init.kind == InitialJump::Kind::Cosine)
        out << "v_init = cos:" << p.v_init.amplitude << "\n";
    else
        out << "v_init = " << p.v_init.amplitude << "\n";
    out << "quadrature = "
        << (p.quadrature == TauQuadrature::Trapezoid ? "trapezoid" : "rectangle")
        << "\n";
    out << "flux_mode = "
        << (p.flux_mode == FluxExtraction::EdgeAverage ? "edge_average"
                                                       : "multiplier")
        << "\n";
    out << "full_tensor = " << (p.full_tensor ? "true" : "false") << "\n";
    return out.str();
}

}  // namespace epcell
