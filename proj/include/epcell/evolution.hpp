#pragma once

#include <Eigen/Dense>
#include <vector>

#include "epcell/cell_static.hpp"
#include "epcell/fem.hpp"
#include "epcell/model.hpp"

namespace epcell {

struct EvolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Initial kernel trace -(sigma_c/c_m)(grad M_1 + e_j) . n at interface
/// slots, extracted per ModelParams::flux_mode.
Eigen::VectorXd chi_initial(const CorrectorSet& c, const TransmissionSystem& s,
                            const ModelParams& p, int direction = 0);

/// Semi-implicit kernel update, nodewise and independent per tau column:
///   chi <- (chi - dt/c_m I_m) / (1 + dt/c_m S_m(X)).
/// `row` and `flux` are n_g x k (columns tau_m); X is per node.
void step_chi(Eigen::Ref<Eigen::MatrixXd> row, const Eigen::MatrixXd& flux,
              const Eigen::VectorXd& x0, double dt, const ModelParams& p,
              int cols);

/// Semi-implicit poration update with rate 1/tau_ep while beta >= X, else
/// 1/tau_res. Throws EvolutionError if the result leaves [0,1] beyond
/// 1e-14.
Eigen::VectorXd step_X(const Eigen::VectorXd& x0, const Eigen::VectorXd& u0,
                       double dt, const ModelParams& p);

/// Quadrature weights over tau_m, m = 0..k, for the memory integrals.
Eigen::VectorXd tau_weights(int k, double dt, TauQuadrature rule);

/// [u_0](t_k) = (g/L) sum_m w_m chi(t_k, tau_m) + z(t_k).
Eigen::VectorXd memory_u0(const Eigen::MatrixXd& chi_row, int k, double g,
                          double L, double dt, TauQuadrature rule,
                          const Eigen::VectorXd* z_jump = nullptr);

/// sigma_eff(t_k) = A + sum_m w_m B(t_k, tau_m).
Eigen::Matrix2d sigma_eff_at(const Eigen::Matrix2d& a,
                             const Eigen::MatrixXd& b_row, int k, double dt,
                             TauQuadrature rule);

/// Lumped-edge-length weighted mean of S_m(X) over the interface.
double avg_membrane_conductivity(const Eigen::VectorXd& x0,
                                 const std::vector<double>& weights,
                                 const ModelParams& p);

/// Standalone evolution of the z-problem for a given poration path
/// (columns of `x0_path` are X_0(t_k)). Returns the jump per step and
/// C(t_k) = int sigma grad z dy.
struct ZEvolution {
    Eigen::MatrixXd z_jump;         // n_g x (n_steps+1)
    std::vector<Eigen::Vector2d> c;  // per step
};
ZEvolution z_evolution(const Eigen::VectorXd& v_in,
                       const Eigen::MatrixXd& x0_path, const Factorization& f,
                       double dt, int n_steps, const ModelParams& p);

struct RunOptions {
    int threads = 1;
    bool record_kernel = false;  // keep the full scalar B11 triangle
};

/// Full output of one parallel-plate run.
struct EvolutionResult {
    std::vector<double> t;
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d A_insulating = Eigen::Matrix2d::Zero();

    // Per-step effective quantities.
    std::vector<Eigen::Matrix2d> sigma_eff;
    std::vector<double> b_integral11;
    std::vector<double> sm_avg;
    std::vector<Eigen::Vector2d> c_vec;  // zero when V^in = 0
    std::vector<double> pole_u0;
    std::vector<double> b11_tau0;  // B11(t_k, 0)
    double b11_diag = 0.0;         // B11(0,0)

    // Membrane series (columns are time steps).
    Eigen::MatrixXd u0_history;
    Eigen::MatrixXd x0_history;

    // Optional full kernel triangle: b11_triangle[k][m] = B11(t_k, tau_m).
    std::vector<std::vector<double>> b11_triangle;

    // Full-tensor mode only.
    std::vector<std::vector<double>> b12_triangle, b21_triangle;

    std::vector<double> interface_angles;
    std::vector<double> interface_mass;
};

/// Algorithm for the parallel-plate configuration: marches the kernel
/// triangle, the poration ODE and the membrane memory integral, and
/// accumulates sigma_eff(t), S_m averages, and membrane traces.
EvolutionResult run_two_plates(const ModelParams& p, const RunOptions& opt = {});

/// Variant reusing prebuilt structures (sweeps, convergence studies).
EvolutionResult run_two_plates(const ModelParams& p, const UnitCellMesh& mesh,
                               const TransmissionSystem& sys,
                               const Factorization& fact,
                               const CorrectorSet& correctors,
                               const RunOptions& opt = {});

}  // namespace epcell
