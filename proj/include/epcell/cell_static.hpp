#pragma once

#include <Eigen/Dense>

#include "epcell/fem.hpp"
#include "epcell/mesh.hpp"

namespace epcell {

/// Static correctors and the instantaneous / insulating effective tensors.
struct CorrectorSet {
    CellField M1, M2;
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d A_insulating = Eigen::Matrix2d::Zero();
};

/// Solves both corrector problems (zero jump, e_j load, mean-zero).
CorrectorSet compute_correctors(const Factorization& fact);

/// A_ij = int sigma (d_i M_j + delta_ij) dy.
Eigen::Matrix2d effective_A(const CorrectorSet& c, const TransmissionSystem& s);

/// Effective tensor of the same cell with sigma_c = 0: single-region
/// exterior problem with homogeneous Neumann on Gamma.
Eigen::Matrix2d insulating_A(const UnitCellMesh& m, double sigma_e);

/// Rayleigh lattice-sum effective conductivity of a square array of
/// circular cylinders, normalized by the matrix conductivity.
/// `contrast` is sigma_inclusion / sigma_matrix; `order` is the number of
/// retained odd multipoles (default 3: orders 1, 3, 5).
/// If `accuracy_warning` is non-null it is set when f approaches the
/// touching limit and the truncation may be insufficient.
double perrins_oracle(double volume_fraction, double contrast, int order = 3,
                      bool* accuracy_warning = nullptr);

/// Lattice sum S_k = sum over Z^2 \ {0} of Re z^-k (S_2 = pi by convention).
double lattice_sum(int k);

}  // namespace epcell
