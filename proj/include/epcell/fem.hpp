#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include "epcell/mesh.hpp"

namespace epcell {

struct FemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Discrete three-field transmission operator for (u^c, u^e, I_m) on the
/// unit cell, with periodic identification of the exterior boundary DOFs
/// and one appended mean-zero constraint.
///
/// Block layout of the solution vector x (size n):
///   [0, n_c)              u^c nodal values (intra vertices, interface incl.)
///   [n_c, n_c+n_e)        u^e nodal values (extra vertices, periodic-merged)
///   [n_c+n_e, ..+n_g)     I_m nodal values on interface slots
///   last                  mean-zero multiplier
class TransmissionSystem {
  public:
    TransmissionSystem(const UnitCellMesh& mesh, double sigma_c, double sigma_e);

    const UnitCellMesh& mesh() const { return *mesh_; }
    double sigma_c() const { return sigma_c_; }
    double sigma_e() const { return sigma_e_; }

    int n() const { return n_; }
    int n_c() const { return n_c_; }
    int n_e() const { return n_e_; }
    int n_g() const { return n_g_; }

    int c_dof(int vertex) const { return c_dof_[vertex]; }
    int e_dof(int vertex) const { return e_dof_[vertex]; }
    int g_dof(int slot) const { return n_c_ + n_e_ + slot; }
    int interface_slot(int vertex) const { return slot_of_vertex_[vertex]; }

    const Eigen::SparseMatrix<double>& matrix() const { return A_; }
    /// P1 x P1 interface mass matrix on interface slots (n_g x n_g).
    const Eigen::SparseMatrix<double>& interface_mass() const { return mass_g_; }

    /// RHS with the prescribed interface jump J (values per slot).
    Eigen::VectorXd rhs_jump(const Eigen::VectorXd& jump) const;
    /// RHS -int sigma e_j . grad v over both regions (corrector load).
    Eigen::VectorXd rhs_corrector(int direction) const;
    /// RHS int f v over both regions (3-point Gauss per triangle).
    Eigen::VectorXd rhs_volume_load(
        const std::function<double(const Vec2&)>& f) const;

    /// int_{Yc u Ye} sigma d_i u dy as a linear functional row on x.
    const Eigen::RowVectorXd& flux_functional(int i) const {
        return flux_row_[i];
    }

    /// Dump of the operator in "i j value" coordinate text format.
    void dump_operator(const std::string& path) const;

  private:
    friend class Factorization;
    const UnitCellMesh* mesh_;
    double sigma_c_, sigma_e_;
    int n_c_ = 0, n_e_ = 0, n_g_ = 0, n_ = 0;
    std::vector<int> c_dof_, e_dof_, slot_of_vertex_;
    Eigen::SparseMatrix<double> A_;
    Eigen::SparseMatrix<double> mass_g_;
    Eigen::RowVectorXd flux_row_[2];
};

/// One solution of the transmission system.
struct CellField {
    Eigen::VectorXd x;  // full solution vector, mean multiplier included

    Eigen::VectorXd values_c(const TransmissionSystem& s) const {
        return x.head(s.n_c());
    }
    Eigen::VectorXd values_e(const TransmissionSystem& s) const {
        return x.segment(s.n_c(), s.n_e());
    }
    Eigen::VectorXd flux(const TransmissionSystem& s) const {
        return x.segment(s.n_c() + s.n_e(), s.n_g());
    }
    /// Jump trace u^c - u^e at interface slots.
    Eigen::VectorXd jump(const TransmissionSystem& s) const;
};

/// Reusable sparse LU factorization. The factors are immutable after
/// construction; concurrent solves are supported (read-only factors,
/// per-solve workspace).
class Factorization {
  public:
    explicit Factorization(const TransmissionSystem& sys);

    const TransmissionSystem& system() const { return *sys_; }

    CellField solve(const Eigen::VectorXd& rhs) const;
    Eigen::MatrixXd solve_dense(const Eigen::MatrixXd& rhs) const;

    /// Zero volumetric load, prescribed interface jump.
    CellField solve_with_jump(const Eigen::VectorXd& jump) const;
    /// Zero jump, load -int sigma e_j . grad v (corrector problem).
    CellField solve_corrector_rhs(int direction) const;

    /// Batched jump solves: column m of `jumps` is one interface jump.
    /// Returns flux rows (n_g x k) and the two volume flux integrals
    /// (2 x k). Columns are distributed over `threads` workers; results
    /// are schedule-independent.
    struct BatchResult {
        Eigen::MatrixXd flux;
        Eigen::MatrixXd b;  // row i: int sigma d_i u
    };
    BatchResult solve_jumps(const Eigen::MatrixXd& jumps, int threads = 1) const;

  private:
    const TransmissionSystem* sys_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

/// int_{Yc u Ye} sigma d_i(field) dy.
double volume_flux_integral(const TransmissionSystem& s, const CellField& f,
                            int i);

/// Dirichlet energy int sigma |grad u|^2 over both regions.
double energy(const TransmissionSystem& s, const CellField& f);

/// L2 error of the field against an exact function (same expression used
/// on both regions), 3-point Gauss per triangle.
double l2_error(const TransmissionSystem& s, const CellField& f,
                const std::function<double(const Vec2&)>& exact);

}  // namespace epcell
