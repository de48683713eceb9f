#include "epcell/evolution.hpp"

#include <cmath>
#include <map>
#include <sstream>

namespace epcell {

Eigen::VectorXd chi_initial(const CorrectorSet& c, const TransmissionSystem& s,
                            const ModelParams& p, int direction) {
    const auto& mesh = s.mesh();
    const int ng = s.n_g();
    const CellField& m = direction == 0 ? c.M1 : c.M2;

    if (p.flux_mode == FluxExtraction::Multiplier)
        return -m.flux(s) / p.c_m;

    // Edge-average extraction: per interface edge take the constant
    // intra-side gradient of M_j + y_j and average onto nodes with edge
    // length weights.
    std::map<std::pair<int, int>, const Tri*> intra_edge;
    for (const auto& t : mesh.triangles) {
        if (t.region != Tri::Region::Intra) continue;
        for (int k = 0; k < 3; ++k) {
            int a = t.v[k], b = t.v[(k + 1) % 3];
            intra_edge[{std::min(a, b), std::max(a, b)}] = &t;
        }
    }
    Eigen::VectorXd num = Eigen::VectorXd::Zero(ng);
    Eigen::VectorXd den = Eigen::VectorXd::Zero(ng);
    for (const auto& e : mesh.interface_edges) {
        auto it = intra_edge.find({std::min(e.a, e.b), std::max(e.a, e.b)});
        if (it == intra_edge.end())
            throw EvolutionError("interface edge without intra triangle");
        const Tri& t = *it->second;
        const Vec2& a = mesh.vertices[t.v[0]];
        const Vec2& b = mesh.vertices[t.v[1]];
        const Vec2& cc = mesh.vertices[t.v[2]];
        double area = triangle_area(a, b, cc);
        double inv = 1.0 / (2.0 * area);
        Vec2 g[3] = {{(b[1] - cc[1]) * inv, (cc[0] - b[0]) * inv},
                     {(cc[1] - a[1]) * inv, (a[0] - cc[0]) * inv},
                     {(a[1] - b[1]) * inv, (b[0] - a[0]) * inv}};
        double gx = 0, gy = 0;
        for (int k = 0; k < 3; ++k) {
            double v = m.x[s.c_dof(t.v[k])];
            gx += v * g[k][0];
            gy += v * g[k][1];
        }
        if (direction == 0) gx += 1.0;
        else gy += 1.0;
        double val = -(s.sigma_c() / p.c_m) *
                     (gx * e.normal[0] + gy * e.normal[1]);
        for (int v : {e.a, e.b}) {
            int slot = s.interface_slot(v);
            num[slot] += e.length * val;
            den[slot] += e.length;
        }
    }
    return num.cwiseQuotient(den);
}

void step_chi(Eigen::Ref<Eigen::MatrixXd> row, const Eigen::MatrixXd& flux,
              const Eigen::VectorXd& x0, double dt, const ModelParams& p,
              int cols) {
    const double a = dt / p.c_m;
    Eigen::VectorXd denom(x0.size());
    for (int s = 0; s < x0.size(); ++s)
        denom[s] = 1.0 + a * membrane_conductivity(x0[s], p);
    for (int m = 0; m < cols; ++m)
        row.col(m) = (row.col(m) - a * flux.col(m)).cwiseQuotient(denom);
}

Eigen::VectorXd step_X(const Eigen::VectorXd& x0, const Eigen::VectorXd& u0,
                       double dt, const ModelParams& p) {
    Eigen::VectorXd out(x0.size());
    for (int s = 0; s < x0.size(); ++s) {
        const double b = beta(u0[s], p);
        const double rate = b >= x0[s] ? 1.0 / p.tau_ep : 1.0 / p.tau_res;
        double x = (x0[s] + dt * rate * b) / (1.0 + dt * rate);
        if (x < -1e-14 || x > 1.0 + 1e-14) {
            std::ostringstream os;
            os << "step_X: poration degree " << x << " outside [0,1] at node "
               << s;
            throw EvolutionError(os.str());
        }
        out[s] = std::clamp(x, 0.0, 1.0);
    }
    return out;
}

Eigen::VectorXd tau_weights(int k, double dt, TauQuadrature rule) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(k + 1);
    if (k == 0) return w;  // empty integral
    if (rule == TauQuadrature::Trapezoid) {
        w.setConstant(dt);
        w[0] = w[k] = 0.5 * dt;
    } else {
        w.head(k).setConstant(dt);  // left rectangles
    }
    return w;
}

Eigen::VectorXd memory_u0(const Eigen::MatrixXd& chi_row, int k, double g,
                          double L, double dt, TauQuadrature rule,
                          const Eigen::VectorXd* z_jump) {
    Eigen::VectorXd w = tau_weights(k, dt, rule);
    Eigen::VectorXd u0 = (g / L) * (chi_row.leftCols(k + 1) * w);
    if (z_jump) u0 += *z_jump;
    return u0;
}

Eigen::Matrix2d sigma_eff_at(const Eigen::Matrix2d& a,
                             const Eigen::MatrixXd& b_row, int k, double dt,
                             TauQuadrature rule) {
    if (k == 0) return a;  // sigma_eff(0) = A exactly
    Eigen::VectorXd w = tau_weights(k, dt, rule);
    Eigen::Matrix2d s = a;
    Eigen::VectorXd integral = b_row.leftCols(k + 1) * w;
    for (int i = 0; i < std::min<int>(4, integral.size()); ++i)
        s(i % 2, i / 2) += integral[i];
    return s;
}

double avg_membrane_conductivity(const Eigen::VectorXd& x0,
                                 const std::vector<double>& weights,
                                 const ModelParams& p) {
    double num = 0.0, den = 0.0;
    for (int s = 0; s < x0.size(); ++s) {
        num += weights[s] * membrane_conductivity(x0[s], p);
        den += weights[s];
    }
    return num / den;
}

ZEvolution z_evolution(const Eigen::VectorXd& v_in,
                       const Eigen::MatrixXd& x0_path, const Factorization& f,
                       double dt, int n_steps, const ModelParams& p) {
    const auto& s = f.system();
    ZEvolution out;
    out.z_jump.resize(s.n_g(), n_steps + 1);
    out.z_jump.col(0) = v_in;
    out.c.resize(n_steps + 1);
    Eigen::MatrixXd jump = v_in;
    auto batch = f.solve_jumps(jump, 1);
    out.c[0] = batch.b.col(0);
    for (int k = 1; k <= n_steps; ++k) {
        step_chi(jump, batch.flux, x0_path.col(k - 1), dt, p, 1);
        out.z_jump.col(k) = jump.col(0);
        batch = f.solve_jumps(jump, 1);
        out.c[k] = batch.b.col(0);
    }
    return out;
}

EvolutionResult run_two_plates(const ModelParams& p, const RunOptions& opt) {
    p.validate();
    UnitCellMesh mesh = build_unit_cell(p.mesh_h, p.radius);
    TransmissionSystem sys(mesh, p.sigma_c, p.sigma_e);
    Factorization fact(sys);
    CorrectorSet corr = compute_correctors(fact);
    corr.A = effective_A(corr, sys);
    corr.A_insulating = insulating_A(mesh, p.sigma_e);
    return run_two_plates(p, mesh, sys, fact, corr, opt);
}

EvolutionResult run_two_plates(const ModelParams& p, const UnitCellMesh& mesh,
                               const TransmissionSystem& sys,
                               const Factorization& fact,
                               const CorrectorSet& corr,
                               const RunOptions& opt) {
    const int ng = sys.n_g();
    const int n_steps = std::max(1, (int)std::lround(p.t_end / p.dt));
    const int n_kernels = p.full_tensor ? 2 : 1;

    // V^in on interface slots.
    Eigen::VectorXd v_in(ng);
    for (int s = 0; s < ng; ++s)
        v_in[s] = p.v_init.eval(mesh.interface_angle(s));
    const bool has_z = v_in.cwiseAbs().maxCoeff() > 0.0;

    EvolutionResult res;
    res.A = corr.A;
    res.A_insulating = corr.A_insulating;
    res.u0_history.resize(ng, n_steps + 1);
    res.x0_history.resize(ng, n_steps + 1);
    res.interface_angles.resize(ng);
    for (int s = 0; s < ng; ++s) res.interface_angles[s] = mesh.interface_angle(s);
    const std::vector<double> w_gamma = mesh.interface_weights();
    res.interface_mass = w_gamma;

    // The cell solve is linear in the prescribed jump, so the interface
    // response is a fixed map jump -> (I_m, B). Materialize it once with
    // ng solves on the shared factorization; every later time level is
    // then a dense product instead of k+1 sparse solves.
    Eigen::MatrixXd resp_flux(ng, ng);
    Eigen::Matrix<double, 2, Eigen::Dynamic> resp_b(2, ng);
    {
        auto unit = fact.solve_jumps(Eigen::MatrixXd::Identity(ng, ng),
                                     opt.threads);
        resp_flux = unit.flux;
        resp_b = unit.b;
    }

    // Kernel rows: chi jumps, last-solved fluxes and B values per tau
    // column. Only the current t-row of the (t, tau) triangle is stored.
    std::vector<Eigen::MatrixXd> chi(n_kernels), flux(n_kernels), brow(n_kernels);
    std::vector<Eigen::VectorXd> chi0(n_kernels);
    for (int j = 0; j < n_kernels; ++j) {
        chi[j].resize(ng, n_steps + 1);
        flux[j].resize(ng, n_steps + 1);
        brow[j].resize(2, n_steps + 1);
        chi0[j] = chi_initial(corr, sys, p, j);
        chi[j].col(0) = chi0[j];
        flux[j].col(0) = resp_flux * chi0[j];
        brow[j].col(0) = resp_b * chi0[j];
    }
    res.b11_diag = brow[0](0, 0);

    Eigen::MatrixXd z_jump;
    Eigen::MatrixXd z_flux;
    if (has_z) {
        z_jump = v_in;
        z_flux = resp_flux * z_jump;
        res.c_vec.push_back(resp_b * z_jump);
    } else {
        res.c_vec.push_back(Eigen::Vector2d::Zero());
    }

    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(ng, p.x_init);
    Eigen::VectorXd u0 = v_in;  // t = 0: empty tau integral + V^in

    auto record = [&](int k) {
        double t = k * p.dt;
        res.t.push_back(t);
        res.u0_history.col(k) = u0;
        res.x0_history.col(k) = x0;
        res.pole_u0.push_back(u0[0]);  // slot 0 sits at theta = 0
        res.sm_avg.push_back(avg_membrane_conductivity(x0, w_gamma, p));
        Eigen::MatrixXd b_for_sigma(2 * n_kernels, n_steps + 1);
        // Row layout for sigma_eff_at: (B11, B21, B12, B22).
        b_for_sigma.topRows(2) = brow[0];
        if (n_kernels == 2) b_for_sigma.bottomRows(2) = brow[1];
        res.sigma_eff.push_back(
            sigma_eff_at(res.A, b_for_sigma, k, p.dt, p.quadrature));
        res.b_integral11.push_back(res.sigma_eff.back()(0, 0) - res.A(0, 0));
        res.b11_tau0.push_back(brow[0](0, 0));
        if (opt.record_kernel) {
            std::vector<double> r11(k + 1), r21(k + 1);
            for (int m = 0; m <= k; ++m) {
                r11[m] = brow[0](0, m);
                r21[m] = brow[0](1, m);
            }
            res.b11_triangle.push_back(std::move(r11));
            res.b21_triangle.push_back(std::move(r21));
            if (n_kernels == 2) {
                std::vector<double> r12(k + 1);
                for (int m = 0; m <= k; ++m) r12[m] = brow[1](0, m);
                res.b12_triangle.push_back(std::move(r12));
            }
        }
        if (!res.sigma_eff.back().allFinite() || !u0.allFinite())
            throw EvolutionError("non-finite value at step " +
                                 std::to_string(k));
    };
    record(0);

    for (int k = 1; k <= n_steps; ++k) {
        // Advance every active tau column and z with X_0(t_{k-1}).
        for (int j = 0; j < n_kernels; ++j)
            step_chi(chi[j].leftCols(k), flux[j].leftCols(k), x0, p.dt, p, k);
        if (has_z) step_chi(z_jump, z_flux, x0, p.dt, p, 1);

        // Diagonal: time-invariant initial data.
        for (int j = 0; j < n_kernels; ++j) chi[j].col(k) = chi0[j];

        // Poration update with [u_0](t_{k-1}).
        x0 = step_X(x0, u0, p.dt, p);

        // One interface-response product per kernel at the new time level.
        for (int j = 0; j < n_kernels; ++j) {
            flux[j].leftCols(k + 1).noalias() = resp_flux * chi[j].leftCols(k + 1);
            brow[j].leftCols(k + 1).noalias() = resp_b * chi[j].leftCols(k + 1);
        }
        if (has_z) {
            z_flux.noalias() = resp_flux * z_jump;
            res.c_vec.push_back(resp_b * z_jump);
        } else {
            res.c_vec.push_back(Eigen::Vector2d::Zero());
        }

        Eigen::VectorXd zj;
        if (has_z) zj = z_jump.col(0);
        u0 = memory_u0(chi[0], k, p.g, p.L, p.dt, p.quadrature,
                       has_z ? &zj : nullptr);
        record(k);
    }
    return res;
}

}  // namespace epcell
