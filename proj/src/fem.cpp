#include "epcell/fem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

namespace epcell {

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

/// P1 gradient coefficients: grad phi_k = g[k], triangle area returned.
double tri_gradients(const Vec2& a, const Vec2& b, const Vec2& c,
                     Vec2 g[3]) {
    double area = triangle_area(a, b, c);
    double inv = 1.0 / (2.0 * area);
    g[0] = {(b[1] - c[1]) * inv, (c[0] - b[0]) * inv};
    g[1] = {(c[1] - a[1]) * inv, (a[0] - c[0]) * inv};
    g[2] = {(a[1] - b[1]) * inv, (b[0] - a[0]) * inv};
    return area;
}

}  // namespace

TransmissionSystem::TransmissionSystem(const UnitCellMesh& mesh, double sigma_c,
                                       double sigma_e)
    : mesh_(&mesh), sigma_c_(sigma_c), sigma_e_(sigma_e) {
    if (!(sigma_c > 0) || !(sigma_e > 0))
        throw FemError("conductivities must be positive");
    const int nv = static_cast<int>(mesh.vertices.size());

    // Periodic identification of vertices (outer boundary only).
    UnionFind uf(nv);
    for (const auto& p : mesh.periodic_pairs) uf.unite(p[0], p[1]);

    std::vector<bool> in_c(nv, false), in_e(nv, false);
    for (const auto& t : mesh.triangles) {
        auto& flag = t.region == Tri::Region::Intra ? in_c : in_e;
        for (int k = 0; k < 3; ++k) flag[t.v[k]] = true;
    }

    c_dof_.assign(nv, -1);
    for (int v = 0; v < nv; ++v)
        if (in_c[v]) c_dof_[v] = n_c_++;

    e_dof_.assign(nv, -1);
    std::vector<int> rep_dof(nv, -1);
    for (int v = 0; v < nv; ++v) {
        if (!in_e[v]) continue;
        int r = uf.find(v);
        if (rep_dof[r] < 0) rep_dof[r] = n_e_++;
        e_dof_[v] = rep_dof[r];
    }

    slot_of_vertex_.assign(nv, -1);
    n_g_ = static_cast<int>(mesh.interface_nodes.size());
    for (int s = 0; s < n_g_; ++s) slot_of_vertex_[mesh.interface_nodes[s]] = s;

    n_ = n_c_ + n_e_ + n_g_ + 1;
    const int mean_row = n_ - 1;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.triangles.size() * 9 + mesh.interface_edges.size() * 16 +
                 2 * (n_c_ + n_e_));
    Eigen::VectorXd mean_w = Eigen::VectorXd::Zero(n_);
    Eigen::RowVectorXd fr0 = Eigen::RowVectorXd::Zero(n_);
    Eigen::RowVectorXd fr1 = Eigen::RowVectorXd::Zero(n_);

    for (const auto& t : mesh.triangles) {
        const bool intra = t.region == Tri::Region::Intra;
        const double sig = intra ? sigma_c_ : sigma_e_;
        Vec2 g[3];
        double area = tri_gradients(mesh.vertices[t.v[0]], mesh.vertices[t.v[1]],
                                    mesh.vertices[t.v[2]], g);
        int dof[3];
        for (int k = 0; k < 3; ++k)
            dof[k] = intra ? c_dof_[t.v[k]] : n_c_ + e_dof_[t.v[k]];
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                double kij =
                    sig * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                trip.emplace_back(dof[i], dof[j], kij);
            }
            mean_w[dof[i]] += area / 3.0;
            fr0[dof[i]] += sig * area * g[i][0];
            fr1[dof[i]] += sig * area * g[i][1];
        }
    }

    std::vector<Eigen::Triplet<double>> mass_trip;
    for (const auto& e : mesh.interface_edges) {
        const int sa = slot_of_vertex_[e.a], sb = slot_of_vertex_[e.b];
        const double m11 = e.length / 3.0, m12 = e.length / 6.0;
        const int cv[2] = {c_dof_[e.a], c_dof_[e.b]};
        const int ev[2] = {n_c_ + e_dof_[e.a], n_c_ + e_dof_[e.b]};
        const int gv[2] = {g_dof(sa), g_dof(sb)};
        const double m[2][2] = {{m11, m12}, {m12, m11}};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                trip.emplace_back(cv[i], gv[j], -m[i][j]);  // -int I_m v^c
                trip.emplace_back(ev[i], gv[j], +m[i][j]);  // +int I_m v^e
                trip.emplace_back(gv[i], cv[j], +m[i][j]);  // jump rows
                trip.emplace_back(gv[i], ev[j], -m[i][j]);
                mass_trip.emplace_back(i == 0 ? sa : sb, j == 0 ? sa : sb,
                                       m[i][j]);
            }
    }

    for (int d = 0; d < n_c_ + n_e_; ++d) {
        if (mean_w[d] == 0.0) continue;
        trip.emplace_back(mean_row, d, mean_w[d]);
        trip.emplace_back(d, mean_row, mean_w[d]);
    }

    A_.resize(n_, n_);
    A_.setFromTriplets(trip.begin(), trip.end());
    A_.makeCompressed();

    mass_g_.resize(n_g_, n_g_);
    mass_g_.setFromTriplets(mass_trip.begin(), mass_trip.end());
    mass_g_.makeCompressed();

    flux_row_[0] = fr0;
    flux_row_[1] = fr1;
}

Eigen::VectorXd TransmissionSystem::rhs_jump(const Eigen::VectorXd& jump) const {
    if (jump.size() != n_g_) throw FemError("rhs_jump: size mismatch");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_);
    rhs.segment(n_c_ + n_e_, n_g_) = mass_g_ * jump;
    return rhs;
}

Eigen::VectorXd TransmissionSystem::rhs_corrector(int direction) const {
    if (direction != 0 && direction != 1)
        throw FemError("rhs_corrector: direction must be 0 or 1");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_);
    for (const auto& t : mesh_->triangles) {
        const bool intra = t.region == Tri::Region::Intra;
        const double sig = intra ? sigma_c_ : sigma_e_;
        Vec2 g[3];
        double area =
            tri_gradients(mesh_->vertices[t.v[0]], mesh_->vertices[t.v[1]],
                          mesh_->vertices[t.v[2]], g);
        for (int k = 0; k < 3; ++k) {
            int dof = intra ? c_dof_[t.v[k]] : n_c_ + e_dof_[t.v[k]];
            rhs[dof] -= sig * area * g[k][direction];
        }
    }
    return rhs;
}

Eigen::VectorXd TransmissionSystem::rhs_volume_load(
    const std::function<double(const Vec2&)>& f) const {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_);
    // Edge-midpoint rule, exact for quadratics.
    static const double qp[3][3] = {
        {0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
    for (const auto& t : mesh_->triangles) {
        const bool intra = t.region == Tri::Region::Intra;
        const Vec2& a = mesh_->vertices[t.v[0]];
        const Vec2& b = mesh_->vertices[t.v[1]];
        const Vec2& c = mesh_->vertices[t.v[2]];
        double area = triangle_area(a, b, c);
        for (int q = 0; q < 3; ++q) {
            Vec2 p = {qp[q][0] * a[0] + qp[q][1] * b[0] + qp[q][2] * c[0],
                      qp[q][0] * a[1] + qp[q][1] * b[1] + qp[q][2] * c[1]};
            double fv = f(p) * area / 3.0;
            for (int k = 0; k < 3; ++k) {
                int dof = intra ? c_dof_[t.v[k]] : n_c_ + e_dof_[t.v[k]];
                rhs[dof] += fv * qp[q][k];
            }
        }
    }
    return rhs;
}

void TransmissionSystem::dump_operator(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw FemError("cannot open " + path);
    out.precision(17);
    for (int k = 0; k < A_.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A_, k); it; ++it)
            out << it.row() << " " << it.col() << " " << it.value() << "\n";
}

Eigen::VectorXd CellField::jump(const TransmissionSystem& s) const {
    Eigen::VectorXd j(s.n_g());
    const auto& nodes = s.mesh().interface_nodes;
    for (int slot = 0; slot < s.n_g(); ++slot) {
        int v = nodes[slot];
        j[slot] = x[s.c_dof(v)] - x[s.n_c() + s.e_dof(v)];
    }
    return j;
}

Factorization::Factorization(const TransmissionSystem& sys) : sys_(&sys) {
    lu_.compute(sys.matrix());
    if (lu_.info() != Eigen::Success)
        throw FemError("sparse LU factorization failed (singular operator?)");
}

CellField Factorization::solve(const Eigen::VectorXd& rhs) const {
    CellField f;
    f.x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success) throw FemError("sparse LU solve failed");
    return f;
}

Eigen::MatrixXd Factorization::solve_dense(const Eigen::MatrixXd& rhs) const {
    return lu_.solve(rhs);
}

CellField Factorization::solve_with_jump(const Eigen::VectorXd& jump) const {
    return solve(sys_->rhs_jump(jump));
}

CellField Factorization::solve_corrector_rhs(int direction) const {
    return solve(sys_->rhs_corrector(direction));
}

Factorization::BatchResult Factorization::solve_jumps(
    const Eigen::MatrixXd& jumps, int threads) const {
    const int k = static_cast<int>(jumps.cols());
    const int ng = sys_->n_g();
    BatchResult res;
    res.flux.resize(ng, k);
    res.b.resize(2, k);
    if (k == 0) return res;

    auto work = [&](int c0, int c1) {
        for (int c = c0; c < c1; ++c) {
            Eigen::VectorXd x = lu_.solve(sys_->rhs_jump(jumps.col(c)));
            res.flux.col(c) = x.segment(sys_->n_c() + sys_->n_e(), ng);
            res.b(0, c) = sys_->flux_functional(0) * x;
            res.b(1, c) = sys_->flux_functional(1) * x;
        }
    };

    threads = std::max(1, std::min(threads, k));
    if (threads == 1) {
        work(0, k);
    } else {
        std::vector<std::thread> pool;
        int per = (k + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            int c0 = t * per, c1 = std::min(k, c0 + per);
            if (c0 >= c1) break;
            pool.emplace_back(work, c0, c1);
        }
        for (auto& th : pool) th.join();
    }
    return res;
}

double volume_flux_integral(const TransmissionSystem& s, const CellField& f,
                            int i) {
    return s.flux_functional(i) * f.x;
}

double energy(const TransmissionSystem& s, const CellField& f) {
    double acc = 0.0;
    const auto& mesh = s.mesh();
    for (const auto& t : mesh.triangles) {
        const bool intra = t.region == Tri::Region::Intra;
        const double sig = intra ? s.sigma_c() : s.sigma_e();
        Vec2 g[3];
        double area = tri_gradients(mesh.vertices[t.v[0]], mesh.vertices[t.v[1]],
                                    mesh.vertices[t.v[2]], g);
        double gx = 0, gy = 0;
        for (int kk = 0; kk < 3; ++kk) {
            int dof = intra ? s.c_dof(t.v[kk]) : s.n_c() + s.e_dof(t.v[kk]);
            gx += f.x[dof] * g[kk][0];
            gy += f.x[dof] * g[kk][1];
        }
        acc += sig * area * (gx * gx + gy * gy);
    }
    return acc;
}

double l2_error(const TransmissionSystem& s, const CellField& f,
                const std::function<double(const Vec2&)>& exact) {
    static const double qp[3][3] = {
        {0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
    double acc = 0.0;
    const auto& mesh = s.mesh();
    for (const auto& t : mesh.triangles) {
        const bool intra = t.region == Tri::Region::Intra;
        const Vec2& a = mesh.vertices[t.v[0]];
        const Vec2& b = mesh.vertices[t.v[1]];
        const Vec2& c = mesh.vertices[t.v[2]];
        double area = triangle_area(a, b, c);
        double uh[3];
        for (int k = 0; k < 3; ++k) {
            int dof = intra ? s.c_dof(t.v[k]) : s.n_c() + s.e_dof(t.v[k]);
            uh[k] = f.x[dof];
        }
        for (int q = 0; q < 3; ++q) {
            Vec2 p = {qp[q][0] * a[0] + qp[q][1] * b[0] + qp[q][2] * c[0],
                      qp[q][0] * a[1] + qp[q][1] * b[1] + qp[q][2] * c[1]};
            double val = qp[q][0] * uh[0] + qp[q][1] * uh[1] + qp[q][2] * uh[2];
            double d = val - exact(p);
            acc += d * d * area / 3.0;
        }
    }
    return std::sqrt(acc);
}

}  // namespace epcell
