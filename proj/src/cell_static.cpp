#include "epcell/cell_static.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace epcell {

namespace {
constexpr double kPi = std::numbers::pi;
}

CorrectorSet compute_correctors(const Factorization& fact) {
    CorrectorSet c;
    c.M1 = fact.solve_corrector_rhs(0);
    c.M2 = fact.solve_corrector_rhs(1);
    const TransmissionSystem& s = fact.system();
    c.A = effective_A(c, s);
    c.A_insulating = insulating_A(s.mesh(), s.sigma_e());
    return c;
}

Eigen::Matrix2d effective_A(const CorrectorSet& c, const TransmissionSystem& s) {
    double area_c = 0.0, area_e = 0.0;
    for (const auto& t : s.mesh().triangles) {
        double a = triangle_area(s.mesh().vertices[t.v[0]],
                                 s.mesh().vertices[t.v[1]],
                                 s.mesh().vertices[t.v[2]]);
        (t.region == Tri::Region::Intra ? area_c : area_e) += a;
    }
    const double sig_area = s.sigma_c() * area_c + s.sigma_e() * area_e;
    Eigen::Matrix2d a;
    const CellField* m[2] = {&c.M1, &c.M2};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            a(i, j) = volume_flux_integral(s, *m[j], i) +
                      (i == j ? sig_area : 0.0);
    return a;
}

Eigen::Matrix2d insulating_A(const UnitCellMesh& mesh, double sigma_e) {
    // Exterior-only Neumann problem: stiffness on Y^e with periodic
    // identification plus a mean-zero border.
    const int nv = static_cast<int>(mesh.vertices.size());
    std::vector<int> parent(nv);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (const auto& p : mesh.periodic_pairs) parent[find(p[0])] = find(p[1]);

    std::vector<int> dof(nv, -1);
    int n_e = 0;
    for (const auto& t : mesh.triangles) {
        if (t.region != Tri::Region::Extra) continue;
        for (int k = 0; k < 3; ++k) {
            int r = find(t.v[k]);
            if (dof[r] < 0) dof[r] = n_e++;
        }
    }
    auto dof_of = [&](int v) { return dof[find(v)]; };

    const int n = n_e + 1;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd mean_w = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
    Eigen::MatrixXd flux_rows = Eigen::MatrixXd::Zero(2, n);
    double area_e = 0.0;

    for (const auto& t : mesh.triangles) {
        if (t.region != Tri::Region::Extra) continue;
        const Vec2& a = mesh.vertices[t.v[0]];
        const Vec2& b = mesh.vertices[t.v[1]];
        const Vec2& c = mesh.vertices[t.v[2]];
        double area = triangle_area(a, b, c);
        area_e += area;
        double inv = 1.0 / (2.0 * area);
        Vec2 g[3] = {{(b[1] - c[1]) * inv, (c[0] - b[0]) * inv},
                     {(c[1] - a[1]) * inv, (a[0] - c[0]) * inv},
                     {(a[1] - b[1]) * inv, (b[0] - a[0]) * inv}};
        int d[3] = {dof_of(t.v[0]), dof_of(t.v[1]), dof_of(t.v[2])};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j)
                trip.emplace_back(d[i], d[j],
                                  sigma_e * area *
                                      (g[i][0] * g[j][0] + g[i][1] * g[j][1]));
            mean_w[d[i]] += area / 3.0;
            for (int dir = 0; dir < 2; ++dir) {
                rhs(d[i], dir) -= sigma_e * area * g[i][dir];
                flux_rows(dir, d[i]) += sigma_e * area * g[i][dir];
            }
        }
    }
    for (int d = 0; d < n_e; ++d) {
        trip.emplace_back(n - 1, d, mean_w[d]);
        trip.emplace_back(d, n - 1, mean_w[d]);
    }
    Eigen::SparseMatrix<double> mat(n, n);
    mat.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(mat);
    if (lu.info() != Eigen::Success)
        throw FemError("insulating_A: factorization failed");
    Eigen::MatrixXd sol = lu.solve(rhs);

    Eigen::Matrix2d a_ins;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            a_ins(i, j) = flux_rows.row(i) * sol.col(j) +
                          (i == j ? sigma_e * area_e : 0.0);
    return a_ins;
}

double lattice_sum(int k) {
    if (k == 2) return kPi;  // conditionally convergent value
    if (k < 2 || k % 2 != 0) throw std::invalid_argument("lattice_sum: bad k");
    if (k % 4 != 0) return 0.0;  // square-lattice symmetry
    static std::map<int, double> cache;
    auto it = cache.find(k);
    if (it != cache.end()) return it->second;
    const int R = 600;
    double s = 0.0;
    for (int p = -R; p <= R; ++p)
        for (int q = -R; q <= R; ++q) {
            if (p == 0 && q == 0) continue;
            std::complex<double> z(p, q);
            s += std::real(std::pow(z, -k));
        }
    cache[k] = s;
    return s;
}

double perrins_oracle(double volume_fraction, double contrast, int order,
                      bool* accuracy_warning) {
    const double f = volume_fraction;
    if (!(f > 0.0 && f < kPi / 4.0))
        throw std::domain_error("perrins_oracle: volume fraction outside (0, pi/4)");
    if (contrast < 0.0)
        throw std::domain_error("perrins_oracle: negative contrast");
    if (order < 1) throw std::invalid_argument("perrins_oracle: order < 1");
    if (accuracy_warning) *accuracy_warning = f > 0.6;

    const double beta = (contrast - 1.0) / (contrast + 1.0);
    if (std::abs(beta) < 1e-14) return 1.0;
    const double a2 = f / kPi;  // radius^2 in the unit cell

    auto binom = [](int nn, int kk) {
        double r = 1.0;
        for (int i = 1; i <= kk; ++i) r *= double(nn - kk + i) / i;
        return r;
    };

    // Multipole balance: D_l / (beta a^(2l)) - sum_m C(l+m-1, l) S_{l+m} D_m
    //                    = -delta_{l,1}, over odd l, m.
    const int n = order;
    Eigen::MatrixXd mat(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs[0] = -1.0;
    for (int i = 0; i < n; ++i) {
        const int l = 2 * i + 1;
        for (int j = 0; j < n; ++j) {
            const int m = 2 * j + 1;
            double v = -binom(l + m - 1, l) * lattice_sum(l + m);
            if (i == j) v += 1.0 / (beta * std::pow(a2, l));
            mat(i, j) = v;
        }
    }
    Eigen::VectorXd d = mat.fullPivLu().solve(rhs);
    return 1.0 - 2.0 * kPi * d[0];
}

}  // namespace epcell
