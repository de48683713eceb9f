#include "epcell/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace epcell {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Vec2 kCenter = {0.5, 0.5};

double dist(const Vec2& a, const Vec2& b) {
    return std::hypot(a[0] - b[0], a[1] - b[1]);
}

/// Interface node counts that admit a clean coarsening chain inside the
/// disc (halving stays a multiple of 4, fan size stays <= 20) and carry
/// corner-aligned nodes (multiples of 8).
int pick_interface_count(double target) {
    int best = 16;
    double best_err = 1e30;
    for (int base : {16, 24, 32, 40}) {
        for (int m = base; m <= 1 << 16; m *= 2) {
            if (m % 8 != 0) continue;
            double err = std::abs(m - target);
            if (err < best_err) {
                best_err = err;
                best = m;
            }
        }
    }
    return best;
}

/// Point on the axis-aligned square contour of half-width s centred at
/// (0.5, 0.5), parametrized by the interface index i (corners at
/// i = M/8 + k M/4), uniform per edge.
Vec2 square_point(int i, int m, double s) {
    int q4 = m / 4, q8 = m / 8;
    int k = ((i + q8) % m + m) % m;
    int edge = k / q4;
    double t = -1.0 + 2.0 * (k - edge * q4) / q4;
    switch (edge) {
        case 0: return {kCenter[0] + s, kCenter[1] + s * t};
        case 1: return {kCenter[0] - s * t, kCenter[1] + s};
        case 2: return {kCenter[0] - s, kCenter[1] - s * t};
        default: return {kCenter[0] + s * t, kCenter[1] - s};
    }
}

struct Builder {
    std::vector<Vec2> vertices;
    std::vector<Tri> triangles;

    int add_vertex(const Vec2& v) {
        vertices.push_back(v);
        return static_cast<int>(vertices.size()) - 1;
    }

    void add_tri(int a, int b, int c, Tri::Region reg) {
        if (triangle_area(vertices[a], vertices[b], vertices[c]) < 0)
            std::swap(b, c);
        triangles.push_back({{a, b, c}, reg});
    }

    /// Quad strip between two rings of equal count; alternating diagonals
    /// keep the connectivity mirror-symmetric (count must be a multiple
    /// of 4).
    void add_strip(const std::vector<int>& outer, const std::vector<int>& inner,
                   Tri::Region reg) {
        int c = static_cast<int>(outer.size());
        for (int i = 0; i < c; ++i) {
            int j = (i + 1) % c;
            if (i % 2 == 0) {
                add_tri(outer[i], outer[j], inner[i], reg);
                add_tri(outer[j], inner[j], inner[i], reg);
            } else {
                add_tri(outer[i], outer[j], inner[j], reg);
                add_tri(outer[i], inner[j], inner[i], reg);
            }
        }
    }

    /// 2:1 transition between a fine ring (2K nodes) and a coarse ring
    /// (K nodes aligned with the fine even indices).
    void add_transition(const std::vector<int>& fine,
                        const std::vector<int>& coarse, Tri::Region reg) {
        int k = static_cast<int>(coarse.size());
        for (int j = 0; j < k; ++j) {
            int j1 = (j + 1) % k;
            int a0 = fine[2 * j], a1 = fine[(2 * j + 1) % (2 * k)],
                a2 = fine[(2 * j + 2) % (2 * k)];
            add_tri(coarse[j], a0, a1, reg);
            add_tri(coarse[j], a1, coarse[j1], reg);
            add_tri(coarse[j1], a1, a2, reg);
        }
    }

    void add_fan(const std::vector<int>& ring, int center, Tri::Region reg) {
        int c = static_cast<int>(ring.size());
        for (int i = 0; i < c; ++i)
            add_tri(center, ring[i], ring[(i + 1) % c], reg);
    }
};

double min_angle_deg(const std::vector<Vec2>& vs, const Tri& t) {
    double worst = 180.0;
    for (int k = 0; k < 3; ++k) {
        const Vec2& a = vs[t.v[k]];
        const Vec2& b = vs[t.v[(k + 1) % 3]];
        const Vec2& c = vs[t.v[(k + 2) % 3]];
        double ux = b[0] - a[0], uy = b[1] - a[1];
        double vx = c[0] - a[0], vy = c[1] - a[1];
        double ang = std::atan2(std::abs(ux * vy - uy * vx),
                                ux * vx + uy * vy) *
                     180.0 / kPi;
        worst = std::min(worst, ang);
    }
    return worst;
}

UnitCellMesh build_once(double h, double r, double s) {
    Builder bld;
    // The contour node count is shared by every ring out to the boundary,
    // so it must resolve the outer square (perimeter 4) as well as the
    // circle (perimeter 2 pi r).
    const int m = pick_interface_count(std::max(2.0 * kPi * r / h, 4.0 / h));

    // Interface nodes, exactly on the circle, theta_i = 2 pi i / m.
    std::vector<int> circle(m);
    for (int i = 0; i < m; ++i) {
        double th = 2.0 * kPi * i / m;
        circle[i] = bld.add_vertex(
            {kCenter[0] + r * std::cos(th), kCenter[1] + r * std::sin(th)});
    }

    // --- Disc interior: coarsening polar rings, then a centre fan.
    {
        std::vector<int> ring = circle;
        double cr = r;
        int cc = m;
        while (true) {
            double tangential = 2.0 * kPi * cr / cc;
            double step = std::clamp(tangential, 0.6 * h, 1.2 * h);
            if (cr < 1.6 * step && cc <= 20) {
                int centre = bld.add_vertex(kCenter);
                bld.add_fan(ring, centre, Tri::Region::Intra);
                break;
            }
            double next_r = std::max(cr - step, 0.4 * step);
            int nc = cc;
            if (tangential < 0.8 * h && cc / 2 >= 8 && (cc / 2) % 4 == 0)
                nc = cc / 2;
            std::vector<int> next(nc);
            for (int i = 0; i < nc; ++i) {
                double th = 2.0 * kPi * i / nc;
                next[i] = bld.add_vertex({kCenter[0] + next_r * std::cos(th),
                                          kCenter[1] + next_r * std::sin(th)});
            }
            if (nc == cc)
                bld.add_strip(ring, next, Tri::Region::Intra);
            else
                bld.add_transition(ring, next, Tri::Region::Intra);
            ring = next;
            cr = next_r;
            cc = nc;
        }
    }

    // --- Annulus: circle -> inner square contour of half-width s.
    // Radial layer counts aim at unit aspect ratio against the local
    // tangential spacing (between 2 pi r / m on the circle and ~4 s / m
    // near the blended square's corners).
    int layers1 = std::max(2, (int)std::lround((s - r) * m / 2.2));
    std::vector<int> prev = circle;
    std::vector<int> inner_square;
    for (int j = 1; j <= layers1; ++j) {
        double f = double(j) / layers1;
        std::vector<int> layer(m);
        for (int i = 0; i < m; ++i) {
            double th = 2.0 * kPi * i / m;
            Vec2 pc = {kCenter[0] + r * std::cos(th),
                       kCenter[1] + r * std::sin(th)};
            Vec2 ps = square_point(i, m, s);
            layer[i] = bld.add_vertex(
                {(1 - f) * pc[0] + f * ps[0], (1 - f) * pc[1] + f * ps[1]});
        }
        bld.add_strip(layer, prev, Tri::Region::Extra);
        prev = layer;
        if (j == layers1) inner_square = layer;
    }

    // --- Frame: inner square contour -> outer boundary.
    int layers2 = std::max(2, (int)std::lround((0.5 - s) * m / 4.0));
    prev = inner_square;
    for (int j = 1; j <= layers2; ++j) {
        double f = double(j) / layers2;
        std::vector<int> layer(m);
        for (int i = 0; i < m; ++i) {
            Vec2 pi = square_point(i, m, s);
            Vec2 po = square_point(i, m, 0.5);
            layer[i] = bld.add_vertex(
                {(1 - f) * pi[0] + f * po[0], (1 - f) * pi[1] + f * po[1]});
        }
        bld.add_strip(layer, prev, Tri::Region::Extra);
        prev = layer;
    }

    UnitCellMesh mesh;
    mesh.vertices = std::move(bld.vertices);
    mesh.triangles = std::move(bld.triangles);
    mesh.radius = r;
    mesh.interface_nodes = circle;

    for (int i = 0; i < m; ++i) {
        InterfaceEdge e;
        e.a = circle[i];
        e.b = circle[(i + 1) % m];
        const Vec2& pa = mesh.vertices[e.a];
        const Vec2& pb = mesh.vertices[e.b];
        e.length = dist(pa, pb);
        double mx = 0.5 * (pa[0] + pb[0]) - kCenter[0];
        double my = 0.5 * (pa[1] + pb[1]) - kCenter[1];
        double n = std::hypot(mx, my);
        e.normal = {mx / n, my / n};
        mesh.interface_edges.push_back(e);
    }

    // Periodic pairs by coordinate matching on the outer boundary.
    auto collect = [&](int axis, double val) {
        std::vector<std::pair<double, int>> out;
        for (int i = 0; i < (int)mesh.vertices.size(); ++i)
            if (std::abs(mesh.vertices[i][axis] - val) < 1e-12)
                out.emplace_back(mesh.vertices[i][1 - axis], i);
        std::sort(out.begin(), out.end());
        return out;
    };
    for (int axis : {0, 1}) {
        auto lo = collect(axis, 0.0), hi = collect(axis, 1.0);
        if (lo.size() != hi.size())
            throw MeshError("periodic boundary node counts differ");
        for (size_t i = 0; i < lo.size(); ++i) {
            if (std::abs(lo[i].first - hi[i].first) > 1e-10)
                throw MeshError("periodic boundary nodes do not match");
            mesh.periodic_pairs.push_back({lo[i].second, hi[i].second});
        }
    }

    double hmax = 0.0;
    for (const auto& t : mesh.triangles)
        for (int k = 0; k < 3; ++k)
            hmax = std::max(hmax, dist(mesh.vertices[t.v[k]],
                                       mesh.vertices[t.v[(k + 1) % 3]]));
    mesh.h = hmax;
    return mesh;
}

}  // namespace

double triangle_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

double UnitCellMesh::interface_angle(int slot) const {
    const Vec2& p = vertices[interface_nodes[slot]];
    double a = std::atan2(p[1] - 0.5, p[0] - 0.5);
    return a < 0 ? a + 2 * kPi : a;
}

std::vector<double> UnitCellMesh::interface_weights() const {
    std::vector<double> w(interface_nodes.size(), 0.0);
    int m = static_cast<int>(interface_nodes.size());
    for (int i = 0; i < m; ++i) {
        w[i] += 0.5 * interface_edges[i].length;
        w[(i + 1) % m] += 0.5 * interface_edges[i].length;
    }
    return w;
}

UnitCellMesh build_unit_cell(double h, double r) {
    if (!(r > 0 && r < 0.5)) throw MeshError("radius must be in (0, 0.5)");
    if (!(h > 0 && h < r)) throw MeshError("mesh size must satisfy 0 < h < r");
    std::string diag;
    const double s_lo = std::min(r + 0.04, 0.44), s_hi = 0.465;
    for (double s0 : {0.5 * (r + 0.5), 0.5 * (r + 0.5) + 0.02,
                      0.5 * (r + 0.5) - 0.02}) {
        double s = std::clamp(s0, s_lo, s_hi);
        UnitCellMesh mesh = build_once(h, r, s);
        double worst = 180.0;
        for (const auto& t : mesh.triangles)
            worst = std::min(worst, min_angle_deg(mesh.vertices, t));
        if (worst >= 15.0) return mesh;
        std::ostringstream os;
        os << "min angle " << worst << " deg at s=" << s << "; ";
        diag += os.str();
    }
    throw MeshError("mesh quality gate failed (min angle < 15 deg): " + diag);
}

MeshDiagnostics mesh_diagnostics(const UnitCellMesh& m) {
    MeshDiagnostics d;
    d.triangle_count = static_cast<int>(m.triangles.size());
    d.node_count = static_cast<int>(m.vertices.size());
    d.interface_node_count = static_cast<int>(m.interface_nodes.size());
    d.min_angle_deg = 180.0;
    for (const auto& t : m.triangles) {
        double a = triangle_area(m.vertices[t.v[0]], m.vertices[t.v[1]],
                                 m.vertices[t.v[2]]);
        (t.region == Tri::Region::Intra ? d.intra_area : d.extra_area) += a;
        d.min_angle_deg = std::min(d.min_angle_deg, min_angle_deg(m.vertices, t));
        for (int k = 0; k < 3; ++k)
            d.max_edge_length =
                std::max(d.max_edge_length, dist(m.vertices[t.v[k]],
                                                 m.vertices[t.v[(k + 1) % 3]]));
    }
    for (const auto& pr : m.periodic_pairs) {
        const Vec2& a = m.vertices[pr[0]];
        const Vec2& b = m.vertices[pr[1]];
        double mm = std::min(std::abs(std::abs(a[0] - b[0]) - 1.0) +
                                 std::abs(a[1] - b[1]),
                             std::abs(std::abs(a[1] - b[1]) - 1.0) +
                                 std::abs(a[0] - b[0]));
        d.max_periodic_mismatch = std::max(d.max_periodic_mismatch, mm);
    }
    for (int v : m.interface_nodes) {
        double rr = std::hypot(m.vertices[v][0] - 0.5, m.vertices[v][1] - 0.5);
        d.max_interface_radial_error =
            std::max(d.max_interface_radial_error, std::abs(rr - m.radius));
    }
    return d;
}

void write_mesh(const UnitCellMesh& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot open " + path + " for writing");
    out.precision(17);
    out << "unitcell v1 " << m.h << " " << m.radius << "\n";
    out << m.vertices.size() << "\n";
    for (const auto& v : m.vertices) out << v[0] << " " << v[1] << "\n";
    out << m.triangles.size() << "\n";
    for (const auto& t : m.triangles)
        out << t.v[0] << " " << t.v[1] << " " << t.v[2] << " "
            << (t.region == Tri::Region::Intra ? 0 : 1) << "\n";
    out << m.interface_nodes.size() << "\n";
    for (int v : m.interface_nodes) out << v << "\n";
    out << m.periodic_pairs.size() << "\n";
    for (const auto& p : m.periodic_pairs) out << p[0] << " " << p[1] << "\n";
}

UnitCellMesh read_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open " + path);
    std::string tag, ver;
    UnitCellMesh m;
    in >> tag >> ver >> m.h >> m.radius;
    if (tag != "unitcell" || ver != "v1")
        throw MeshError("bad mesh header in " + path);
    size_t n;
    in >> n;
    m.vertices.resize(n);
    for (auto& v : m.vertices) in >> v[0] >> v[1];
    in >> n;
    m.triangles.resize(n);
    for (auto& t : m.triangles) {
        int reg;
        in >> t.v[0] >> t.v[1] >> t.v[2] >> reg;
        t.region = reg == 0 ? Tri::Region::Intra : Tri::Region::Extra;
    }
    in >> n;
    m.interface_nodes.resize(n);
    for (auto& v : m.interface_nodes) in >> v;
    in >> n;
    m.periodic_pairs.resize(n);
    for (auto& p : m.periodic_pairs) in >> p[0] >> p[1];
    if (!in) throw MeshError("truncated mesh file " + path);
    // Rebuild the derived interface edges.
    int cnt = static_cast<int>(m.interface_nodes.size());
    for (int i = 0; i < cnt; ++i) {
        InterfaceEdge e;
        e.a = m.interface_nodes[i];
        e.b = m.interface_nodes[(i + 1) % cnt];
        const Vec2& pa = m.vertices[e.a];
        const Vec2& pb = m.vertices[e.b];
        e.length = dist(pa, pb);
        double mx = 0.5 * (pa[0] + pb[0]) - 0.5;
        double my = 0.5 * (pa[1] + pb[1]) - 0.5;
        double nn = std::hypot(mx, my);
        e.normal = {mx / nn, my / nn};
        m.interface_edges.push_back(e);
    }
    return m;
}

}  // namespace epcell
