#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace epcell {

using Vec2 = std::array<double, 2>;

struct MeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Triangle with region tag.
struct Tri {
    std::array<int, 3> v;
    enum class Region : std::uint8_t { Intra, Extra } region;
};

/// Oriented interface edge (a -> b counter-clockwise along Gamma) with the
/// outward normal, exterior to the inclusion.
struct InterfaceEdge {
    int a, b;
    Vec2 normal;
    double length;
};

/// Conforming triangulation of the unit cell Y = (0,1)^2 with a circular
/// inclusion of radius r centred at (0.5, 0.5).
///
/// Construction guarantees:
///  - interface vertices lie exactly on the circle,
///  - opposite outer edges carry identical node layouts (exact periodic
///    pairing),
///  - vertex positions and connectivity are symmetric under the
///    reflections y1 -> 1-y1 and y2 -> 1-y2.
struct UnitCellMesh {
    std::vector<Vec2> vertices;
    std::vector<Tri> triangles;
    std::vector<InterfaceEdge> interface_edges;
    std::vector<int> interface_nodes;            // ordered CCW, theta_0 = 0
    std::vector<std::array<int, 2>> periodic_pairs;  // (left,right)/(bottom,top)
    double h = 0.0;       // achieved maximum edge length
    double radius = 0.0;  // inclusion radius

    /// Interface angle at interface node slot s (node interface_nodes[s]).
    double interface_angle(int slot) const;
    /// Lumped interface weight: half the length of the two adjacent edges.
    std::vector<double> interface_weights() const;
};

struct MeshDiagnostics {
    int triangle_count = 0;
    int node_count = 0;
    int interface_node_count = 0;
    double min_angle_deg = 0.0;
    double intra_area = 0.0;
    double extra_area = 0.0;
    double max_periodic_mismatch = 0.0;
    double max_interface_radial_error = 0.0;
    double max_edge_length = 0.0;
};

/// Builds the structured unit-cell mesh. Throws MeshError if the quality
/// gate (minimum angle >= 15 degrees) cannot be met.
UnitCellMesh build_unit_cell(double h, double r);

MeshDiagnostics mesh_diagnostics(const UnitCellMesh& m);

/// Plain-text export/import: header "unitcell v1 h r", then vertex,
/// triangle, interface, and pairing blocks; whitespace-separated, 0-based.
void write_mesh(const UnitCellMesh& m, const std::string& path);
UnitCellMesh read_mesh(const std::string& path);

double triangle_area(const Vec2& a, const Vec2& b, const Vec2& c);

}  // namespace epcell
