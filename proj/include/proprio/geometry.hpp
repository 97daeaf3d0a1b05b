#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "proprio/core.hpp"

namespace proprio {

using Point2 = Eigen::Vector2d;  // mm
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Planar triangulation. Triangles wind counter-clockwise; boundary edges are
/// directed so the material lies on the left of i->j (outward normal is the
/// tangent rotated -90 degrees). Instances are treated as immutable once
/// validated, so concurrent reads are safe.
struct TriMesh {
    std::vector<Point2> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<std::array<int, 2>> boundary_edges;
    std::vector<int> fixed_vertices;  // sorted, unique, non-empty

    int vertex_count() const { return int(vertices.size()); }
    int dof_count() const { return 2 * int(vertices.size()); }

    bool is_fixed(int v) const {
        return std::binary_search(fixed_vertices.begin(), fixed_vertices.end(), v);
    }
};

inline double triangle_signed_area(const Point2& a, const Point2& b, const Point2& c) {
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

/// Directed boundary edges (exactly one incident triangle), oriented as they
/// appear in that triangle's cyclic vertex order.
inline std::vector<std::array<int, 2>> compute_boundary_edges(
    const std::vector<std::array<int, 3>>& triangles) {
    std::map<std::pair<int, int>, int> undirected_count;
    for (const auto& t : triangles) {
        for (int k = 0; k < 3; ++k) {
            int i = t[std::size_t(k)], j = t[std::size_t((k + 1) % 3)];
            undirected_count[{std::min(i, j), std::max(i, j)}]++;
        }
    }
    std::vector<std::array<int, 2>> edges;
    for (const auto& t : triangles) {
        for (int k = 0; k < 3; ++k) {
            int i = t[std::size_t(k)], j = t[std::size_t((k + 1) % 3)];
            if (undirected_count.at({std::min(i, j), std::max(i, j)}) == 1)
                edges.push_back({i, j});
        }
    }
    return edges;
}

inline void validate_mesh(const TriMesh& mesh) {
    const int n = mesh.vertex_count();
    if (n < 3) throw ConfigError("mesh needs at least 3 vertices");
    for (const auto& v : mesh.vertices)
        if (!v.allFinite()) throw ConfigError("mesh vertex is not finite");
    for (const auto& t : mesh.triangles) {
        for (int idx : t)
            if (idx < 0 || idx >= n) throw ConfigError("triangle index out of range");
        if (triangle_signed_area(mesh.vertices[std::size_t(t[0])], mesh.vertices[std::size_t(t[1])],
                                 mesh.vertices[std::size_t(t[2])]) <= 0.0)
            throw ConfigError("triangle is not counter-clockwise");
    }
    auto expected = compute_boundary_edges(mesh.triangles);
    auto sorted_pairs = [](std::vector<std::array<int, 2>> e) {
        std::sort(e.begin(), e.end());
        return e;
    };
    if (sorted_pairs(expected) != sorted_pairs(mesh.boundary_edges))
        throw ConfigError("boundary_edges do not match the oriented mesh boundary");
    // Closed loops: every boundary vertex has exactly one outgoing and one
    // incoming boundary edge.
    std::map<int, int> out_deg, in_deg;
    for (const auto& e : mesh.boundary_edges) {
        out_deg[e[0]]++;
        in_deg[e[1]]++;
    }
    for (const auto& [v, d] : out_deg)
        if (d != 1 || in_deg[v] != 1) throw ConfigError("boundary edges do not form closed loops");
    if (mesh.fixed_vertices.empty()) throw ConfigError("mesh needs at least one fixed vertex");
    if (!std::is_sorted(mesh.fixed_vertices.begin(), mesh.fixed_vertices.end()))
        throw ConfigError("fixed_vertices must be sorted");
    for (int v : mesh.fixed_vertices)
        if (v < 0 || v >= n) throw ConfigError("fixed vertex index out of range");
}

/// Nodal positions of the rest configuration, packed (x0, y0, x1, y1, ...).
inline VectorXd rest_positions(const TriMesh& mesh) {
    VectorXd q(mesh.dof_count());
    for (int i = 0; i < mesh.vertex_count(); ++i) q.segment<2>(2 * i) = mesh.vertices[std::size_t(i)];
    return q;
}

inline Point2 node_position(const VectorXd& q, int vertex) { return q.segment<2>(2 * vertex); }

/// Structured strip mesh: cols x rows grid of quads split into two triangles
/// each. skip_cell (optional) removes cells, e.g. to carve an internal
/// chamber; left-edge vertices are fixed.
inline TriMesh make_grid_mesh(double length_mm, double height_mm, int cols, int rows,
                              const std::function<bool(int, int)>& skip_cell = {}) {
    if (cols < 1 || rows < 1) throw ConfigError("grid mesh needs cols >= 1 and rows >= 1");
    if (length_mm <= 0 || height_mm <= 0) throw ConfigError("grid mesh needs positive extents");
    const double dx = length_mm / cols, dy = height_mm / rows;
    std::vector<int> vertex_id(std::size_t((cols + 1) * (rows + 1)), -1);
    auto grid_index = [cols](int ix, int iy) { return iy * (cols + 1) + ix; };

    TriMesh mesh;
    auto use_vertex = [&](int ix, int iy) {
        int& id = vertex_id[std::size_t(grid_index(ix, iy))];
        if (id < 0) {
            id = mesh.vertex_count();
            mesh.vertices.push_back(Point2(ix * dx, iy * dy));
        }
        return id;
    };
    for (int cy = 0; cy < rows; ++cy) {
        for (int cx = 0; cx < cols; ++cx) {
            if (skip_cell && skip_cell(cx, cy)) continue;
            int v00 = use_vertex(cx, cy), v10 = use_vertex(cx + 1, cy);
            int v11 = use_vertex(cx + 1, cy + 1), v01 = use_vertex(cx, cy + 1);
            mesh.triangles.push_back({v00, v10, v11});
            mesh.triangles.push_back({v00, v11, v01});
        }
    }
    mesh.boundary_edges = compute_boundary_edges(mesh.triangles);
    for (int i = 0; i < mesh.vertex_count(); ++i)
        if (mesh.vertices[std::size_t(i)].x() == 0.0) mesh.fixed_vertices.push_back(i);
    std::sort(mesh.fixed_vertices.begin(), mesh.fixed_vertices.end());
    validate_mesh(mesh);
    return mesh;
}

/// Attachment of an off-node point to a triangle by convex vertex weights.
struct BarycentricAnchor {
    int triangle_index = -1;
    std::array<double, 3> weights{};
};

inline std::array<double, 3> barycentric_weights_in(const TriMesh& mesh, int tri, const Point2& p) {
    const auto& t = mesh.triangles[std::size_t(tri)];
    const Point2& a = mesh.vertices[std::size_t(t[0])];
    const Point2& b = mesh.vertices[std::size_t(t[1])];
    const Point2& c = mesh.vertices[std::size_t(t[2])];
    Eigen::Matrix2d m;
    m.col(0) = b - a;
    m.col(1) = c - a;
    Eigen::Vector2d w = m.partialPivLu().solve(p - a);
    return {1.0 - w(0) - w(1), w(0), w(1)};
}

inline double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    Point2 d = b - a;
    double len2 = d.squaredNorm();
    double s = len2 > 0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
    return (p - (a + s * d)).norm();
}

inline double point_triangle_distance(const TriMesh& mesh, int tri, const Point2& p) {
    const auto& t = mesh.triangles[std::size_t(tri)];
    double d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k)
        d = std::min(d, point_segment_distance(p, mesh.vertices[std::size_t(t[std::size_t(k)])],
                                               mesh.vertices[std::size_t(t[std::size_t((k + 1) % 3)])]));
    return d;
}

/// Locate p in the mesh. Points on shared edges resolve to the lowest
/// triangle index; points within 1e-6 mm outside a triangle are clamped onto
/// it and the weights renormalized.
inline BarycentricAnchor barycentric_coords(const TriMesh& mesh, const Point2& p,
                                            double tolerance_mm = 1e-6) {
    int best_tri = -1;
    std::array<double, 3> best_w{};
    double best_dist = std::numeric_limits<double>::infinity();
    for (int tri = 0; tri < int(mesh.triangles.size()); ++tri) {
        auto w = barycentric_weights_in(mesh, tri, p);
        double min_w = std::min({w[0], w[1], w[2]});
        if (min_w >= -1e-12) {
            best_tri = tri;
            best_w = w;
            best_dist = 0.0;
            break;  // lowest containing triangle wins
        }
        double d = point_triangle_distance(mesh, tri, p);
        if (d < best_dist) {
            best_dist = d;
            best_tri = tri;
            best_w = w;
        }
    }
    if (best_tri < 0 || best_dist > tolerance_mm)
        throw PointOutsideMesh("no triangle contains point within tolerance");
    double sum = 0.0;
    for (auto& w : best_w) {
        w = std::clamp(w, 0.0, 1.0);
        sum += w;
    }
    for (auto& w : best_w) w /= sum;
    return BarycentricAnchor{best_tri, best_w};
}

/// Weighted sum of the host triangle's vertex positions under configuration q.
inline Point2 anchor_position(const TriMesh& mesh, const BarycentricAnchor& anchor,
                              const VectorXd& q) {
    const auto& t = mesh.triangles[std::size_t(anchor.triangle_index)];
    Point2 p = Point2::Zero();
    for (int k = 0; k < 3; ++k)
        p += anchor.weights[std::size_t(k)] * node_position(q, t[std::size_t(k)]);
    return p;
}

/// Ordered anchors along an embedded path, with arc-length coordinates
/// starting at 0 at the base.
struct Centerline {
    std::vector<BarycentricAnchor> anchors;
    std::vector<double> arc_positions;  // mm, strictly increasing from 0

    int point_count() const { return int(anchors.size()); }
};

/// n anchors at equal arc-length spacing along a polyline path inside the
/// mesh.
inline Centerline sample_centerline(const TriMesh& mesh, const std::vector<Point2>& path, int n) {
    if (n < 2) throw ConfigError("centerline needs at least 2 samples");
    if (path.size() < 2) throw ConfigError("centerline path needs at least 2 points");
    std::vector<double> cumulative(path.size(), 0.0);
    for (std::size_t i = 1; i < path.size(); ++i)
        cumulative[i] = cumulative[i - 1] + (path[i] - path[i - 1]).norm();
    const double total = cumulative.back();
    if (total <= 0) throw ConfigError("centerline path has zero length");

    Centerline line;
    for (int k = 0; k < n; ++k) {
        double s = total * k / (n - 1);
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
        std::size_t seg = std::min(path.size() - 2, std::size_t(std::max<std::ptrdiff_t>(
                                                        0, it - cumulative.begin() - 1)));
        double seg_len = cumulative[seg + 1] - cumulative[seg];
        double a = seg_len > 0 ? (s - cumulative[seg]) / seg_len : 0.0;
        Point2 p = (1.0 - a) * path[seg] + a * path[seg + 1];
        line.anchors.push_back(barycentric_coords(mesh, p));
        line.arc_positions.push_back(s);
    }
    return line;
}

inline Point2 centerline_position(const TriMesh& mesh, const Centerline& line, int k,
                                  const VectorXd& q) {
    return anchor_position(mesh, line.anchors[std::size_t(k)], q);
}

// ---------------------------------------------------------------------------
// Mesh file format: JSON with keys `vertices`, `triangles`, `boundary_edges`,
// `fixed` (coordinates in mm).

inline nlohmann::json mesh_to_json(const TriMesh& mesh) {
    nlohmann::json j;
    j["vertices"] = nlohmann::json::array();
    for (const auto& v : mesh.vertices) j["vertices"].push_back({v.x(), v.y()});
    j["triangles"] = nlohmann::json::array();
    for (const auto& t : mesh.triangles) j["triangles"].push_back({t[0], t[1], t[2]});
    j["boundary_edges"] = nlohmann::json::array();
    for (const auto& e : mesh.boundary_edges) j["boundary_edges"].push_back({e[0], e[1]});
    j["fixed"] = mesh.fixed_vertices;
    return j;
}

inline TriMesh mesh_from_json(const nlohmann::json& j) {
    TriMesh mesh;
    try {
        for (const auto& v : j.at("vertices"))
            mesh.vertices.push_back(Point2(v.at(0).get<double>(), v.at(1).get<double>()));
        for (const auto& t : j.at("triangles"))
            mesh.triangles.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
        for (const auto& e : j.at("boundary_edges"))
            mesh.boundary_edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
        mesh.fixed_vertices = j.at("fixed").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed mesh file: ") + e.what());
    }
    std::sort(mesh.fixed_vertices.begin(), mesh.fixed_vertices.end());
    validate_mesh(mesh);
    return mesh;
}

inline TriMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mesh file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("cannot parse mesh file: ") + e.what());
    }
    return mesh_from_json(j);
}

inline void save_mesh(const std::string& path, const TriMesh& mesh) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write mesh file: " + path);
    out << mesh_to_json(mesh).dump(2) << "\n";
}

}  // namespace proprio
