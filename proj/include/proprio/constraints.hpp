#pragma once

#include <optional>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "proprio/core.hpp"
#include "proprio/fem.hpp"
#include "proprio/geometry.hpp"

namespace proprio {

/// Point force of unknown magnitude along a fixed world direction, attached
/// to the mesh barycentrically. One constraint row; lambda is the magnitude
/// in N.
struct ForceConstraint {
    BarycentricAnchor anchor;
    Eigen::Vector2d direction = Eigen::Vector2d::UnitY();  // unit norm
};

inline ForceConstraint make_force_constraint(const TriMesh& mesh, const Point2& at,
                                             Eigen::Vector2d direction) {
    double n = direction.norm();
    if (n <= 1e-12) throw ConfigError("force direction must be nonzero");
    return ForceConstraint{barycentric_coords(mesh, at), direction / n};
}

/// Pressure acting on a chain of boundary edges (the chamber wall). One
/// constraint row; lambda is the pressure in N/mm^2 and H^T lambda is the
/// edge-lumped follower load.
struct PressureConstraint {
    std::vector<std::array<int, 2>> chamber_edges;  // contiguous, mesh orientation
};

/// Chamber edges must be boundary edges of the mesh, all in the mesh
/// orientation (normals point out of the material) or all reversed (normals
/// point from the enclosed gas into the wall, so positive pressure inflates
/// an internal cavity), and must chain contiguously.
inline void validate_pressure_constraint(const TriMesh& mesh, const PressureConstraint& c) {
    if (c.chamber_edges.empty()) throw ConfigError("pressure constraint needs edges");
    std::set<std::array<int, 2>> boundary(mesh.boundary_edges.begin(), mesh.boundary_edges.end());
    bool all_forward = true, all_reversed = true;
    for (const auto& e : c.chamber_edges) {
        if (!boundary.count(e)) all_forward = false;
        if (!boundary.count({e[1], e[0]})) all_reversed = false;
    }
    if (!all_forward && !all_reversed)
        throw ConfigError("chamber edges must be consistently oriented boundary edges");
    for (std::size_t k = 0; k + 1 < c.chamber_edges.size(); ++k)
        if (c.chamber_edges[k][1] != c.chamber_edges[k + 1][0])
            throw ConfigError("chamber edges must form a contiguous chain");
}

/// Sequence of inextensible segments along an embedded stiff layer. One row
/// per segment; lambda_k is the segment tension in N.
struct LengthConstraint {
    std::vector<BarycentricAnchor> segment_anchors;  // ordered along the layer
    std::vector<double> rest_lengths;                // mm, from the rest configuration
};

inline LengthConstraint make_length_constraint(const TriMesh& mesh,
                                               std::vector<BarycentricAnchor> anchors) {
    if (anchors.size() < 2) throw ConfigError("length constraint needs at least 2 anchors");
    LengthConstraint c;
    c.segment_anchors = std::move(anchors);
    VectorXd q0 = rest_positions(mesh);
    for (std::size_t k = 0; k + 1 < c.segment_anchors.size(); ++k) {
        double len = (anchor_position(mesh, c.segment_anchors[k + 1], q0) -
                      anchor_position(mesh, c.segment_anchors[k], q0))
                         .norm();
        if (len <= 1e-9) throw DegenerateSegment("length constraint segment has zero rest length");
        c.rest_lengths.push_back(len);
    }
    return c;
}

/// Pose of interest on the mesh: a barycentric point position (two rows) or
/// the in-plane rotation of its host triangle (one row).
enum class EffectorKind { position, orientation };

struct PoseEffector {
    BarycentricAnchor anchor;
    EffectorKind kind = EffectorKind::position;
};

inline int effector_row_count(const PoseEffector& e) {
    return e.kind == EffectorKind::position ? 2 : 1;
}

// ---------------------------------------------------------------------------
// Constraint Jacobian rows. Each row maps nodal displacements to one
// constraint-space quantity; transposed against lambda it applies the efforts
// as nodal forces.

inline Eigen::RowVectorXd force_row(const TriMesh& mesh, const ForceConstraint& c) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(mesh.dof_count());
    const auto& t = mesh.triangles[std::size_t(c.anchor.triangle_index)];
    for (int k = 0; k < 3; ++k) {
        double w = c.anchor.weights[std::size_t(k)];
        row(2 * t[std::size_t(k)]) += w * c.direction.x();
        row(2 * t[std::size_t(k)] + 1) += w * c.direction.y();
    }
    return row;
}

/// Edge-lumped pressure row at the current configuration: each edge of
/// length l and outward normal n contributes (l * thickness / 2) * n to both
/// endpoints. For a closed chamber loop the entries sum to zero net force.
inline Eigen::RowVectorXd pressure_row(const TriMesh& mesh, const PressureConstraint& c,
                                       const VectorXd& q, double thickness) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(mesh.dof_count());
    for (const auto& e : c.chamber_edges) {
        Point2 pi = node_position(q, e[0]);
        Point2 pj = node_position(q, e[1]);
        Point2 tangent = pj - pi;
        Eigen::Vector2d weight(tangent.y(), -tangent.x());  // length * outward normal
        weight *= 0.5 * thickness;
        for (int end = 0; end < 2; ++end) {
            row(2 * e[std::size_t(end)]) += weight.x();
            row(2 * e[std::size_t(end)] + 1) += weight.y();
        }
    }
    return row;
}

inline VectorXd segment_lengths(const TriMesh& mesh, const LengthConstraint& c,
                                const VectorXd& q) {
    VectorXd lengths(int(c.rest_lengths.size()));
    for (int k = 0; k < lengths.size(); ++k)
        lengths(k) = (anchor_position(mesh, c.segment_anchors[std::size_t(k) + 1], q) -
                      anchor_position(mesh, c.segment_anchors[std::size_t(k)], q))
                         .norm();
    return lengths;
}

/// Row k is the gradient of segment k's length with respect to q: the unit
/// segment direction at the far anchor, negated at the near anchor, spread by
/// the barycentric weights.
inline MatrixXd length_rows(const TriMesh& mesh, const LengthConstraint& c, const VectorXd& q) {
    MatrixXd rows = MatrixXd::Zero(int(c.rest_lengths.size()), mesh.dof_count());
    for (int k = 0; k < rows.rows(); ++k) {
        const auto& near = c.segment_anchors[std::size_t(k)];
        const auto& far = c.segment_anchors[std::size_t(k) + 1];
        Point2 d = anchor_position(mesh, far, q) - anchor_position(mesh, near, q);
        double len = d.norm();
        if (len <= 1e-9) throw DegenerateSegment("length constraint segment collapsed");
        Eigen::Vector2d e = d / len;
        auto spread = [&](const BarycentricAnchor& a, double sign) {
            const auto& t = mesh.triangles[std::size_t(a.triangle_index)];
            for (int v = 0; v < 3; ++v) {
                rows(k, 2 * t[std::size_t(v)]) += sign * a.weights[std::size_t(v)] * e.x();
                rows(k, 2 * t[std::size_t(v)] + 1) += sign * a.weights[std::size_t(v)] * e.y();
            }
        };
        spread(far, 1.0);
        spread(near, -1.0);
    }
    return rows;
}

/// Position effectors produce two barycentric interpolation rows (x then y);
/// orientation effectors produce the gradient of the host triangle's
/// corotational rotation angle, so row . dq approximates the in-plane angular
/// displacement.
inline MatrixXd effector_rows(const TriMesh& mesh, const PoseEffector& e, const VectorXd& q) {
    MatrixXd rows = MatrixXd::Zero(effector_row_count(e), mesh.dof_count());
    const auto& t = mesh.triangles[std::size_t(e.anchor.triangle_index)];
    if (e.kind == EffectorKind::position) {
        for (int k = 0; k < 3; ++k) {
            double w = e.anchor.weights[std::size_t(k)];
            rows(0, 2 * t[std::size_t(k)]) += w;
            rows(1, 2 * t[std::size_t(k)] + 1) += w;
        }
    } else {
        RotationGradient rot = triangle_rotation(mesh, q, e.anchor.triangle_index);
        for (int k = 0; k < 3; ++k) {
            rows(0, 2 * t[std::size_t(k)]) += rot.gradient(2 * k);
            rows(0, 2 * t[std::size_t(k)] + 1) += rot.gradient(2 * k + 1);
        }
    }
    return rows;
}

/// Current effector value: the anchor point (x, y) or the host triangle's
/// rotation angle.
inline VectorXd effector_value(const TriMesh& mesh, const PoseEffector& e, const VectorXd& q) {
    if (e.kind == EffectorKind::position) {
        return anchor_position(mesh, e.anchor, q);
    }
    VectorXd v(1);
    v(0) = triangle_rotation(mesh, q, e.anchor.triangle_index).angle;
    return v;
}

/// Compliance matrix H_e K^-1 H_f^T: one linear solve per constraint column
/// against the boundary-projected tangent factorization.
inline MatrixXd compute_compliance(const FemSystem::Factor& factor, const MatrixXd& effector,
                                   const MatrixXd& constraint) {
    if (constraint.rows() == 0 || effector.rows() == 0)
        return MatrixXd::Zero(effector.rows(), constraint.rows());
    MatrixXd solved = factor.solve(MatrixXd(constraint.transpose()));
    return effector * solved;
}

}  // namespace proprio
