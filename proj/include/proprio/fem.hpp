#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "proprio/core.hpp"
#include "proprio/geometry.hpp"

namespace proprio {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using SparseMatrixd = Eigen::SparseMatrix<double>;

/// Linear-elastic material under plane strain. Internally the toolkit works
/// in mm and N, so the modulus is stored in N/mm^2; file formats carry Pa and
/// convert at the boundary.
struct Material {
    double young_modulus = 1.0;   // N/mm^2
    double poisson_ratio = 0.45;  // dimensionless, < 0.5
    double thickness = 1.0;       // out-of-plane depth, mm
};

inline void validate_material(const Material& m) {
    if (!(m.young_modulus > 0)) throw ConfigError("young_modulus must be positive");
    if (!(m.poisson_ratio >= 0 && m.poisson_ratio < 0.5))
        throw ConfigError("poisson_ratio must be in [0, 0.5)");
    if (!(m.thickness > 0)) throw ConfigError("thickness must be positive");
}

/// Nodal positions of the current and previous step plus the accumulated
/// constraint efforts.
struct SystemState {
    VectorXd q;
    VectorXd q_prev;
    VectorXd lambda;

    static SystemState rest(const TriMesh& mesh, int effort_rows = 0) {
        SystemState s;
        s.q = rest_positions(mesh);
        s.q_prev = s.q;
        s.lambda = VectorXd::Zero(effort_rows);
        return s;
    }
};

/// Constant-strain-triangle stiffness for plane strain: B^T C B * area *
/// thickness. Symmetric positive semi-definite with the three rigid modes in
/// its nullspace.
inline Matrix6d element_stiffness(const std::array<Point2, 3>& rest, const Material& mat) {
    const double area = triangle_signed_area(rest[0], rest[1], rest[2]);
    if (area <= 1e-12) throw DegenerateElement("element rest area is not positive");

    const double b1 = rest[1].y() - rest[2].y(), b2 = rest[2].y() - rest[0].y(),
                 b3 = rest[0].y() - rest[1].y();
    const double c1 = rest[2].x() - rest[1].x(), c2 = rest[0].x() - rest[2].x(),
                 c3 = rest[1].x() - rest[0].x();

    Eigen::Matrix<double, 3, 6> b_mat;
    b_mat << b1, 0, b2, 0, b3, 0,  //
        0, c1, 0, c2, 0, c3,       //
        c1, b1, c2, b2, c3, b3;
    b_mat /= (2.0 * area);

    const double e = mat.young_modulus, nu = mat.poisson_ratio;
    const double f = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
    Eigen::Matrix3d c_mat;
    c_mat << f * (1.0 - nu), f * nu, 0,  //
        f * nu, f * (1.0 - nu), 0,       //
        0, 0, f * (1.0 - 2.0 * nu) / 2.0;

    return b_mat.transpose() * c_mat * b_mat * area * mat.thickness;
}

/// Rotation angle extracted from a triangle's deformation gradient, plus its
/// exact gradient with respect to the six nodal coordinates.
struct RotationGradient {
    double angle = 0.0;
    Vector6d gradient = Vector6d::Zero();
};

namespace detail {

struct ElementGeometry {
    Eigen::Matrix2d d0inv;     // inverse of rest edge matrix
    Vector6d rest_centered;    // rest coords minus rest centroid
    double rest_area = 0.0;
};

inline ElementGeometry element_geometry(const std::array<Point2, 3>& rest) {
    ElementGeometry g;
    g.rest_area = triangle_signed_area(rest[0], rest[1], rest[2]);
    if (g.rest_area <= 1e-12) throw DegenerateElement("element rest area is not positive");
    Eigen::Matrix2d d0;
    d0.col(0) = rest[1] - rest[0];
    d0.col(1) = rest[2] - rest[0];
    g.d0inv = d0.inverse();
    Point2 centroid = (rest[0] + rest[1] + rest[2]) / 3.0;
    for (int k = 0; k < 3; ++k) g.rest_centered.segment<2>(2 * k) = rest[std::size_t(k)] - centroid;
    return g;
}

/// Corotational quantities of one element at current vertex positions.
struct CorotationalFrame {
    double angle = 0.0;
    double sin_part = 0.0, cos_part = 0.0, r2 = 0.0;  // atan2 operands and norm
    Vector6d grad_sin = Vector6d::Zero(), grad_cos = Vector6d::Zero();
    Vector6d grad_angle = Vector6d::Zero();
    Eigen::Matrix2d rotation = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d rotation_dtheta = Eigen::Matrix2d::Zero();
    Vector6d centered = Vector6d::Zero();       // current coords minus centroid
    double current_area = 0.0;
};

inline CorotationalFrame corotational_frame(const ElementGeometry& g,
                                            const std::array<Point2, 3>& x) {
    CorotationalFrame fr;
    fr.current_area = triangle_signed_area(x[0], x[1], x[2]);
    Eigen::Matrix2d dc;
    dc.col(0) = x[1] - x[0];
    dc.col(1) = x[2] - x[0];
    Eigen::Matrix2d f = dc * g.d0inv;
    fr.sin_part = f(1, 0) - f(0, 1);
    fr.cos_part = f(0, 0) + f(1, 1);
    fr.r2 = fr.sin_part * fr.sin_part + fr.cos_part * fr.cos_part;
    if (fr.r2 <= 1e-24) throw DegenerateElement("deformation gradient collapsed");
    fr.angle = std::atan2(fr.sin_part, fr.cos_part);
    const double co = std::cos(fr.angle), si = std::sin(fr.angle);
    fr.rotation << co, -si, si, co;
    fr.rotation_dtheta << -si, -co, co, -si;

    const double m11 = g.d0inv(0, 0), m12 = g.d0inv(0, 1);
    const double m21 = g.d0inv(1, 0), m22 = g.d0inv(1, 1);
    fr.grad_cos << -(m11 + m21), -(m12 + m22), m11, m12, m21, m22;
    fr.grad_sin << (m12 + m22), -(m11 + m21), -m12, m11, -m22, m21;
    fr.grad_angle = (fr.cos_part * fr.grad_sin - fr.sin_part * fr.grad_cos) / fr.r2;

    Point2 centroid = (x[0] + x[1] + x[2]) / 3.0;
    for (int k = 0; k < 3; ++k) fr.centered.segment<2>(2 * k) = x[std::size_t(k)] - centroid;
    return fr;
}

inline Vector6d apply_blockwise(const Eigen::Matrix2d& m, const Vector6d& v) {
    Vector6d out;
    for (int k = 0; k < 3; ++k) out.segment<2>(2 * k) = m * v.segment<2>(2 * k);
    return out;
}

}  // namespace detail

/// Corotational rotation angle of one triangle and its gradient, used both by
/// the element forces and by orientation effectors.
inline RotationGradient triangle_rotation(const TriMesh& mesh, const VectorXd& q, int tri) {
    const auto& t = mesh.triangles[std::size_t(tri)];
    std::array<Point2, 3> rest{mesh.vertices[std::size_t(t[0])], mesh.vertices[std::size_t(t[1])],
                               mesh.vertices[std::size_t(t[2])]};
    std::array<Point2, 3> cur{node_position(q, t[0]), node_position(q, t[1]),
                              node_position(q, t[2])};
    auto fr = detail::corotational_frame(detail::element_geometry(rest), cur);
    return RotationGradient{fr.angle, fr.grad_angle};
}

struct StepOptions {
    double tolerance_n = 1e-8;  // infinity norm of the force residual
    int max_iterations = 50;
};

/// Assembled corotational model over one mesh and material. Rest-state data
/// is precomputed once; the object itself is immutable and can be shared
/// across threads for concurrent read-only use.
class FemSystem {
public:
    FemSystem(TriMesh mesh, Material material)
        : mesh_(std::move(mesh)), material_(material) {
        validate_mesh(mesh_);
        validate_material(material_);
        fixed_dof_.assign(std::size_t(mesh_.dof_count()), false);
        for (int v : mesh_.fixed_vertices)
            fixed_dof_[std::size_t(2 * v)] = fixed_dof_[std::size_t(2 * v + 1)] = true;
        elements_.reserve(mesh_.triangles.size());
        for (const auto& t : mesh_.triangles) {
            std::array<Point2, 3> rest{mesh_.vertices[std::size_t(t[0])],
                                       mesh_.vertices[std::size_t(t[1])],
                                       mesh_.vertices[std::size_t(t[2])]};
            Element e;
            e.nodes = t;
            e.geometry = detail::element_geometry(rest);
            e.stiffness = element_stiffness(rest, material_);
            elements_.push_back(e);
        }
    }

    const TriMesh& mesh() const { return mesh_; }
    const Material& material() const { return material_; }
    const std::vector<bool>& fixed_dof() const { return fixed_dof_; }
    VectorXd rest() const { return rest_positions(mesh_); }

    /// Zero the entries of fixed degrees of freedom.
    VectorXd project_loads(VectorXd v) const {
        for (int d = 0; d < int(v.size()); ++d)
            if (fixed_dof_[std::size_t(d)]) v(d) = 0.0;
        return v;
    }

    /// Corotational internal forces, the exact gradient of elastic_energy.
    /// Returns false when a current triangle is inverted instead of throwing.
    bool try_internal_forces(const VectorXd& q, VectorXd& out) const {
        out = VectorXd::Zero(mesh_.dof_count());
        for (const auto& e : elements_) {
            auto x = gather(e, q);
            if (triangle_signed_area(x[0], x[1], x[2]) <= 0.0) return false;
            auto fr = detail::corotational_frame(e.geometry, x);
            Vector6d u =
                detail::apply_blockwise(fr.rotation.transpose(), fr.centered) - e.geometry.rest_centered;
            Vector6d y = detail::apply_blockwise(fr.rotation_dtheta.transpose(), fr.centered);
            Vector6d z = e.stiffness * u;
            double g = y.dot(z);
            Vector6d f = detail::apply_blockwise(fr.rotation, z) + g * fr.grad_angle;
            scatter(e, f, out);
        }
        return true;
    }

    VectorXd internal_forces(const VectorXd& q) const {
        VectorXd out;
        if (!try_internal_forces(q, out))
            throw DegenerateElement("inverted element in current configuration");
        return out;
    }

    /// Total elastic energy of the corotational model.
    double elastic_energy(const VectorXd& q) const {
        double total = 0.0;
        for (const auto& e : elements_) {
            auto x = gather(e, q);
            if (triangle_signed_area(x[0], x[1], x[2]) <= 0.0)
                throw DegenerateElement("inverted element in current configuration");
            auto fr = detail::corotational_frame(e.geometry, x);
            Vector6d u =
                detail::apply_blockwise(fr.rotation.transpose(), fr.centered) - e.geometry.rest_centered;
            total += 0.5 * u.dot(e.stiffness * u);
        }
        return total;
    }

    /// Exact Jacobian of internal_forces with rows/columns of fixed DOFs
    /// replaced by identity.
    SparseMatrixd tangent_stiffness(const VectorXd& q) const {
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(elements_.size() * 36 + std::size_t(mesh_.dof_count()));
        for (const auto& e : elements_) {
            auto x = gather(e, q);
            if (triangle_signed_area(x[0], x[1], x[2]) <= 0.0)
                throw DegenerateElement("inverted element in current configuration");
            Matrix6d he = element_tangent(e, x);
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    for (int ia = 0; ia < 2; ++ia) {
                        for (int ib = 0; ib < 2; ++ib) {
                            int row = 2 * e.nodes[std::size_t(a)] + ia;
                            int col = 2 * e.nodes[std::size_t(b)] + ib;
                            if (fixed_dof_[std::size_t(row)] || fixed_dof_[std::size_t(col)]) continue;
                            triplets.emplace_back(row, col, he(2 * a + ia, 2 * b + ib));
                        }
                    }
                }
            }
        }
        for (int d = 0; d < mesh_.dof_count(); ++d)
            if (fixed_dof_[std::size_t(d)]) triplets.emplace_back(d, d, 1.0);
        SparseMatrixd k(mesh_.dof_count(), mesh_.dof_count());
        k.setFromTriplets(triplets.begin(), triplets.end());
        return k;
    }

    /// Reusable factorization; immutable once built, safe for concurrent
    /// solves. Right-hand sides are projected onto the free DOFs, matching
    /// the identity rows of the projected tangent.
    class Factor {
    public:
        explicit Factor(const SparseMatrixd& k, std::vector<bool> fixed_dof = {})
            : fixed_(std::move(fixed_dof)) {
            ldlt_.compute(k);
            if (ldlt_.info() != Eigen::Success)
                throw SingularSystem("stiffness factorization failed");
        }
        VectorXd solve(const VectorXd& rhs) const {
            VectorXd x = ldlt_.solve(projected(rhs));
            if (ldlt_.info() != Eigen::Success) throw SingularSystem("stiffness solve failed");
            return x;
        }
        MatrixXd solve(const MatrixXd& rhs) const {
            MatrixXd x = ldlt_.solve(projected(rhs));
            if (ldlt_.info() != Eigen::Success) throw SingularSystem("stiffness solve failed");
            return x;
        }

    private:
        template <typename M>
        M projected(M rhs) const {
            if (!fixed_.empty())
                for (int d = 0; d < rhs.rows(); ++d)
                    if (fixed_[std::size_t(d)]) rhs.row(d).setZero();
            return rhs;
        }

        Eigen::SimplicialLDLT<SparseMatrixd> ldlt_;
        std::vector<bool> fixed_;
    };

    Factor factorize(const VectorXd& q) const { return Factor(tangent_stiffness(q), fixed_dof_); }

    /// One quasi-static step: find q with internal forces balancing the dead
    /// loads plus H^T lambda, by a damped Newton loop with the tangent
    /// refreshed each iteration. Constraint geometry H is taken as given for
    /// the duration of the step. Fixed DOFs never move.
    SystemState quasi_static_step(const SystemState& state, const VectorXd& dead_loads,
                                  const MatrixXd& h_rows, const VectorXd& lambda,
                                  const StepOptions& options = {}) const {
        VectorXd applied = dead_loads.size() ? dead_loads : VectorXd::Zero(mesh_.dof_count());
        if (h_rows.rows() > 0) applied += h_rows.transpose() * lambda;
        applied = project_loads(applied);

        VectorXd q = state.q;
        VectorXd forces = internal_forces(q);
        VectorXd residual = project_loads(applied - forces);
        double residual_norm = residual.lpNorm<Eigen::Infinity>();
        int iter = 0;
        for (; iter < options.max_iterations && residual_norm >= options.tolerance_n; ++iter) {
#ifdef PROPRIO_DEBUG_NEWTON
            std::cerr << "    newton " << iter << " res=" << residual_norm << "\n";
#endif
            Factor factor(tangent_stiffness(q), fixed_dof_);
            VectorXd dq = factor.solve(residual);
            // Take the longest fraction of the Newton step that keeps every
            // element uninverted; the residual may grow transiently.
            double alpha = 1.0;
            bool accepted = false;
            for (int halvings = 0; halvings < 30; ++halvings) {
                VectorXd q_try = q + alpha * dq;
                VectorXd f_try;
                if (try_internal_forces(q_try, f_try)) {
                    q = q_try;
                    residual = project_loads(applied - f_try);
                    residual_norm = residual.lpNorm<Eigen::Infinity>();
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) throw NonConvergence("quasi-static step cannot avoid element inversion");
        }
        if (residual_norm >= options.tolerance_n)
            throw NonConvergence("quasi-static step did not reach the force tolerance");

        SystemState next;
        next.q = q;
        next.q_prev = state.q;
        next.lambda = lambda;
        return next;
    }

private:
    struct Element {
        std::array<int, 3> nodes{};
        detail::ElementGeometry geometry;
        Matrix6d stiffness = Matrix6d::Zero();
    };

    std::array<Point2, 3> gather(const Element& e, const VectorXd& q) const {
        return {node_position(q, e.nodes[0]), node_position(q, e.nodes[1]),
                node_position(q, e.nodes[2])};
    }

    void scatter(const Element& e, const Vector6d& f, VectorXd& out) const {
        for (int k = 0; k < 3; ++k) out.segment<2>(2 * e.nodes[std::size_t(k)]) += f.segment<2>(2 * k);
    }

    /// Exact Hessian of the element energy, including the rotation
    /// derivatives. At rest it reduces to the linear element stiffness.
    Matrix6d element_tangent(const Element& e, const std::array<Point2, 3>& x) const {
        auto fr = detail::corotational_frame(e.geometry, x);
        const Matrix6d& ke = e.stiffness;
        Vector6d u =
            detail::apply_blockwise(fr.rotation.transpose(), fr.centered) - e.geometry.rest_centered;
        Vector6d y = detail::apply_blockwise(fr.rotation_dtheta.transpose(), fr.centered);
        Vector6d z = ke * u;
        double g = y.dot(z);

        Matrix6d he = Matrix6d::Zero();
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                he.block<2, 2>(2 * a, 2 * b) =
                    fr.rotation * ke.block<2, 2>(2 * a, 2 * b) * fr.rotation.transpose();

        Vector6d coupling =
            detail::apply_blockwise(fr.rotation, ke * y) + detail::apply_blockwise(fr.rotation_dtheta, z);
        he += coupling * fr.grad_angle.transpose() + fr.grad_angle * coupling.transpose();

        double curvature = y.dot(ke * y) - (u + e.geometry.rest_centered).dot(z);
        he += curvature * fr.grad_angle * fr.grad_angle.transpose();

        Matrix6d angle_hessian =
            (fr.grad_sin * fr.grad_cos.transpose() - fr.grad_cos * fr.grad_sin.transpose()) / fr.r2;
        angle_hessian -= 2.0 / fr.r2 * fr.grad_angle *
                         (fr.sin_part * fr.grad_sin + fr.cos_part * fr.grad_cos).transpose();
        he += g * angle_hessian;
        return he;
    }

    TriMesh mesh_;
    Material material_;
    std::vector<bool> fixed_dof_;
    std::vector<Element> elements_;
};

}  // namespace proprio
