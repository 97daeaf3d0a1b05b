#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "proprio/core.hpp"
#include "proprio/fem.hpp"
#include "proprio/geometry.hpp"

using namespace proprio;

namespace {

const std::array<Point2, 3> kUnitTriangle{Point2(0, 0), Point2(1, 0), Point2(0, 1)};

VectorXd random_perturbation(const TriMesh& mesh, Rng& rng, double amplitude) {
    VectorXd dq = VectorXd::Zero(mesh.dof_count());
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        if (mesh.is_fixed(v)) continue;
        dq(2 * v) = rng.uniform(-amplitude, amplitude);
        dq(2 * v + 1) = rng.uniform(-amplitude, amplitude);
    }
    return dq;
}

VectorXd rotate_configuration(const VectorXd& q, double angle, const Point2& center) {
    Eigen::Rotation2Dd rot(angle);
    VectorXd out(q.size());
    for (int v = 0; v < q.size() / 2; ++v)
        out.segment<2>(2 * v) = center + rot * (Point2(q.segment<2>(2 * v)) - center);
    return out;
}

/// Central finite differences of the elastic energy.
VectorXd energy_gradient_fd(const FemSystem& fem, const VectorXd& q, double step) {
    VectorXd grad(q.size());
    VectorXd probe = q;
    for (int d = 0; d < q.size(); ++d) {
        probe(d) = q(d) + step;
        double hi = fem.elastic_energy(probe);
        probe(d) = q(d) - step;
        double lo = fem.elastic_energy(probe);
        probe(d) = q(d);
        grad(d) = (hi - lo) / (2 * step);
    }
    return grad;
}

}  // namespace

TEST_SUITE("fem") {

TEST_CASE("element stiffness matches the hand-computed unit-triangle fixture") {
    // B and C evaluated by hand for the unit right triangle with unit modulus
    // and zero Poisson ratio, then Ke = B^T C B * area * thickness.
    Matrix6d expected;
    expected << 0.75, 0.25, -0.5, -0.25, -0.25, 0,  //
        0.25, 0.75, 0, -0.25, -0.25, -0.5,          //
        -0.5, 0, 0.5, 0, 0, 0,                      //
        -0.25, -0.25, 0, 0.25, 0.25, 0,             //
        -0.25, -0.25, 0, 0.25, 0.25, 0,             //
        0, -0.5, 0, 0, 0, 0.5;
    Matrix6d ke = element_stiffness(kUnitTriangle, Material{1.0, 0.0, 1.0});
    CHECK((ke - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("element stiffness has the rigid translation nullspace") {
    Matrix6d ke = element_stiffness({Point2(0.3, 0.1), Point2(2.1, 0.4), Point2(0.9, 1.8)},
                                    Material{7.0, 0.3, 2.0});
    Vector6d tx, ty;
    tx << 1, 0, 1, 0, 1, 0;
    ty << 0, 1, 0, 1, 0, 1;
    CHECK((ke * tx).cwiseAbs().maxCoeff() < 1e-12 * ke.cwiseAbs().maxCoeff());
    CHECK((ke * ty).cwiseAbs().maxCoeff() < 1e-12 * ke.cwiseAbs().maxCoeff());
}

TEST_CASE("element stiffness is linear in the modulus") {
    Matrix6d base = element_stiffness(kUnitTriangle, Material{1.0, 0.2, 1.0});
    Matrix6d doubled = element_stiffness(kUnitTriangle, Material{2.0, 0.2, 1.0});
    CHECK((doubled - 2.0 * base).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("element stiffness has exactly three zero eigenvalues") {
    Matrix6d ke = element_stiffness({Point2(0, 0), Point2(3, 0.2), Point2(1, 2)},
                                    Material{5.0, 0.4, 1.5});
    Eigen::SelfAdjointEigenSolver<Matrix6d> eigs(ke);
    int zeros = 0;
    for (int i = 0; i < 6; ++i)
        if (std::abs(eigs.eigenvalues()(i)) < 1e-9 * eigs.eigenvalues().cwiseAbs().maxCoeff())
            ++zeros;
    CHECK(zeros == 3);
    CHECK(eigs.eigenvalues().minCoeff() > -1e-9 * eigs.eigenvalues().maxCoeff());
}

TEST_CASE("degenerate elements are rejected") {
    CHECK_THROWS_AS(
        element_stiffness({Point2(0, 0), Point2(1, 0), Point2(2, 0)}, Material{1.0, 0.0, 1.0}),
        DegenerateElement);
}

TEST_CASE("internal forces vanish at rest") {
    FemSystem fem(make_grid_mesh(120, 10, 24, 2), Material{40.0, 0.45, 10.0});
    CHECK(fem.internal_forces(fem.rest()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("internal forces vanish under rigid rotation") {
    Material mat{40.0, 0.45, 10.0};
    FemSystem fem(make_grid_mesh(120, 10, 24, 2), mat);
    VectorXd q = rotate_configuration(fem.rest(), 30.0 * M_PI / 180.0, Point2(0, 0));
    CHECK(fem.internal_forces(q).cwiseAbs().maxCoeff() < 1e-8 * mat.young_modulus);
}

TEST_CASE("internal forces are the gradient of the elastic energy") {
    FemSystem fem(make_grid_mesh(60, 10, 12, 2), Material{40.0, 0.45, 10.0});
    Rng rng(11);
    const double step = 1e-6 * 100.0;  // 1e-6 of the characteristic length
    for (int trial = 0; trial < 10; ++trial) {
        VectorXd q = fem.rest() + random_perturbation(fem.mesh(), rng, 0.5);
        VectorXd analytic = fem.internal_forces(q);
        VectorXd numeric = energy_gradient_fd(fem, q, step);
        CHECK((analytic - numeric).norm() < 1e-6 * numeric.norm());
    }
}

TEST_CASE("corotational objectivity: rotated configurations give rotated forces") {
    FemSystem fem(make_grid_mesh(60, 10, 12, 2), Material{40.0, 0.45, 10.0});
    Rng rng(13);
    VectorXd q = fem.rest() + random_perturbation(fem.mesh(), rng, 0.8);
    VectorXd f = fem.internal_forces(q);
    for (double angle : {0.3, -1.1, 2.4}) {
        VectorXd q_rot = rotate_configuration(q, angle, Point2(30, 5));
        VectorXd f_rot = fem.internal_forces(q_rot);
        Eigen::Rotation2Dd rot(angle);
        VectorXd expected(f.size());
        for (int v = 0; v < f.size() / 2; ++v)
            expected.segment<2>(2 * v) = rot * Eigen::Vector2d(f.segment<2>(2 * v));
        CHECK((f_rot - expected).norm() < 1e-8 * f.norm());
    }
}

TEST_CASE("tangent stiffness is the exact force Jacobian") {
    FemSystem fem(make_grid_mesh(40, 10, 8, 2), Material{40.0, 0.45, 10.0});
    Rng rng(17);
    VectorXd q = fem.rest() + random_perturbation(fem.mesh(), rng, 0.6);

    // Build the unprojected Jacobian columnwise by central differences and a
    // projected one for comparison; fixed rows/cols are identity either way.
    SparseMatrixd k = fem.tangent_stiffness(q);
    const double h = 1e-5 * 40.0;
    MatrixXd k_fd = MatrixXd::Zero(q.size(), q.size());
    VectorXd probe = q;
    for (int d = 0; d < q.size(); ++d) {
        probe(d) = q(d) + h;
        VectorXd hi = fem.internal_forces(probe);
        probe(d) = q(d) - h;
        VectorXd lo = fem.internal_forces(probe);
        probe(d) = q(d);
        k_fd.col(d) = (hi - lo) / (2 * h);
    }
    for (int d = 0; d < q.size(); ++d) {
        if (!fem.fixed_dof()[std::size_t(d)]) continue;
        k_fd.row(d).setZero();
        k_fd.col(d).setZero();
        k_fd(d, d) = 1.0;
    }
    MatrixXd dense = MatrixXd(k);
    CHECK((dense - k_fd).norm() < 1e-6 * dense.norm());

    SUBCASE("symmetry") {
        CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() <
              1e-8 * dense.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("tangent stiffness leaves a quadratic Taylor remainder") {
    FemSystem fem(make_grid_mesh(40, 10, 8, 2), Material{40.0, 0.45, 10.0});
    Rng rng(19);
    VectorXd q = fem.rest() + random_perturbation(fem.mesh(), rng, 0.5);
    SparseMatrixd k = fem.tangent_stiffness(q);
    VectorXd f0 = fem.internal_forces(q);
    VectorXd direction = random_perturbation(fem.mesh(), rng, 1.0).normalized();

    auto remainder = [&](double h) {
        VectorXd dq = h * direction;
        // Compare on the free DOFs; the projected tangent carries identity
        // rows at the clamp while the raw forces include reactions there.
        return fem.project_loads(fem.internal_forces(q + dq) - f0 - k * dq).norm();
    };
    double r1 = remainder(0.04), r2 = remainder(0.02), r3 = remainder(0.01);
    CHECK(r2 < 0.30 * r1);
    CHECK(r3 < 0.30 * r2);
}

TEST_CASE("projected tangent is positive definite at rest") {
    FemSystem fem(make_grid_mesh(120, 10, 24, 2), Material{40.0, 0.45, 10.0});
    Eigen::SimplicialLLT<SparseMatrixd> llt(fem.tangent_stiffness(fem.rest()));
    CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("quasi-static step leaves an equilibrium untouched") {
    FemSystem fem(make_grid_mesh(120, 10, 24, 2), Material{40.0, 0.45, 10.0});
    SystemState state = SystemState::rest(fem.mesh());
    SystemState next = fem.quasi_static_step(state, VectorXd::Zero(fem.mesh().dof_count()),
                                             MatrixXd(0, fem.mesh().dof_count()), VectorXd());
    CHECK((next.q - state.q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cantilever tip deflection matches the slender-beam formula") {
    // 100 x 4 mm strip, fine grid; tip force in the linear regime. The beam
    // prediction is F L^3 / (3 E I) with I = t h^3 / 12 (zero Poisson ratio,
    // so plane strain and plane stress coincide).
    const double length = 100.0, height = 4.0, thickness = 5.0, modulus = 200.0;
    TriMesh mesh = make_grid_mesh(length, height, 300, 12);
    FemSystem fem(mesh, Material{modulus, 0.0, thickness});

    const double inertia = thickness * height * height * height / 12.0;
    const double force = 0.016;  // N, deflection about 1 mm
    const double predicted = force * length * length * length / (3.0 * modulus * inertia);

    // Spread the load over the tip edge nodes.
    VectorXd loads = VectorXd::Zero(mesh.dof_count());
    std::vector<int> tip_nodes;
    for (int v = 0; v < mesh.vertex_count(); ++v)
        if (mesh.vertices[std::size_t(v)].x() == length) tip_nodes.push_back(v);
    for (int v : tip_nodes) loads(2 * v + 1) = force / double(tip_nodes.size());

    SystemState state = SystemState::rest(mesh);
    SystemState next =
        fem.quasi_static_step(state, loads, MatrixXd(0, mesh.dof_count()), VectorXd());

    int tip_mid = -1;
    for (int v : tip_nodes)
        if (mesh.vertices[std::size_t(v)].y() == height / 2) tip_mid = v;
    REQUIRE(tip_mid >= 0);
    double deflection = next.q(2 * tip_mid + 1) - state.q(2 * tip_mid + 1);
    CHECK(std::abs(deflection - predicted) <= 0.05 * predicted);
}

TEST_CASE("loading and unloading returns to rest") {
    TriMesh mesh = make_grid_mesh(120, 10, 24, 2);
    FemSystem fem(mesh, Material{40.0, 0.45, 10.0});
    VectorXd loads = VectorXd::Zero(mesh.dof_count());
    int tip = -1;
    for (int v = 0; v < mesh.vertex_count(); ++v)
        if (mesh.vertices[std::size_t(v)].x() == 120.0 && mesh.vertices[std::size_t(v)].y() == 5.0)
            tip = v;
    REQUIRE(tip >= 0);
    loads(2 * tip + 1) = 1.5;

    SystemState state = SystemState::rest(mesh);
    SystemState loaded = fem.quasi_static_step(state, loads, MatrixXd(0, mesh.dof_count()), VectorXd());
    CHECK((loaded.q - state.q).cwiseAbs().maxCoeff() > 1.0);  // visibly deformed
    SystemState unloaded = fem.quasi_static_step(loaded, VectorXd::Zero(mesh.dof_count()),
                                                 MatrixXd(0, mesh.dof_count()), VectorXd());
    CHECK((unloaded.q - state.q).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fixed degrees of freedom never move") {
    TriMesh mesh = make_grid_mesh(120, 10, 24, 2);
    FemSystem fem(mesh, Material{40.0, 0.45, 10.0});
    VectorXd loads = VectorXd::Zero(mesh.dof_count());
    for (int v = 0; v < mesh.vertex_count(); ++v) loads(2 * v + 1) = 0.01;
    SystemState state = SystemState::rest(mesh);
    SystemState next = fem.quasi_static_step(state, fem.project_loads(loads),
                                             MatrixXd(0, mesh.dof_count()), VectorXd());
    for (int v : mesh.fixed_vertices) {
        CHECK(next.q(2 * v) == state.q(2 * v));
        CHECK(next.q(2 * v + 1) == state.q(2 * v + 1));
    }
}

TEST_CASE("a converged step does not gain energy beyond the load's work") {
    TriMesh mesh = make_grid_mesh(120, 10, 24, 2);
    FemSystem fem(mesh, Material{40.0, 0.45, 10.0});
    VectorXd loads = VectorXd::Zero(mesh.dof_count());
    int tip = -1;
    for (int v = 0; v < mesh.vertex_count(); ++v)
        if (mesh.vertices[std::size_t(v)].x() == 120.0 && mesh.vertices[std::size_t(v)].y() == 5.0)
            tip = v;
    loads(2 * tip + 1) = 1.0;
    loads = fem.project_loads(loads);

    SystemState state = SystemState::rest(mesh);
    double e0 = fem.elastic_energy(state.q);
    SystemState next = fem.quasi_static_step(state, loads, MatrixXd(0, mesh.dof_count()), VectorXd());
    double e1 = fem.elastic_energy(next.q);
    double work = loads.dot(next.q - state.q);
    CHECK(e1 <= e0 + work + 1e-8 * std::max(1.0, std::abs(e0) + std::abs(work)));
}

TEST_CASE("non-convergence is reported") {
    TriMesh mesh = make_grid_mesh(120, 10, 24, 2);
    FemSystem fem(mesh, Material{40.0, 0.45, 10.0});
    VectorXd loads = VectorXd::Zero(mesh.dof_count());
    int tip = -1;
    for (int v = 0; v < mesh.vertex_count(); ++v)
        if (mesh.vertices[std::size_t(v)].x() == 120.0 && mesh.vertices[std::size_t(v)].y() == 5.0)
            tip = v;
    loads(2 * tip + 1) = 1.0;
    StepOptions strict;
    strict.max_iterations = 1;
    strict.tolerance_n = 1e-14;
    CHECK_THROWS_AS(fem.quasi_static_step(SystemState::rest(mesh), fem.project_loads(loads),
                                          MatrixXd(0, mesh.dof_count()), VectorXd(), strict),
                    NonConvergence);
}

}  // TEST_SUITE
