#include <doctest.h>

#include "proprio/core.hpp"
#include "proprio/qp.hpp"

using namespace proprio;

namespace {

double qp_objective(const QpProblem& p, const VectorXd& x) {
    return (p.w * x - p.target).squaredNorm() + p.ridge * x.squaredNorm();
}

/// Zooming grid search: refine a 21-point grid per free dimension around the
/// incumbent until the step is below 1e-4 of the box width. Independent of
/// the active-set path.
double grid_search_objective(const QpProblem& p) {
    const int n = int(p.w.cols());
    std::vector<bool> pinned(std::size_t(n), false);
    VectorXd x = VectorXd::Zero(n);
    for (const auto& [idx, value] : p.equalities) {
        pinned[std::size_t(idx)] = true;
        x(idx) = value;
    }
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i)
        if (!pinned[std::size_t(i)]) free_idx.push_back(i);

    std::vector<double> lo, hi;
    for (int i : free_idx) {
        lo.push_back(p.bounds[std::size_t(i)].lo);
        hi.push_back(p.bounds[std::size_t(i)].hi);
        x(i) = 0.5 * (lo.back() + hi.back());
    }
    const int points = 21;
    double best = qp_objective(p, x);
    for (int round = 0; round < 6; ++round) {
        VectorXd best_x = x;
        std::vector<int> counter(free_idx.size(), 0);
        bool carry = false;
        while (!carry) {
            VectorXd probe = x;
            for (std::size_t d = 0; d < free_idx.size(); ++d)
                probe(free_idx[d]) =
                    lo[d] + (hi[d] - lo[d]) * double(counter[d]) / double(points - 1);
            double value = qp_objective(p, probe);
            if (value < best) {
                best = value;
                best_x = probe;
            }
            carry = true;
            for (std::size_t d = 0; d < free_idx.size() && carry; ++d) {
                if (++counter[d] < points) carry = false;
                else counter[d] = 0;
            }
            if (free_idx.empty()) break;
        }
        x = best_x;
        // Zoom around the incumbent.
        for (std::size_t d = 0; d < free_idx.size(); ++d) {
            double step = (hi[d] - lo[d]) / double(points - 1);
            double c = x(free_idx[d]);
            lo[d] = std::max(p.bounds[std::size_t(free_idx[d])].lo, c - 2 * step);
            hi[d] = std::min(p.bounds[std::size_t(free_idx[d])].hi, c + 2 * step);
        }
    }
    return best;
}

QpProblem random_problem(Rng& rng, bool with_equality) {
    const int n = 1 + int(rng.index(3));
    const int m = n + int(rng.index(3));
    QpProblem p;
    p.w.resize(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) p.w(i, j) = rng.uniform(-2, 2);
    p.target.resize(m);
    for (int i = 0; i < m; ++i) p.target(i) = rng.uniform(-2, 2);
    for (int j = 0; j < n; ++j)
        p.bounds.push_back({rng.uniform(-1.5, -0.2), rng.uniform(0.2, 1.5)});
    if (with_equality && n > 1) {
        int idx = int(rng.index(std::size_t(n)));
        p.equalities.emplace_back(
            idx, rng.uniform(p.bounds[std::size_t(idx)].lo, p.bounds[std::size_t(idx)].hi));
    }
    return p;
}

}  // namespace

TEST_SUITE("qp") {

TEST_CASE("zero target gives the zero solution") {
    QpProblem p;
    p.w = MatrixXd::Identity(3, 3);
    p.target = VectorXd::Zero(3);
    p.bounds = {{-1, 1}, {-1, 1}, {-1, 1}};
    QpSolution s = solve_qp(p);
    CHECK(s.delta_lambda.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.objective == 0.0);
    CHECK(s.active_set.empty());
}

TEST_CASE("scalar clamped least squares") {
    // Hand solution: unconstrained 3/2, clamped to the upper bound 1, leaving
    // objective (2 - 3)^2 = 1.
    QpProblem p;
    p.w = MatrixXd::Constant(1, 1, 2.0);
    p.target = VectorXd::Constant(1, 3.0);
    p.bounds = {{-1, 1}};
    QpSolution s = solve_qp(p);
    CHECK(s.delta_lambda(0) == 1.0);
    CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-12));
    REQUIRE(s.active_set.size() == 1);
    CHECK(s.active_set[0] == 0);
}

TEST_CASE("active-set objective matches a refined grid search") {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        QpProblem p = random_problem(rng, trial % 2 == 0);
        QpSolution s = solve_qp(p);
        double reference = grid_search_objective(p);
        double mine = qp_objective(p, s.delta_lambda);
        CHECK(mine <= reference + 1e-6);
        CHECK(s.kkt_residual <= 1e-8);
    }
}

TEST_CASE("equality rows match their prescribed values bitwise") {
    Rng rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        QpProblem p = random_problem(rng, true);
        if (p.equalities.empty()) continue;
        QpSolution s = solve_qp(p);
        for (const auto& [idx, value] : p.equalities) CHECK(s.delta_lambda(idx) == value);
    }
}

TEST_CASE("complementarity: at a bound or zero multiplier") {
    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        QpProblem p = random_problem(rng, false);
        QpSolution s = solve_qp(p);
        MatrixXd g = p.w.transpose() * p.w;
        g.diagonal().array() += p.ridge;
        VectorXd grad = g * s.delta_lambda - p.w.transpose() * p.target;
        for (int i = 0; i < s.delta_lambda.size(); ++i) {
            bool at_bound = std::abs(s.delta_lambda(i) - p.bounds[std::size_t(i)].lo) < 1e-10 ||
                            std::abs(s.delta_lambda(i) - p.bounds[std::size_t(i)].hi) < 1e-10;
            bool zero_multiplier = std::abs(grad(i)) <= 1e-8;
            CHECK((at_bound || zero_multiplier));
        }
    }
}

TEST_CASE("a box containing the unconstrained minimizer is inactive") {
    Rng rng(77);
    QpProblem p;
    p.w.resize(5, 3);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) p.w(i, j) = rng.uniform(-1, 1);
    p.target.resize(5);
    for (int i = 0; i < 5; ++i) p.target(i) = rng.uniform(-1, 1);
    p.bounds = {{-100, 100}, {-100, 100}, {-100, 100}};

    MatrixXd g = p.w.transpose() * p.w;
    g.diagonal().array() += p.ridge;
    VectorXd unconstrained = g.ldlt().solve(p.w.transpose() * p.target);
    double reference = (p.w * unconstrained - p.target).squaredNorm();

    QpSolution s = solve_qp(p);
    CHECK(s.active_set.empty());
    CHECK(std::abs(s.objective - reference) < 1e-8);
}

TEST_CASE("scaling the columns rescales the efforts reciprocally") {
    Rng rng(99);
    QpProblem p;
    p.w.resize(4, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) p.w(i, j) = rng.uniform(-1.5, 1.5);
    p.target.resize(4);
    for (int i = 0; i < 4; ++i) p.target(i) = rng.uniform(-1, 1);
    p.bounds = {{-0.8, 0.5}, {-0.4, 0.9}, {-0.6, 0.7}};
    p.ridge = 0.0;

    const double alpha = 7.0;
    QpProblem scaled = p;
    scaled.w *= alpha;
    for (auto& b : scaled.bounds) {
        b.lo /= alpha;
        b.hi /= alpha;
    }
    QpSolution base = solve_qp(p);
    QpSolution rescaled = solve_qp(scaled);
    CHECK((alpha * rescaled.delta_lambda - base.delta_lambda).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("near-dependent columns are flagged as ill-conditioned") {
    QpProblem p;
    p.w.resize(2, 2);
    p.w << 1.0, 1.0, 1.0, 1.0 + 1e-14;
    p.target = VectorXd::Ones(2);
    p.bounds = {{-10, 10}, {-10, 10}};
    p.ridge = 1e-15;
    QpSolution s = solve_qp(p);
    CHECK(s.ill_conditioned);
    CHECK(s.delta_lambda.allFinite());
}

TEST_CASE("solutions are deterministic") {
    Rng rng(123);
    QpProblem p = random_problem(rng, true);
    QpSolution a = solve_qp(p);
    QpSolution b = solve_qp(p);
    REQUIRE(a.delta_lambda.size() == b.delta_lambda.size());
    for (int i = 0; i < a.delta_lambda.size(); ++i) CHECK(a.delta_lambda(i) == b.delta_lambda(i));
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("problem validation") {
    QpProblem p;
    p.w = MatrixXd::Identity(2, 2);
    p.target = VectorXd::Zero(2);
    p.bounds = {{1, -1}, {-1, 1}};
    CHECK_THROWS_AS(solve_qp(p), ConfigError);
    p.bounds = {{-1, 1}, {-1, 1}};
    p.equalities = {{0, 5.0}};
    CHECK_THROWS_AS(solve_qp(p), ConfigError);
    p.equalities = {{7, 0.0}};
    CHECK_THROWS_AS(solve_qp(p), ConfigError);
}

TEST_CASE("empty problems are legal") {
    QpProblem p;
    p.w = MatrixXd(3, 0);
    p.target = VectorXd::Ones(3);
    QpSolution s = solve_qp(p);
    CHECK(s.delta_lambda.size() == 0);
    CHECK(s.objective == doctest::Approx(3.0));
}

}  // TEST_SUITE
