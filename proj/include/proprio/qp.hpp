#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "proprio/core.hpp"

namespace proprio {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct QpBounds {
    double lo = -50.0;
    double hi = 50.0;
};

/// Box-constrained least squares with pinned variables:
///   minimize ||w x - target||^2 + ridge ||x||^2
///   subject to x_i = v_i for pinned i, lo_i <= x_i <= hi_i otherwise.
struct QpProblem {
    MatrixXd w;
    VectorXd target;
    std::vector<std::pair<int, double>> equalities;  // variable index -> pinned value
    std::vector<QpBounds> bounds;                    // one per column of w
    double ridge = 1e-9;
};

struct QpSolution {
    VectorXd delta_lambda;
    double objective = 0.0;  // ||w x - target||^2, ridge excluded
    std::vector<int> active_set;  // variables held at a bound
    int iterations = 0;
    double kkt_residual = 0.0;
    bool ill_conditioned = false;      // reduced normal-matrix condition above 1e12
    double condition_estimate = 0.0;
};

inline void validate_qp(const QpProblem& p) {
    const int n = int(p.w.cols());
    if (p.target.size() != p.w.rows()) throw ConfigError("qp target size does not match w rows");
    if (int(p.bounds.size()) != n) throw ConfigError("qp bounds size does not match w columns");
    if (!(p.ridge >= 0)) throw ConfigError("qp ridge must be non-negative");
    for (const auto& b : p.bounds)
        if (!(b.lo <= b.hi)) throw ConfigError("qp bound has lo > hi");
    std::vector<bool> seen(std::size_t(n), false);
    for (const auto& [idx, value] : p.equalities) {
        if (idx < 0 || idx >= n) throw ConfigError("qp equality index out of range");
        if (seen[std::size_t(idx)]) throw ConfigError("qp equality index repeated");
        seen[std::size_t(idx)] = true;
        if (value < p.bounds[std::size_t(idx)].lo || value > p.bounds[std::size_t(idx)].hi)
            throw ConfigError("qp equality value outside bounds");
    }
}

/// Primal active-set solver. Pinned variables are eliminated up front; free
/// variables iterate between equality-constrained solves of the ridge normal
/// equations and single bound additions/releases. Deterministic: ties pick
/// the lowest variable index.
inline QpSolution solve_qp(const QpProblem& p) {
    validate_qp(p);
    const int n = int(p.w.cols());

    QpSolution sol;
    sol.delta_lambda = VectorXd::Zero(n);
    if (n == 0) {
        sol.objective = p.target.squaredNorm();
        return sol;
    }

    MatrixXd g = p.w.transpose() * p.w;
    g.diagonal().array() += p.ridge;
    VectorXd c = p.w.transpose() * p.target;

    enum class State { free, pinned, at_lo, at_hi };
    std::vector<State> state(std::size_t(n), State::free);
    VectorXd& x = sol.delta_lambda;
    for (const auto& [idx, value] : p.equalities) {
        state[std::size_t(idx)] = State::pinned;
        x(idx) = value;
    }
    for (int i = 0; i < n; ++i) {
        if (state[std::size_t(i)] == State::pinned) continue;
        const auto& b = p.bounds[std::size_t(i)];
        if (0.0 < b.lo) {
            x(i) = b.lo;
            state[std::size_t(i)] = State::at_lo;
        } else if (0.0 > b.hi) {
            x(i) = b.hi;
            state[std::size_t(i)] = State::at_hi;
        }
    }

    const double scale = std::max({1.0, c.lpNorm<Eigen::Infinity>(),
                                   g.diagonal().lpNorm<Eigen::Infinity>()});
    const double release_tol = 1e-12 * scale;
    const int max_iterations = 100 * std::max(1, n);

    auto solve_free = [&](const std::vector<int>& free_idx) {
        const int m = int(free_idx.size());
        MatrixXd gff(m, m);
        VectorXd rhs(m);
        for (int a = 0; a < m; ++a) {
            rhs(a) = c(free_idx[std::size_t(a)]);
            for (int b = 0; b < m; ++b)
                gff(a, b) = g(free_idx[std::size_t(a)], free_idx[std::size_t(b)]);
        }
        for (int i = 0; i < n; ++i) {
            if (state[std::size_t(i)] == State::free) continue;
            if (x(i) == 0.0) continue;
            for (int a = 0; a < m; ++a) rhs(a) -= g(free_idx[std::size_t(a)], i) * x(i);
        }
        Eigen::LDLT<MatrixXd> ldlt(gff);
        VectorXd d = ldlt.vectorD().cwiseAbs();
        double cond = d.size() ? d.maxCoeff() / std::max(d.minCoeff(), 1e-300) : 1.0;
        sol.condition_estimate = std::max(sol.condition_estimate, cond);
        if (cond > 1e12) sol.ill_conditioned = true;
        return VectorXd(ldlt.solve(rhs));
    };

    bool done = false;
    while (!done) {
        if (sol.iterations++ > max_iterations)
            throw NonConvergence("qp active-set iteration limit exceeded");

        std::vector<int> free_idx;
        for (int i = 0; i < n; ++i)
            if (state[std::size_t(i)] == State::free) free_idx.push_back(i);

        if (!free_idx.empty()) {
            VectorXd target_x = solve_free(free_idx);
            // Step from the current point toward the subproblem optimum,
            // stopping at the first bound hit.
            double beta = 1.0;
            int blocker = -1;
            State blocker_state = State::free;
            for (std::size_t a = 0; a < free_idx.size(); ++a) {
                int i = free_idx[a];
                double step = target_x(int(a)) - x(i);
                const auto& b = p.bounds[std::size_t(i)];
                if (step > 0 && target_x(int(a)) > b.hi) {
                    double bi = (b.hi - x(i)) / step;
                    if (bi < beta) {
                        beta = bi;
                        blocker = i;
                        blocker_state = State::at_hi;
                    }
                } else if (step < 0 && target_x(int(a)) < b.lo) {
                    double bi = (b.lo - x(i)) / step;
                    if (bi < beta) {
                        beta = bi;
                        blocker = i;
                        blocker_state = State::at_lo;
                    }
                }
            }
            if (blocker >= 0) {
                for (std::size_t a = 0; a < free_idx.size(); ++a) {
                    int i = free_idx[a];
                    x(i) += beta * (target_x(int(a)) - x(i));
                }
                x(blocker) = blocker_state == State::at_hi ? p.bounds[std::size_t(blocker)].hi
                                                           : p.bounds[std::size_t(blocker)].lo;
                state[std::size_t(blocker)] = blocker_state;
                continue;
            }
            for (std::size_t a = 0; a < free_idx.size(); ++a) x(free_idx[a]) = target_x(int(a));
        }

        // Optimal over the current working set; release the bound with the
        // most negative multiplier, if any.
        VectorXd grad = g * x - c;
        int worst = -1;
        double worst_violation = release_tol;
        for (int i = 0; i < n; ++i) {
            double violation = 0.0;
            if (state[std::size_t(i)] == State::at_lo) violation = -grad(i);
            else if (state[std::size_t(i)] == State::at_hi) violation = grad(i);
            if (violation > worst_violation) {
                worst_violation = violation;
                worst = i;
            }
        }
        if (worst >= 0) {
            state[std::size_t(worst)] = State::free;
            continue;
        }
        done = true;
    }

    VectorXd grad = g * x - c;
    double kkt = 0.0;
    for (int i = 0; i < n; ++i) {
        switch (state[std::size_t(i)]) {
            case State::free: kkt = std::max(kkt, std::abs(grad(i))); break;
            case State::at_lo: kkt = std::max(kkt, std::max(0.0, -grad(i))); break;
            case State::at_hi: kkt = std::max(kkt, std::max(0.0, grad(i))); break;
            case State::pinned: break;
        }
        if (state[std::size_t(i)] != State::pinned) {
            kkt = std::max(kkt, std::max(0.0, p.bounds[std::size_t(i)].lo - x(i)));
            kkt = std::max(kkt, std::max(0.0, x(i) - p.bounds[std::size_t(i)].hi));
        }
        if (state[std::size_t(i)] == State::at_lo || state[std::size_t(i)] == State::at_hi)
            sol.active_set.push_back(i);
    }
    sol.kkt_residual = kkt;
    sol.objective = (p.w * x - p.target).squaredNorm();
    return sol;
}

}  // namespace proprio
