#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "proprio/constraints.hpp"
#include "proprio/core.hpp"
#include "proprio/fem.hpp"
#include "proprio/qp.hpp"
#include "proprio/geometry.hpp"

namespace proprio {

struct InverseOptions {
    QpBounds force_bounds{-50.0, 50.0};  // per-step external force change, N
    double ridge = 1e-9;
    double orientation_scale = 1.0;  // mm of tracking weight per radian
    int max_outer_iterations = 40;
    double effort_tolerance = 1e-7;         // stop once effort updates stall, N
    double length_tolerance_rel = 1e-7;     // relative segment-length violation
    StepOptions newton;
};

/// Per-step outcome of the effort solve.
struct StepReport {
    VectorXd force_delta;          // external-force effort change over the step
    int outer_iterations = 0;
    int qp_iterations = 0;
    double shape_residual = 0.0;   // weighted tracking residual of the last solve
    double max_length_violation_rel = 0.0;
    bool ill_conditioned = false;
    bool converged = false;
};

/// Quasi-static model with pressure, external-force and length efforts plus
/// pose effectors. Each frame searches for the effort changes that best
/// explain the observed shape change; pressure changes are pinned to their
/// known values, external forces are box-constrained unknowns, and segment
/// tensions are eliminated against the inextensibility conditions. Efforts
/// accumulate across calls, giving a time series of lambda.
class InverseModel {
public:
    InverseModel(TriMesh mesh, Material material, std::vector<PressureConstraint> pressures,
                 std::vector<ForceConstraint> forces, std::optional<LengthConstraint> cable,
                 std::vector<PoseEffector> effectors, InverseOptions options = {})
        : fem_(std::move(mesh), material),
          pressures_(std::move(pressures)),
          forces_(std::move(forces)),
          cable_(std::move(cable)),
          effectors_(std::move(effectors)),
          options_(options) {
        for (const auto& c : pressures_) validate_pressure_constraint(fem_.mesh(), c);
        pressure_count_ = int(pressures_.size());
        force_count_ = int(forces_.size());
        length_count_ = cable_ ? int(cable_->rest_lengths.size()) : 0;
        shape_dim_ = 0;
        for (const auto& e : effectors_) shape_dim_ += effector_row_count(e);
        state_ = SystemState::rest(fem_.mesh(), effort_row_count());
        dead_loads_ = VectorXd::Zero(fem_.mesh().dof_count());
    }

    const FemSystem& fem() const { return fem_; }
    const TriMesh& mesh() const { return fem_.mesh(); }
    const SystemState& state() const { return state_; }
    int pressure_count() const { return pressure_count_; }
    int force_count() const { return force_count_; }
    int length_count() const { return length_count_; }
    int shape_dim() const { return shape_dim_; }
    int effort_row_count() const { return pressure_count_ + force_count_ + length_count_; }

    /// Accumulated external-force efforts (N), one per force constraint.
    VectorXd force_lambda() const {
        return state_.lambda.segment(pressure_count_, force_count_);
    }

    /// Constant body force per node, e.g. gravity. Off by default.
    void set_dead_loads(VectorXd loads) { dead_loads_ = fem_.project_loads(std::move(loads)); }

    /// Stacked pose-effector values at the current configuration.
    VectorXd shape_values() const { return shape_values_at(state_.q); }

    VectorXd shape_values_at(const VectorXd& q) const {
        VectorXd v(shape_dim_);
        int row = 0;
        for (const auto& e : effectors_) {
            VectorXd val = effector_value(fem_.mesh(), e, q);
            v.segment(row, val.size()) = val;
            row += int(val.size());
        }
        return v;
    }

    void reset() { state_ = SystemState::rest(fem_.mesh(), effort_row_count()); }

    /// Track an observed shape change while applying a known pressure change;
    /// external forces are solved for.
    StepReport estimate_step(const VectorXd& shape_delta, const VectorXd& pressure_delta) {
        if (shape_delta.size() != shape_dim_)
            throw ShapeMismatch("shape delta size does not match effector layout");
        return run_step(&shape_delta, pressure_delta, nullptr);
    }

    /// Forward mode: apply known pressure and force changes; only segment
    /// tensions are solved for.
    StepReport advance_known(const VectorXd& pressure_delta, const VectorXd& force_delta) {
        return run_step(nullptr, pressure_delta, &force_delta);
    }

private:
    StepReport run_step(const VectorXd* shape_delta, const VectorXd& pressure_delta,
                        const VectorXd* pinned_force_delta) {
        if (pressure_delta.size() != pressure_count_)
            throw ShapeMismatch("pressure delta size does not match constraint layout");
        if (pinned_force_delta && pinned_force_delta->size() != force_count_)
            throw ShapeMismatch("force delta size does not match constraint layout");

        const TriMesh& mesh = fem_.mesh();
        StepReport report;
        report.force_delta = VectorXd::Zero(force_count_);

        VectorXd lambda = state_.lambda;
        const VectorXd lambda_entry = lambda;
        VectorXd pressure_goal =
            lambda.segment(0, pressure_count_) + pressure_delta;
        VectorXd force_goal = pinned_force_delta
                                  ? VectorXd(lambda.segment(pressure_count_, force_count_) +
                                             *pinned_force_delta)
                                  : VectorXd();

        // Absolute tracking goals; orientation entries are host-triangle
        // angles, so adding the delta is well defined.
        VectorXd shape_goal;
        VectorXd row_scale(shape_dim_);
        if (shape_delta) {
            shape_goal = shape_values_at(state_.q) + *shape_delta;
            int row = 0;
            for (const auto& e : effectors_) {
                double s = e.kind == EffectorKind::orientation ? options_.orientation_scale : 1.0;
                for (int k = 0; k < effector_row_count(e); ++k) row_scale(row++) = s;
            }
        }

        const bool solve_forces = shape_delta && force_count_ > 0;

        // Remaining distance to the goals: scaled shape gap plus absolute
        // length violations, both in mm.
        auto shape_gap = [&]() {
            return shape_delta
                       ? VectorXd((shape_goal - shape_values_at(state_.q)).cwiseProduct(row_scale))
                       : VectorXd();
        };
        auto violations = [&]() {
            VectorXd v(length_count_);
            if (cable_) {
                VectorXd current = segment_lengths(mesh, *cable_, state_.q);
                for (int k = 0; k < length_count_; ++k)
                    v(k) = cable_->rest_lengths[std::size_t(k)] - current(k);
            }
            return v;
        };
        auto merit_of = [&](const VectorXd& gap, const VectorXd& viol) {
            return (shape_delta ? gap.norm() : 0.0) + viol.norm();
        };

        // Physical gaps below this scale (mm) no longer warrant a solve.
        const double merit_floor = 1e-7;

        for (int outer = 0; outer < options_.max_outer_iterations; ++outer) {
            report.outer_iterations = outer + 1;

            VectorXd length_violation = violations();
            VectorXd tracking_target = shape_gap();

            // Remaining pinned deltas (nonzero only on the first pass).
            VectorXd pinned = VectorXd::Zero(effort_row_count());
            pinned.segment(0, pressure_count_) =
                pressure_goal - lambda.segment(0, pressure_count_);
            if (pinned_force_delta)
                pinned.segment(pressure_count_, force_count_) =
                    force_goal - lambda.segment(pressure_count_, force_count_);
            const bool pinned_round = pinned.cwiseAbs().maxCoeff() > 0.0;

            if (!pinned_round && merit_of(tracking_target, length_violation) < merit_floor) {
                report.converged = true;
                if (shape_delta) report.shape_residual = tracking_target.norm();
                break;
            }

            FemSystem::Factor factor = fem_.factorize(state_.q);
            MatrixXd h = effort_rows(state_.q);

            MatrixXd tracking_rows(shape_dim_, mesh.dof_count());
            if (shape_delta) {
                int row = 0;
                for (const auto& e : effectors_) {
                    MatrixXd er = effector_rows(mesh, e, state_.q);
                    tracking_rows.block(row, 0, er.rows(), mesh.dof_count()) = er;
                    row += int(er.rows());
                }
                tracking_rows.array().colwise() *= row_scale.array();
            }

            MatrixXd w_shape = shape_delta ? compute_compliance(factor, tracking_rows, h)
                                           : MatrixXd(0, effort_row_count());
            MatrixXd w_length =
                cable_ ? compute_compliance(factor, h.bottomRows(length_count_), h)
                       : MatrixXd(0, effort_row_count());

            // Aim for a trust fraction of the remaining gap; a full correction
            // can overshoot when the gap is large relative to the
            // linearization, so rejected trials rewind and retry smaller.
            const double merit_entry = merit_of(tracking_target, length_violation);
            const SystemState state_snapshot = state_;
            const VectorXd lambda_snapshot = lambda;
            double best_merit = std::numeric_limits<double>::infinity();
            SystemState best_state = state_;
            VectorXd best_lambda = lambda;
            double trust = 1.0;

            bool any_trial_succeeded = false;
            for (int attempt = 0; attempt < 6; ++attempt) {
                // Known inputs scale down with the trust fraction as well;
                // what remains is applied by later rounds.
                VectorXd effective_pinned = trust * pinned;
                VectorXd shape_rhs =
                    shape_delta
                        ? VectorXd(trust * tracking_target - w_shape * effective_pinned)
                        : VectorXd();
                VectorXd length_rhs =
                    trust * length_violation -
                    (cable_ ? VectorXd(w_length * effective_pinned) : VectorXd::Zero(0));

                VectorXd delta = effective_pinned;
                if (cable_ && !solve_forces) {
                    // Pure forward motion: tensions restore the segment lengths.
                    delta.segment(pressure_count_ + force_count_, length_count_) =
                        solve_length_block(w_length, length_rhs);
                } else if (solve_forces) {
                    MatrixXd w_f = w_shape.middleCols(pressure_count_, force_count_);
                    VectorXd rhs = shape_rhs;
                    MatrixXd length_solve;  // columns: [rhs | force columns]
                    if (cable_) {
                        MatrixXd packed(length_count_, 1 + force_count_);
                        packed.col(0) = length_rhs;
                        packed.rightCols(force_count_) =
                            w_length.middleCols(pressure_count_, force_count_);
                        length_solve = solve_length_block(w_length, packed);
                        MatrixXd w_el = w_shape.rightCols(length_count_);
                        rhs -= w_el * length_solve.col(0);
                        w_f -= w_el * length_solve.rightCols(force_count_);
                    }

                    QpProblem qp;
                    qp.w = w_f;
                    qp.target = rhs;
                    qp.ridge = options_.ridge;
                    VectorXd spent = lambda_snapshot.segment(pressure_count_, force_count_) -
                                     lambda_entry.segment(pressure_count_, force_count_);
                    for (int i = 0; i < force_count_; ++i)
                        qp.bounds.push_back({options_.force_bounds.lo - spent(i),
                                             options_.force_bounds.hi - spent(i)});
                    QpSolution qs = solve_qp(qp);
                    report.qp_iterations += qs.iterations;
                    report.ill_conditioned = report.ill_conditioned || qs.ill_conditioned;
                    delta.segment(pressure_count_, force_count_) = qs.delta_lambda;
                    if (cable_)
                        delta.segment(pressure_count_ + force_count_, length_count_) =
                            length_solve.col(0) -
                            length_solve.rightCols(force_count_) * qs.delta_lambda;
                }

                lambda = lambda_snapshot + delta;
                try {
                    state_ = fem_.quasi_static_step(state_snapshot, dead_loads_, h, lambda,
                                                    options_.newton);
                } catch (const Error&) {
                    state_ = state_snapshot;
                    trust *= 0.5;
                    continue;
                }
                any_trial_succeeded = true;
                double merit_after = merit_of(shape_gap(), violations());
                if (merit_after < best_merit) {
                    best_merit = merit_after;
                    best_state = state_;
                    best_lambda = lambda;
                }
                // Known inputs are applied regardless; otherwise any
                // meaningful improvement accepts the trial.
                if (pinned_round || merit_after < merit_entry * (1.0 - 1e-3) ||
                    merit_after < merit_floor)
                    break;
                trust *= 0.5;
            }
            state_ = best_state;
            lambda = best_lambda;
            if (!any_trial_succeeded) break;  // stuck; keep the last good state

            // Convergence bookkeeping on the adopted configuration.
            VectorXd final_violation = violations();
            double viol_rel = 0.0;
            if (cable_) {
                for (int k = 0; k < length_count_; ++k)
                    viol_rel = std::max(viol_rel, std::abs(final_violation(k)) /
                                                      cable_->rest_lengths[std::size_t(k)]);
            }
            report.max_length_violation_rel = viol_rel;
            if (shape_delta) report.shape_residual = shape_gap().norm();

            double unknown_step = 0.0;
            VectorXd adopted = lambda - lambda_snapshot;
            if (solve_forces)
                unknown_step = adopted.segment(pressure_count_, force_count_)
                                   .lpNorm<Eigen::Infinity>();
            if (cable_)
                unknown_step = std::max(
                    unknown_step,
                    adopted.segment(pressure_count_ + force_count_, length_count_)
                        .lpNorm<Eigen::Infinity>());
            double effort_scale = std::max(1.0, lambda.lpNorm<Eigen::Infinity>());
            bool lengths_ok = !cable_ || viol_rel < options_.length_tolerance_rel;
            bool efforts_ok = unknown_step < options_.effort_tolerance * effort_scale;
            // Inconsistent targets leave a least-squares residual no round can
            // remove; once a full round stops improving the gap, accept it.
            bool merit_stalled = best_merit > merit_entry * (1.0 - 1e-3) - 1e-12;
            bool merit_small = best_merit < merit_floor;
            if (lengths_ok && (efforts_ok || merit_small || merit_stalled ||
                               (!solve_forces && !cable_))) {
                report.converged = true;
                break;
            }
        }

        report.force_delta =
            lambda.segment(pressure_count_, force_count_) -
            lambda_entry.segment(pressure_count_, force_count_);
        return report;
    }

    /// Stacked effort rows at configuration q: pressures, forces, lengths.
    MatrixXd effort_rows(const VectorXd& q) const {
        const TriMesh& mesh = fem_.mesh();
        MatrixXd h(effort_row_count(), mesh.dof_count());
        int row = 0;
        for (const auto& c : pressures_)
            h.row(row++) = pressure_row(mesh, c, q, fem_.material().thickness);
        for (const auto& c : forces_) h.row(row++) = force_row(mesh, c);
        if (cable_) {
            h.bottomRows(length_count_) = length_rows(mesh, *cable_, q);
        }
        return h;
    }

    /// Solve the segment-tension block W_LL x = rhs with a small ridge
    /// fallback; W_LL is positive definite for distinct segments.
    MatrixXd solve_length_block(const MatrixXd& w_length, const MatrixXd& rhs) const {
        MatrixXd w_ll = w_length.rightCols(length_count_);
        MatrixXd reg = w_ll;
        reg.diagonal().array() += 1e-12 * std::max(1.0, w_ll.diagonal().maxCoeff());
        Eigen::LDLT<MatrixXd> ldlt(reg);
        if (ldlt.info() != Eigen::Success)
            throw SingularSystem("segment-tension block factorization failed");
        return ldlt.solve(rhs);
    }

    FemSystem fem_;
    std::vector<PressureConstraint> pressures_;
    std::vector<ForceConstraint> forces_;
    std::optional<LengthConstraint> cable_;
    std::vector<PoseEffector> effectors_;
    InverseOptions options_;
    int pressure_count_ = 0, force_count_ = 0, length_count_ = 0, shape_dim_ = 0;
    SystemState state_;
    VectorXd dead_loads_;
};

}  // namespace proprio
