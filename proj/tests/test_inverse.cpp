#include <doctest.h>

#include "proprio/core.hpp"
#include "proprio/inverse.hpp"
#include "proprio/pipeline.hpp"
#include "proprio/scenario.hpp"

using namespace proprio;

namespace {

Scenario small_finger() {
    Scenario s = make_finger_scenario();
    s.cols = 16;
    s.chamber_col_begin = 2;
    s.chamber_col_end = 14;
    s.cable_point_count = 8;
    s.marker_count = 6;
    s.sensorized_count = 6;
    s.tap_count = 6;
    return s;
}

}  // namespace

TEST_SUITE("inverse") {

TEST_CASE("a zero shape delta with zero pressure change is a fixed point") {
    BuiltScenario built = build_scenario(make_strip_scenario());
    InverseModel model = built.make_model();
    VectorXd q_before = model.state().q;
    StepReport report = model.estimate_step(VectorXd::Zero(model.shape_dim()), VectorXd());
    CHECK(report.force_delta.cwiseAbs().maxCoeff() == 0.0);
    CHECK((model.state().q - q_before).cwiseAbs().maxCoeff() == 0.0);
    CHECK(report.converged);
}

TEST_CASE("exact shape deltas recover a known tip force on the strip") {
    BuiltScenario built = build_scenario(make_strip_scenario());

    // Ground truth: apply 1 N at the last candidate site.
    InverseModel truth = built.make_model();
    VectorXd shape_before = truth.shape_values();
    VectorXd applied = VectorXd::Zero(truth.force_count());
    applied(truth.force_count() - 1) = 1.0;
    truth.advance_known(VectorXd(), applied);
    VectorXd shape_delta = truth.shape_values() - shape_before;

    InverseModel estimator = built.make_model();
    StepReport report = estimator.estimate_step(shape_delta, VectorXd());
    VectorXd recovered = estimator.force_lambda();
    CHECK(recovered(truth.force_count() - 1) == doctest::Approx(1.0).epsilon(0.02));
    for (int i = 0; i + 1 < recovered.size(); ++i) CHECK(std::abs(recovered(i)) < 0.02);
    CHECK(report.shape_residual < 1e-6 * built.scenario.orientation_scale_mm);
}

TEST_CASE("forces applied at a mid-span site are recovered too") {
    BuiltScenario built = build_scenario(make_strip_scenario());
    InverseModel truth = built.make_model();
    VectorXd shape_before = truth.shape_values();
    VectorXd applied = VectorXd::Zero(truth.force_count());
    applied(2) = 0.7;
    truth.advance_known(VectorXd(), applied);
    VectorXd shape_delta = truth.shape_values() - shape_before;

    InverseModel estimator = built.make_model();
    estimator.estimate_step(shape_delta, VectorXd());
    VectorXd recovered = estimator.force_lambda();
    CHECK(recovered(2) == doctest::Approx(0.7).epsilon(0.02));
}

TEST_CASE("per-step force bounds clamp the recovered efforts") {
    Scenario scenario = make_strip_scenario();
    scenario.force_lo_n = -0.25;
    scenario.force_hi_n = 0.25;
    BuiltScenario built = build_scenario(scenario);

    BuiltScenario wide = build_scenario(make_strip_scenario());
    InverseModel truth = wide.make_model();
    VectorXd shape_before = truth.shape_values();
    VectorXd applied = VectorXd::Zero(truth.force_count());
    applied(5) = 1.0;
    truth.advance_known(VectorXd(), applied);
    VectorXd shape_delta = truth.shape_values() - shape_before;

    InverseModel estimator = built.make_model();
    StepReport report = estimator.estimate_step(shape_delta, VectorXd());
    CHECK(report.force_delta.cwiseAbs().maxCoeff() <= 0.25 + 1e-12);
}

TEST_CASE("finger pressurization keeps every segment at its rest length") {
    BuiltScenario built = build_scenario(small_finger());
    InverseModel model = built.make_model();
    REQUIRE(model.length_count() > 0);

    const double target = built.pressure_to_internal(1.8);
    double prev = 0.0;
    for (int step = 1; step <= 6; ++step) {
        double now = target * step / 6.0;
        StepReport report = model.advance_known(VectorXd::Constant(1, now - prev),
                                                VectorXd::Zero(model.force_count()));
        prev = now;
        CHECK(report.max_length_violation_rel < 1e-6);
    }
    // The chamber visibly deforms the body.
    CHECK((model.state().q - model.fem().rest()).cwiseAbs().maxCoeff() > 0.5);
}

TEST_CASE("exact shape deltas recover a force on the pressurized finger") {
    BuiltScenario built = build_scenario(small_finger());

    InverseModel truth = built.make_model();
    const double pressure = built.pressure_to_internal(1.2);
    VectorXd shape_rest = truth.shape_values();
    truth.advance_known(VectorXd::Constant(1, pressure), VectorXd::Zero(1));
    VectorXd shape_pressurized = truth.shape_values();
    truth.advance_known(VectorXd::Zero(1), VectorXd::Constant(1, 2.0));
    VectorXd shape_loaded = truth.shape_values();

    InverseModel estimator = built.make_model();
    StepReport inflate = estimator.estimate_step(shape_pressurized - shape_rest,
                                                 VectorXd::Constant(1, pressure));
    CHECK(std::abs(estimator.force_lambda()(0)) < 0.05);
    CHECK(inflate.max_length_violation_rel < 1e-6);

    StepReport poke = estimator.estimate_step(shape_loaded - shape_pressurized, VectorXd::Zero(1));
    CHECK(estimator.force_lambda()(0) == doctest::Approx(2.0).epsilon(0.05));
    CHECK(poke.max_length_violation_rel < 1e-6);
}

TEST_CASE("mismatched shape deltas are rejected") {
    BuiltScenario built = build_scenario(make_strip_scenario());
    InverseModel model = built.make_model();
    CHECK_THROWS_AS(model.estimate_step(VectorXd::Zero(3), VectorXd()), ShapeMismatch);
}

}  // TEST_SUITE
