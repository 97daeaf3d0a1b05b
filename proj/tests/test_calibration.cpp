#include <doctest.h>

#include "proprio/calibration.hpp"
#include "proprio/core.hpp"
#include "proprio/pipeline.hpp"
#include "proprio/scenario.hpp"

using namespace proprio;

namespace {

Scenario small_finger() {
    Scenario s = make_finger_scenario();
    s.cols = 14;
    s.chamber_col_begin = 2;
    s.chamber_col_end = 12;
    s.cable_point_count = 7;
    s.marker_count = 5;
    s.sensorized_count = 5;
    s.tap_count = 5;
    return s;
}

}  // namespace

TEST_SUITE("calibration") {

TEST_CASE("golden section finds an interior quadratic minimum") {
    std::vector<std::pair<double, double>> trace;
    auto [x, f] = golden_section_minimize([](double t) { return (t - 2.0) * (t - 2.0) + 1.0; },
                                          0.0, 5.0, 0.005, &trace);
    CHECK(x == doctest::Approx(2.0).epsilon(0.02));
    CHECK(f == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(trace.size() > 8);
    for (const auto& [param, value] : trace) {
        CHECK(param >= 0.0);
        CHECK(param <= 5.0);
    }
}

TEST_CASE("monotone objectives are reported, not returned") {
    CHECK_THROWS_AS(golden_section_minimize([](double t) { return t; }, 0.0, 1.0, 0.005),
                    NoMinimumInInterval);
    CHECK_THROWS_AS(golden_section_minimize([](double t) { return -t; }, 0.0, 1.0, 0.005),
                    NoMinimumInInterval);
    CHECK_THROWS_AS(golden_section_minimize([](double) { return 3.5; }, 0.0, 1.0, 0.005),
                    NoMinimumInInterval);
}

TEST_CASE("scaling the objective does not move the argmin") {
    auto base = golden_section_minimize(
        [](double t) { return (t - 1.3) * (t - 1.3); }, 0.0, 4.0, 0.005);
    auto scaled = golden_section_minimize(
        [](double t) { return 25.0 * (t - 1.3) * (t - 1.3); }, 0.0, 4.0, 0.005);
    CHECK(base.first == scaled.first);
}

TEST_CASE("the modulus is recovered from a synthetic pressure sweep") {
    Scenario truth = small_finger();
    truth.young_modulus = 1.37;
    BuiltScenario built_truth = build_scenario(truth);
    PressureSweepReference ref =
        simulate_pressure_sweep(built_truth, {0.5, 1.0, 1.5, 2.0});

    CalibrationResult result = identify_young_modulus(truth, ref, 0.5, 3.0);
    CHECK(result.young_modulus == doctest::Approx(1.37).epsilon(0.05));
    CHECK(result.trace.size() > 5);

    SUBCASE("objective vanishes at the true modulus") {
        double total = 0.0;
        for (std::size_t level = 0; level < ref.pressures_kpa.size(); ++level) {
            MatrixXd markers = markers_at_pressure(built_truth, ref.pressures_kpa[level]);
            total += (markers - ref.marker_positions[level]).cwiseAbs().maxCoeff();
        }
        CHECK(total < 1e-6);
    }
}

TEST_CASE("an interval excluding the optimum is reported") {
    Scenario truth = small_finger();
    truth.young_modulus = 1.37;
    PressureSweepReference ref =
        simulate_pressure_sweep(build_scenario(truth), {0.5, 1.0, 1.5, 2.0});
    CHECK_THROWS_AS(identify_young_modulus(truth, ref, 2.2, 3.5), NoMinimumInInterval);
}

TEST_CASE("sweep references survive a file round trip") {
    Scenario truth = small_finger();
    PressureSweepReference ref = simulate_pressure_sweep(build_scenario(truth), {0.5, 1.0, 1.5});
    std::string path = "test_sweep_tmp.json";
    write_sweep_reference(path, ref);
    PressureSweepReference back = read_sweep_reference(path);
    REQUIRE(back.pressures_kpa == ref.pressures_kpa);
    for (std::size_t i = 0; i < ref.marker_positions.size(); ++i)
        CHECK((back.marker_positions[i] - ref.marker_positions[i]).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("scaling calibration returns unity without model mismatch") {
    Scenario scenario = small_finger();
    scenario.schedule = finger_test_schedule(1.5, 2.5, 4.0);
    BuiltScenario built = build_scenario(scenario);
    Recording validation = run_forward(built);

    CalibrationResult result = calibrate_scaling_factor(scenario, validation, 0.7, 1.6);
    CHECK(result.scaling_factor == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("an unexcited validation trace is flagged as degenerate") {
    Scenario scenario = small_finger();
    scenario.schedule = ScheduleSpec{};  // keyframes, no keys: rest frames only
    scenario.schedule.duration_s = 0.5;
    scenario.noise_std_ohm = 0.0;
    BuiltScenario built = build_scenario(scenario);
    Recording validation = run_forward(built);
    CHECK_THROWS_AS(calibrate_scaling_factor(scenario, validation, 0.7, 1.6),
                    NoMinimumInInterval);
}

}  // TEST_SUITE
