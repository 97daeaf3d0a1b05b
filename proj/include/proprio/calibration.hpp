#pragma once

#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "proprio/core.hpp"
#include "proprio/pipeline.hpp"
#include "proprio/scenario.hpp"

namespace proprio {

struct CalibrationResult {
    double young_modulus = 0.0;   // N/mm^2
    double scaling_factor = 1.0;
    double residual = 0.0;
    std::vector<std::pair<double, double>> trace;  // (parameter, objective) evaluations
};

/// Derivative-free scalar minimization over [lo, hi]. The bracket shrinks by
/// the golden ratio until its width falls below rel_tol of the initial
/// interval. Throws NoMinimumInInterval when the objective is monotone
/// across the interval (minimum at an endpoint) or flat.
inline std::pair<double, double> golden_section_minimize(
    const std::function<double(double)>& objective, double lo, double hi, double rel_tol,
    std::vector<std::pair<double, double>>* trace = nullptr) {
    if (!(hi > lo)) throw ConfigError("search interval is empty");
    if (!(rel_tol > 0)) throw ConfigError("search tolerance must be positive");

    auto eval = [&](double x) {
        double f = objective(x);
        if (trace) trace->emplace_back(x, f);
        return f;
    };

    const double inv_phi = 0.6180339887498949;
    const double width0 = hi - lo;
    double f_lo = eval(lo), f_hi = eval(hi);

    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double f_c = eval(c), f_d = eval(d);
    double f_best_interior = std::min(f_c, f_d);
    while (b - a > rel_tol * width0) {
        if (f_c < f_d) {
            b = d;
            d = c;
            f_d = f_c;
            c = b - inv_phi * (b - a);
            f_c = eval(c);
        } else {
            a = c;
            c = d;
            f_c = f_d;
            d = a + inv_phi * (b - a);
            f_d = eval(d);
        }
        f_best_interior = std::min(f_best_interior, std::min(f_c, f_d));
    }
    double x_star = f_c < f_d ? c : d;
    double f_star = std::min(f_c, f_d);

    double spread = std::max(f_lo, f_hi) - std::min({f_lo, f_hi, f_best_interior});
    if (spread <= 1e-12 * std::max(1.0, std::abs(f_lo)))
        throw NoMinimumInInterval("objective is flat across the interval");
    if (f_lo <= f_star)
        throw NoMinimumInInterval("objective is monotone; minimum at the lower endpoint " +
                                  format_double(lo));
    if (f_hi <= f_star)
        throw NoMinimumInInterval("objective is monotone; minimum at the upper endpoint " +
                                  format_double(hi));
    return {x_star, f_star};
}

/// Marker positions observed at a sweep of steady chamber pressures.
struct PressureSweepReference {
    std::vector<double> pressures_kpa;
    std::vector<MatrixXd> marker_positions;  // per level: marker_count x 2, mm
};

/// Steady-state marker positions of the scenario's model at one chamber
/// pressure, ramped in a few substeps for robustness.
inline MatrixXd markers_at_pressure(const BuiltScenario& built, double pressure_kpa,
                                    int substeps = 4) {
    InverseModel model = built.make_model();
    const int chambers = built.chamber_count();
    VectorXd prev = VectorXd::Zero(chambers);
    for (int step = 1; step <= substeps; ++step) {
        VectorXd target = VectorXd::Constant(
            chambers, built.pressure_to_internal(pressure_kpa) * step / substeps);
        model.advance_known(target - prev, VectorXd::Zero(built.site_count()));
        prev = target;
    }
    MatrixXd markers(built.markers.point_count(), 2);
    for (int m = 0; m < built.markers.point_count(); ++m)
        markers.row(m) = centerline_position(built.mesh, built.markers, m, model.state().q);
    return markers;
}

/// Generate a sweep reference from a scenario treated as ground truth.
inline PressureSweepReference simulate_pressure_sweep(const BuiltScenario& built,
                                                      const std::vector<double>& pressures_kpa) {
    PressureSweepReference ref;
    ref.pressures_kpa = pressures_kpa;
    for (double p : pressures_kpa) ref.marker_positions.push_back(markers_at_pressure(built, p));
    return ref;
}

/// Fit the modulus by minimizing the mean marker position error across the
/// pressure sweep with a golden-section search; tolerance 0.5 % of the
/// interval.
inline CalibrationResult identify_young_modulus(const Scenario& scenario,
                                                const PressureSweepReference& reference,
                                                double e_lo, double e_hi) {
    if (reference.pressures_kpa.size() < 3)
        throw ConfigError("modulus identification needs at least 3 pressure levels");
    if (reference.marker_positions.size() != reference.pressures_kpa.size())
        throw ConfigError("sweep reference is inconsistent");
    if (!(e_lo > 0 && e_hi > e_lo)) throw ConfigError("modulus interval must be positive");

    auto objective = [&](double young_modulus) {
        Scenario candidate = scenario;
        candidate.young_modulus = young_modulus;
        BuiltScenario built = build_scenario(candidate);
        double total = 0.0;
        long count = 0;
        for (std::size_t level = 0; level < reference.pressures_kpa.size(); ++level) {
            MatrixXd markers = markers_at_pressure(built, reference.pressures_kpa[level]);
            const MatrixXd& truth = reference.marker_positions[level];
            for (int m = 0; m < markers.rows(); ++m) {
                total += (markers.row(m) - truth.row(m)).norm();
                ++count;
            }
        }
        return total / double(count);
    };

    CalibrationResult result;
    auto [e_star, f_star] = golden_section_minimize(objective, e_lo, e_hi, 0.005, &result.trace);
    result.young_modulus = e_star;
    result.scaling_factor = scenario.scaling_factor;
    result.residual = f_star;
    return result;
}

/// Fit the joint scaling factor applied to both the modulus and the pressure
/// inputs by minimizing the mean absolute force-trace error of an exact-shape
/// replay of the validation recording.
inline CalibrationResult calibrate_scaling_factor(const Scenario& scenario,
                                                  const Recording& validation, double s_lo,
                                                  double s_hi) {
    if (validation.frame_count() < 2) throw ConfigError("validation recording is too short");
    if (!(s_lo > 0 && s_hi > s_lo)) throw ConfigError("scaling interval must be positive");

    auto objective = [&](double scale) {
        Scenario candidate = scenario;
        candidate.scaling_factor = scale;
        BuiltScenario built = build_scenario(candidate);
        ReplayResult replay = reconstruct_and_score(built, validation, nullptr);
        double total = 0.0;
        long count = 0;
        for (int k = 0; k < validation.frame_count(); ++k) {
            for (int f = 0; f < validation.forces_n.cols(); ++f) {
                total += std::abs(replay.est_forces(k, f) - validation.forces_n(k, f));
                ++count;
            }
        }
        return total / double(count);
    };

    CalibrationResult result;
    auto [s_star, f_star] = golden_section_minimize(objective, s_lo, s_hi, 0.005, &result.trace);
    result.young_modulus = scenario.young_modulus;
    result.scaling_factor = s_star;
    result.residual = f_star;
    return result;
}

inline nlohmann::json calibration_to_json(const CalibrationResult& r) {
    nlohmann::json j;
    j["version"] = 1;
    j["young_modulus_pa"] = r.young_modulus / PaToInternal;
    j["scaling_factor"] = r.scaling_factor;
    j["residual"] = r.residual;
    j["trace"] = nlohmann::json::array();
    for (const auto& [x, f] : r.trace) j["trace"].push_back({{"parameter", x}, {"objective", f}});
    return j;
}

inline void write_calibration_report(const std::string& path, const CalibrationResult& r) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write calibration report: " + path);
    out << calibration_to_json(r).dump(2) << "\n";
}

// Sweep reference file: {"pressures_kpa": [...], "markers_mm": [[x0,y0,...]
// per level]}.
inline void write_sweep_reference(const std::string& path, const PressureSweepReference& ref) {
    nlohmann::json j;
    j["version"] = 1;
    j["pressures_kpa"] = ref.pressures_kpa;
    j["markers_mm"] = nlohmann::json::array();
    for (const auto& level : ref.marker_positions) {
        std::vector<double> flat;
        for (int m = 0; m < level.rows(); ++m) {
            flat.push_back(level(m, 0));
            flat.push_back(level(m, 1));
        }
        j["markers_mm"].push_back(flat);
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write sweep reference: " + path);
    out << j.dump(2) << "\n";
}

inline PressureSweepReference read_sweep_reference(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open sweep reference: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("cannot parse sweep reference: ") + e.what());
    }
    PressureSweepReference ref;
    ref.pressures_kpa = j.at("pressures_kpa").get<std::vector<double>>();
    for (const auto& level : j.at("markers_mm")) {
        auto flat = level.get<std::vector<double>>();
        MatrixXd markers(int(flat.size() / 2), 2);
        for (int m = 0; m < markers.rows(); ++m) {
            markers(m, 0) = flat[std::size_t(2 * m)];
            markers(m, 1) = flat[std::size_t(2 * m + 1)];
        }
        ref.marker_positions.push_back(markers);
    }
    return ref;
}

}  // namespace proprio
