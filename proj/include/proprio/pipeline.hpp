#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "proprio/core.hpp"
#include "proprio/inverse.hpp"
#include "proprio/regressor.hpp"
#include "proprio/scenario.hpp"
#include "proprio/sensor.hpp"

namespace proprio {

/// Time series produced by a forward run: ground-truth marker positions,
/// shape-vector offsets from rest, synthetic resistances and the applied
/// efforts (in file units: kPa and N).
struct Recording {
    std::vector<double> times;
    MatrixXd markers;        // frames x 2*marker_count, absolute mm
    MatrixXd shapes;         // frames x shape_dim, offset from the rest shape
    MatrixXd resistances;    // frames x segments, ohm
    MatrixXd pressures_kpa;  // frames x chamber_count
    MatrixXd forces_n;       // frames x site_count

    int frame_count() const { return int(times.size()); }
};

/// Synthetic ground-truth generator: steps through the load schedule with
/// known pressures and forces, recording frames at the scenario rate.
/// Deterministic for a fixed scenario (the sensor noise stream is forked
/// from the scenario seed).
inline Recording run_forward(const BuiltScenario& built) {
    const Scenario& s = built.scenario;
    auto schedule = sample_schedule(built);
    const int frames = int(schedule.size());
    const int chambers = built.chamber_count();
    const int sites = built.site_count();

    InverseModel model = built.make_model();
    Rng noise = Rng(s.seed).fork(0x5e45);

    Recording rec;
    rec.times.resize(std::size_t(frames));
    rec.markers.resize(frames, 2 * built.markers.point_count());
    rec.shapes.resize(frames, built.shape_dim());
    rec.resistances.resize(frames, built.layout.segment_count());
    rec.pressures_kpa.resize(frames, chambers);
    rec.forces_n.resize(frames, sites);

    VectorXd prev_pressure = VectorXd::Zero(chambers);
    VectorXd prev_force = VectorXd::Zero(sites);
    for (int k = 0; k < frames; ++k) {
        const FrameLoads& loads = schedule[std::size_t(k)];
        try {
            model.advance_known(loads.pressures - prev_pressure, loads.forces - prev_force);
        } catch (const Error& e) {
            throw NonConvergence("forward frame " + std::to_string(k) + ": " + e.what());
        }
        prev_pressure = loads.pressures;
        prev_force = loads.forces;

        rec.times[std::size_t(k)] = double(k) / s.rate_hz;
        const VectorXd& q = model.state().q;
        for (int m = 0; m < built.markers.point_count(); ++m)
            rec.markers.row(k).segment<2>(2 * m) =
                centerline_position(built.mesh, built.markers, m, q);
        rec.shapes.row(k) = model.shape_values() - built.rest_shape;
        auto kappa = curvature_profile(built.mesh, q, built.sensor_line);
        rec.resistances.row(k) =
            simulate_resistance(built.layout, built.sensor_line.arc_positions, kappa, noise);
        for (int c = 0; c < chambers; ++c)
            rec.pressures_kpa(k, c) = loads.pressures(c) / (kPaToInternal * s.scaling_factor);
        rec.forces_n.row(k) = loads.forces;
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Recording files: one CSV row per frame plus a JSON manifest with the
// scenario hash and column layout.

inline void write_recording(const std::string& csv_path, const std::string& manifest_path,
                            const Recording& rec, const Scenario& scenario) {
    std::ofstream out(csv_path);
    if (!out) throw ConfigError("cannot write recording: " + csv_path);
    out << "t_s";
    for (int m = 0; m < rec.markers.cols() / 2; ++m) out << ",m" << m << "_x_mm,m" << m << "_y_mm";
    for (int i = 0; i < rec.shapes.cols(); ++i) out << ",s_" << i;
    for (int i = 0; i < rec.resistances.cols(); ++i) out << ",r_" << i << "_ohm";
    for (int i = 0; i < rec.pressures_kpa.cols(); ++i) out << ",p_" << i << "_kpa";
    for (int i = 0; i < rec.forces_n.cols(); ++i) out << ",f_" << i << "_n";
    out << "\n";
    for (int k = 0; k < rec.frame_count(); ++k) {
        out << format_double(rec.times[std::size_t(k)]);
        for (int j = 0; j < rec.markers.cols(); ++j) out << "," << format_double(rec.markers(k, j));
        for (int j = 0; j < rec.shapes.cols(); ++j) out << "," << format_double(rec.shapes(k, j));
        for (int j = 0; j < rec.resistances.cols(); ++j)
            out << "," << format_double(rec.resistances(k, j));
        for (int j = 0; j < rec.pressures_kpa.cols(); ++j)
            out << "," << format_double(rec.pressures_kpa(k, j));
        for (int j = 0; j < rec.forces_n.cols(); ++j) out << "," << format_double(rec.forces_n(k, j));
        out << "\n";
    }

    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["scenario_hash"] = scenario_hash(scenario);
    manifest["device"] = device_name(scenario.device);
    manifest["shape_mode"] = shape_mode_name(scenario.mode);
    manifest["rate_hz"] = scenario.rate_hz;
    manifest["marker_count"] = int(rec.markers.cols() / 2);
    manifest["shape_dim"] = int(rec.shapes.cols());
    manifest["segment_count"] = int(rec.resistances.cols());
    manifest["chamber_count"] = int(rec.pressures_kpa.cols());
    manifest["site_count"] = int(rec.forces_n.cols());
    manifest["frames"] = rec.frame_count();
    std::ofstream mout(manifest_path);
    if (!mout) throw ConfigError("cannot write recording manifest: " + manifest_path);
    mout << manifest.dump(2) << "\n";
}

inline Recording read_recording(const std::string& csv_path, const std::string& manifest_path) {
    std::ifstream min(manifest_path);
    if (!min) throw ConfigError("cannot open recording manifest: " + manifest_path);
    nlohmann::json manifest;
    try {
        min >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("cannot parse recording manifest: ") + e.what());
    }
    const int markers = manifest.at("marker_count").get<int>();
    const int shape_dim = manifest.at("shape_dim").get<int>();
    const int segments = manifest.at("segment_count").get<int>();
    const int chambers = manifest.at("chamber_count").get<int>();
    const int sites = manifest.at("site_count").get<int>();
    const int frames = manifest.at("frames").get<int>();

    std::ifstream in(csv_path);
    if (!in) throw ConfigError("cannot open recording: " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("recording is empty: " + csv_path);

    Recording rec;
    rec.times.resize(std::size_t(frames));
    rec.markers.resize(frames, 2 * markers);
    rec.shapes.resize(frames, shape_dim);
    rec.resistances.resize(frames, segments);
    rec.pressures_kpa.resize(frames, chambers);
    rec.forces_n.resize(frames, sites);

    for (int k = 0; k < frames; ++k) {
        if (!std::getline(in, line))
            throw ConfigError("recording has fewer frames than its manifest");
        std::stringstream ss(line);
        std::string cell;
        auto next = [&]() {
            if (!std::getline(ss, cell, ',')) throw ConfigError("recording row too short");
            return std::stod(cell);
        };
        rec.times[std::size_t(k)] = next();
        for (int j = 0; j < 2 * markers; ++j) rec.markers(k, j) = next();
        for (int j = 0; j < shape_dim; ++j) rec.shapes(k, j) = next();
        for (int j = 0; j < segments; ++j) rec.resistances(k, j) = next();
        for (int j = 0; j < chambers; ++j) rec.pressures_kpa(k, j) = next();
        for (int j = 0; j < sites; ++j) rec.forces_n(k, j) = next();
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Reconstruction and scoring

/// Per-marker position errors normalized by the marker's ground-truth
/// distance to the fixed base reference point, and force-trace errors as a
/// percentage of each site's measured range. Markers whose normalizer is
/// zero (the base point itself) are excluded and listed.
struct MetricsReport {
    std::vector<double> marker_error_pct;  // per marker; excluded markers carry 0
    std::vector<int> excluded_markers;
    std::string exclusion_note;
    std::vector<double> force_error_pct;   // per site with nonzero measured range
    std::vector<int> scored_force_sites;
    double mean_force_error_pct = 0.0;
    double boundary_marker_error_pct = 0.0;  // last marker inside the sensor span
    double tip_marker_error_pct = 0.0;
    int frames = 0;
    bool exact_shape = false;
    long outer_iterations = 0;  // deterministic effort-solver work counters
    long qp_iterations = 0;
};

struct ReplayResult {
    MetricsReport metrics;
    MatrixXd est_markers;  // frames x 2*marker_count
    MatrixXd est_forces;   // frames x site_count, accumulated efforts
};

/// Feed recorded shape changes (exact, or predicted from the recorded
/// resistances) through the effort estimator frame by frame and compare the
/// reconstructed markers and forces against the recording.
inline ReplayResult reconstruct_and_score(const BuiltScenario& built, const Recording& rec,
                                          const Regressor* regressor) {
    const Scenario& s = built.scenario;
    const int frames = rec.frame_count();
    const int markers = built.markers.point_count();
    const int sites = built.site_count();
    const int chambers = built.chamber_count();

    if (regressor) {
        if (regressor->segments != int(rec.resistances.cols()))
            throw ShapeMismatch("regressor segment count does not match the recording");
        if (regressor->output_dim != int(rec.shapes.cols()))
            throw ShapeMismatch("regressor output does not match the recording shape vector");
    }

    InverseModel model = built.make_model();
    const MatrixXd& resistances = rec.resistances;

    ReplayResult result;
    result.metrics.exact_shape = regressor == nullptr;
    result.metrics.frames = frames;
    result.est_markers.resize(frames, 2 * markers);
    result.est_forces.resize(frames, sites);

    VectorXd prev_pressure = VectorXd::Zero(chambers);
    VectorXd prev_shape = VectorXd::Zero(built.shape_dim());   // offsets from rest
    VectorXd prev_predicted = VectorXd::Zero(built.shape_dim());

    for (int k = 0; k < frames; ++k) {
        VectorXd pressure(chambers);
        for (int c = 0; c < chambers; ++c)
            pressure(c) = built.pressure_to_internal(rec.pressures_kpa(k, c));

        VectorXd shape_delta(built.shape_dim());
        if (!regressor) {
            shape_delta = VectorXd(rec.shapes.row(k)) - prev_shape;
            prev_shape = rec.shapes.row(k);
        } else if (regressor->variant == Regressor::Variant::conv) {
            // The window net predicts per-step changes directly.
            shape_delta.setZero();
            if (k >= regressor->window - 1) {
                VectorXd input(regressor->input_dim());
                for (int w = 0; w < regressor->window; ++w)
                    input.segment(w * regressor->segments, regressor->segments) =
                        resistances.row(k - regressor->window + 1 + w);
                shape_delta = predict_shape(*regressor, input);
            }
        } else {
            // The single-frame net predicts offsets from rest; consecutive
            // predictions difference into per-step changes.
            VectorXd predicted = predict_shape(*regressor, resistances.row(k).transpose());
            shape_delta = predicted - prev_predicted;
            prev_predicted = predicted;
        }

        StepReport report;
        try {
            report = model.estimate_step(shape_delta, pressure - prev_pressure);
        } catch (const Error& e) {
            throw NonConvergence("estimate frame " + std::to_string(k) + ": " + e.what());
        }
        prev_pressure = pressure;
        result.metrics.outer_iterations += report.outer_iterations;
        result.metrics.qp_iterations += report.qp_iterations;

        const VectorXd& q = model.state().q;
        for (int m = 0; m < markers; ++m)
            result.est_markers.row(k).segment<2>(2 * m) =
                centerline_position(built.mesh, built.markers, m, q);
        result.est_forces.row(k) = model.force_lambda();
    }

    // Marker errors.
    MetricsReport& metrics = result.metrics;
    metrics.marker_error_pct.assign(std::size_t(markers), 0.0);
    for (int m = 0; m < markers; ++m) {
        double acc = 0.0;
        bool degenerate = false;
        for (int k = 0; k < frames; ++k) {
            Point2 truth = rec.markers.row(k).segment<2>(2 * m);
            Point2 est = result.est_markers.row(k).segment<2>(2 * m);
            double normalizer = (truth - built.base_point).norm();
            if (normalizer <= 1e-9) {
                degenerate = true;
                break;
            }
            acc += (est - truth).norm() / normalizer;
        }
        if (degenerate || frames == 0) {
            metrics.excluded_markers.push_back(m);
        } else {
            metrics.marker_error_pct[std::size_t(m)] = 100.0 * acc / frames;
        }
    }
    if (!metrics.excluded_markers.empty())
        metrics.exclusion_note =
            "markers at the base reference point are excluded (zero normalizer)";
    if (markers > 0) {
        int boundary = std::min(markers, s.sensorized_count) - 1;
        metrics.boundary_marker_error_pct =
            boundary >= 0 ? metrics.marker_error_pct[std::size_t(boundary)] : 0.0;
        metrics.tip_marker_error_pct = metrics.marker_error_pct[std::size_t(markers - 1)];
    }

    // Force-trace errors, relative to each site's measured range.
    for (int f = 0; f < sites; ++f) {
        double lo = rec.forces_n.col(f).minCoeff(), hi = rec.forces_n.col(f).maxCoeff();
        double range = hi - lo;
        if (range <= 0) continue;
        double acc = 0.0;
        for (int k = 0; k < frames; ++k)
            acc += std::abs(result.est_forces(k, f) - rec.forces_n(k, f));
        metrics.force_error_pct.push_back(100.0 * acc / (frames * range));
        metrics.scored_force_sites.push_back(f);
    }
    if (!metrics.force_error_pct.empty()) {
        double sum = 0.0;
        for (double e : metrics.force_error_pct) sum += e;
        metrics.mean_force_error_pct = sum / double(metrics.force_error_pct.size());
    }
    return result;
}

inline nlohmann::json metrics_to_json(const MetricsReport& m) {
    nlohmann::json j;
    j["version"] = 1;
    j["frames"] = m.frames;
    j["exact_shape"] = m.exact_shape;
    j["marker_error_pct"] = m.marker_error_pct;
    j["excluded_markers"] = m.excluded_markers;
    j["exclusion_note"] = m.exclusion_note;
    j["boundary_marker_error_pct"] = m.boundary_marker_error_pct;
    j["tip_marker_error_pct"] = m.tip_marker_error_pct;
    j["force_error_pct"] = m.force_error_pct;
    j["scored_force_sites"] = m.scored_force_sites;
    j["mean_force_error_pct"] = m.mean_force_error_pct;
    j["outer_iterations"] = m.outer_iterations;
    j["qp_iterations"] = m.qp_iterations;
    return j;
}

inline void write_metrics(const std::string& path, const MetricsReport& m) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write metrics: " + path);
    out << metrics_to_json(m).dump(2) << "\n";
}

/// Per-frame force traces (measured vs estimated) for plotting.
inline void write_force_traces(const std::string& path, const Recording& rec,
                               const ReplayResult& replay) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write force traces: " + path);
    out << "t_s";
    for (int f = 0; f < rec.forces_n.cols(); ++f)
        out << ",measured_" << f << "_n,estimated_" << f << "_n";
    out << "\n";
    for (int k = 0; k < rec.frame_count(); ++k) {
        out << format_double(rec.times[std::size_t(k)]);
        for (int f = 0; f < rec.forces_n.cols(); ++f)
            out << "," << format_double(rec.forces_n(k, f)) << ","
                << format_double(replay.est_forces(k, f));
        out << "\n";
    }
}

/// Per-frame marker positions (ground truth vs reconstructed).
inline void write_marker_traces(const std::string& path, const Recording& rec,
                                const ReplayResult& replay) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write marker traces: " + path);
    const int markers = int(rec.markers.cols() / 2);
    out << "t_s";
    for (int m = 0; m < markers; ++m)
        out << ",true_m" << m << "_x_mm,true_m" << m << "_y_mm,est_m" << m << "_x_mm,est_m" << m
            << "_y_mm";
    out << "\n";
    for (int k = 0; k < rec.frame_count(); ++k) {
        out << format_double(rec.times[std::size_t(k)]);
        for (int m = 0; m < markers; ++m)
            out << "," << format_double(rec.markers(k, 2 * m)) << ","
                << format_double(rec.markers(k, 2 * m + 1)) << ","
                << format_double(replay.est_markers(k, 2 * m)) << ","
                << format_double(replay.est_markers(k, 2 * m + 1));
        out << "\n";
    }
}

/// Signals used for dataset building: resistances plus shape offsets.
inline SignalSeries recording_signals(const Recording& rec) {
    return SignalSeries{rec.resistances, rec.shapes};
}

}  // namespace proprio
