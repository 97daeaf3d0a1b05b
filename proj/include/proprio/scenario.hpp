#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "proprio/constraints.hpp"
#include "proprio/core.hpp"
#include "proprio/fem.hpp"
#include "proprio/geometry.hpp"
#include "proprio/inverse.hpp"
#include "proprio/sensor.hpp"

namespace proprio {

constexpr double kPaToInternal = 1e-3;  // kPa -> N/mm^2
constexpr double PaToInternal = 1e-6;   // Pa -> N/mm^2

enum class DeviceKind { strip, finger };

inline std::string device_name(DeviceKind d) { return d == DeviceKind::strip ? "strip" : "finger"; }

inline DeviceKind device_from_name(const std::string& s) {
    if (s == "strip") return DeviceKind::strip;
    if (s == "finger") return DeviceKind::finger;
    throw ConfigError("unknown device: " + s);
}

struct ForceSite {
    Point2 position = Point2::Zero();             // mm
    Eigen::Vector2d direction = Eigen::Vector2d::UnitY();
};

struct ScheduleSpec {
    enum class Kind { keyframes, random_smooth, site_ramps };
    Kind kind = Kind::keyframes;
    double duration_s = 1.0;

    // keyframes: linear interpolation, constant beyond the last key
    std::vector<double> key_times_s;
    std::vector<double> key_pressures_kpa;            // per key (single chamber)
    std::vector<std::vector<double>> key_forces_n;    // per key, per site

    // random_smooth: Ornstein-Uhlenbeck exploration of the load space
    double pressure_lo_kpa = 0.0, pressure_hi_kpa = 0.0;
    double force_lo_n = 0.0, force_hi_n = 0.0;
    double correlation_s = 0.7;
    double ramp_in_s = 2.0;

    // site_ramps: one triangular force pulse per site in sequence
    double ramp_peak_n = 1.8;
    double ramp_duration_s = 6.0;
    double hold_pressure_kpa = 0.0;
};

/// Full description of a synthetic device and experiment: geometry, material,
/// sensor, constraint sites, marker layout and the load schedule. JSON keys
/// carry unit suffixes; values are converted to internal units (mm, N,
/// N/mm^2) on load.
struct Scenario {
    std::string name = "strip";
    DeviceKind device = DeviceKind::strip;

    // geometry (generated strip mesh unless mesh_file is set)
    double length_mm = 120.0, height_mm = 10.0;
    int cols = 24, rows = 2;
    std::string mesh_file;

    // internal chamber carved from the grid (finger): one row of cells
    bool has_chamber = false;
    int chamber_col_begin = 0, chamber_col_end = 0, chamber_row = 0;

    // inextensible layer (finger)
    bool has_cable = false;
    double cable_y_mm = 1.0, cable_x0_mm = 2.0, cable_x1_mm = 80.0;
    int cable_point_count = 12;

    // material, internal units (N/mm^2)
    double young_modulus = 40.0;
    double poisson_ratio = 0.45;
    double thickness_mm = 10.0;
    double scaling_factor = 1.0;  // multiplies modulus and pressure inputs together

    // markers (ground truth) and nominal shape points (sensor span)
    int marker_count = 11;
    int sensorized_count = 8;
    double marker_y_mm = 5.0;
    double marker_x0_mm = 0.0, marker_x1_mm = 120.0;
    ShapeMode mode = ShapeMode::orientation;

    // sensor
    int tap_count = 8;
    double sensor_x0_mm = 0.0;
    double sensor_span_mm = 80.0;
    double base_resistance_ohm = 10000.0, curvature_gain_ohm = 5000.0;
    double coupling = 0.15, noise_std_ohm = 20.0;
    int sensor_sample_count = 25;

    // candidate external-force sites
    std::vector<ForceSite> force_sites;
    double force_lo_n = -50.0, force_hi_n = 50.0;
    double qp_ridge = 1e-9;
    double orientation_scale_mm = 120.0;

    ScheduleSpec schedule;
    double rate_hz = 30.0;
    std::uint64_t seed = 42;
};

// ---------------------------------------------------------------------------
// Presets. The strip is 120 mm with an 80 mm sensorized span and 11 markers;
// the finger analogue is 85 mm with an internal chamber along the top and an
// inextensible layer along the bottom.

// The synthetic sensor responds to the magnitude of the accumulated bend, so
// training and test schedules keep the deformation one-sided.
inline ScheduleSpec strip_training_schedule(double duration_s = 600.0) {
    ScheduleSpec s;
    s.kind = ScheduleSpec::Kind::random_smooth;
    s.duration_s = duration_s;
    s.force_lo_n = 0.0;
    s.force_hi_n = 1.8;
    s.correlation_s = 0.7;
    s.ramp_in_s = 2.0;
    return s;
}

inline ScheduleSpec strip_test_schedule(double ramp_duration_s = 2.0, double peak_n = 0.8) {
    ScheduleSpec s;
    s.kind = ScheduleSpec::Kind::site_ramps;
    s.ramp_duration_s = ramp_duration_s;
    s.ramp_peak_n = peak_n;
    s.hold_pressure_kpa = 0.0;
    return s;
}

inline ScheduleSpec finger_training_schedule(double duration_s = 900.0) {
    ScheduleSpec s;
    s.kind = ScheduleSpec::Kind::random_smooth;
    s.duration_s = duration_s;
    s.pressure_lo_kpa = 0.0;
    s.pressure_hi_kpa = 1.8;
    s.force_lo_n = 0.0;
    s.force_hi_n = 5.0;
    s.correlation_s = 1.0;
    s.ramp_in_s = 2.0;
    return s;
}

inline ScheduleSpec finger_test_schedule(double pressure_kpa = 1.2, double peak_n = 5.0,
                                         double ramp_duration_s = 20.0) {
    ScheduleSpec s;
    s.kind = ScheduleSpec::Kind::site_ramps;
    s.hold_pressure_kpa = pressure_kpa;
    s.ramp_peak_n = peak_n;
    s.ramp_duration_s = ramp_duration_s;
    return s;
}

inline Scenario make_strip_scenario() {
    Scenario s;
    s.name = "strip";
    s.device = DeviceKind::strip;
    s.length_mm = 120.0;
    s.height_mm = 10.0;
    s.cols = 24;
    s.rows = 2;
    s.young_modulus = 40.0;  // stiff printable elastomer
    s.poisson_ratio = 0.45;
    s.thickness_mm = 10.0;
    s.marker_count = 11;
    s.sensorized_count = 8;
    s.marker_y_mm = 5.0;
    s.marker_x0_mm = 0.0;
    s.marker_x1_mm = 120.0;
    s.mode = ShapeMode::orientation;
    s.tap_count = 8;
    s.sensor_x0_mm = 0.0;
    s.sensor_span_mm = 80.0;
    s.orientation_scale_mm = 120.0;
    for (int k = 0; k < 6; ++k)
        s.force_sites.push_back({Point2(20.0 * (k + 1), 5.0), Eigen::Vector2d(0, 1)});
    s.schedule = strip_training_schedule();
    return s;
}

inline Scenario make_finger_scenario() {
    Scenario s;
    s.name = "finger";
    s.device = DeviceKind::finger;
    s.length_mm = 85.0;
    s.height_mm = 16.0;
    s.cols = 26;
    s.rows = 5;
    s.has_chamber = true;
    s.chamber_col_begin = 2;
    s.chamber_col_end = 24;
    s.chamber_row = 3;
    s.has_cable = true;
    s.cable_y_mm = 1.0;
    s.cable_x0_mm = 2.0;
    s.cable_x1_mm = 80.0;
    s.cable_point_count = 12;
    s.young_modulus = 1.37;  // identified modulus of the finger analogue
    s.poisson_ratio = 0.45;
    s.thickness_mm = 60.0;
    s.marker_count = 9;
    s.sensorized_count = 9;
    s.marker_y_mm = 4.8;
    s.marker_x0_mm = 2.0;
    s.marker_x1_mm = 78.0;
    s.mode = ShapeMode::position;
    s.tap_count = 8;
    s.sensor_x0_mm = 2.0;
    s.sensor_span_mm = 76.0;
    s.orientation_scale_mm = 85.0;
    s.force_sites.push_back({Point2(76.0, 0.0), Eigen::Vector2d(0, 1)});
    s.schedule = finger_training_schedule();
    return s;
}

inline Scenario make_preset(const std::string& name) {
    if (name == "strip") return make_strip_scenario();
    if (name == "finger") return make_finger_scenario();
    throw ConfigError("unknown preset: " + name);
}

inline void validate_scenario(const Scenario& s) {
    if (s.device == DeviceKind::strip && s.has_chamber)
        throw ConfigError("strip preset has no pressure chamber");
    if (s.marker_count < 2 || s.tap_count < 2) throw ConfigError("scenario needs markers and taps");
    if (s.sensorized_count < 1 || s.sensorized_count > s.marker_count)
        throw ConfigError("sensorized_count out of range");
    if (!(s.rate_hz > 0)) throw ConfigError("rate_hz must be positive");
    if (!(s.scaling_factor > 0)) throw ConfigError("scaling_factor must be positive");
    if (!(s.force_lo_n <= s.force_hi_n)) throw ConfigError("force bounds inverted");
}

// ---------------------------------------------------------------------------
// Resolved scenario: mesh, constraint objects and anchor layouts.

struct BuiltScenario {
    Scenario scenario;
    TriMesh mesh;
    Material material;                  // scaling factor already applied
    Centerline markers;                 // ground-truth points
    Centerline nominal_points;          // shape-vector points on the sensor span
    Centerline sensor_line;             // dense samples for curvature integration
    SensorLayout layout;
    std::vector<PoseEffector> effectors;
    std::vector<ForceConstraint> forces;
    std::vector<PressureConstraint> chambers;
    std::optional<LengthConstraint> cable;
    VectorXd rest_shape;                // effector values at rest
    Point2 base_point = Point2::Zero(); // fixed reference for error normalization

    int shape_dim() const { return int(rest_shape.size()); }
    int chamber_count() const { return int(chambers.size()); }
    int site_count() const { return int(forces.size()); }

    double pressure_to_internal(double kpa) const {
        return kpa * kPaToInternal * scenario.scaling_factor;
    }

    InverseModel make_model() const {
        InverseOptions options;
        options.force_bounds = {scenario.force_lo_n, scenario.force_hi_n};
        options.orientation_scale = scenario.orientation_scale_mm;
        options.ridge = scenario.qp_ridge;
        return InverseModel(mesh, material, chambers, forces, cable, effectors, options);
    }
};

/// Boundary loop around the carved chamber cells, oriented so that positive
/// pressure inflates the cavity (normals point from the gas into the wall).
inline PressureConstraint chamber_loop(const TriMesh& mesh, double x_lo, double x_hi, double y_lo,
                                       double y_hi) {
    auto inside = [&](const Point2& p) {
        return p.x() >= x_lo - 1e-9 && p.x() <= x_hi + 1e-9 && p.y() >= y_lo - 1e-9 &&
               p.y() <= y_hi + 1e-9;
    };
    std::vector<std::array<int, 2>> loop_edges;
    for (const auto& e : mesh.boundary_edges)
        if (inside(mesh.vertices[std::size_t(e[0])]) && inside(mesh.vertices[std::size_t(e[1])]))
            loop_edges.push_back({e[1], e[0]});  // reversed: gas-side outward normals
    if (loop_edges.empty()) throw ConfigError("no chamber boundary found in the given box");
    // Chain the reversed edges into one contiguous loop.
    std::vector<std::array<int, 2>> chain;
    chain.push_back(loop_edges.front());
    loop_edges.erase(loop_edges.begin());
    while (!loop_edges.empty()) {
        bool extended = false;
        for (std::size_t i = 0; i < loop_edges.size(); ++i) {
            if (loop_edges[i][0] == chain.back()[1]) {
                chain.push_back(loop_edges[i]);
                loop_edges.erase(loop_edges.begin() + std::ptrdiff_t(i));
                extended = true;
                break;
            }
        }
        if (!extended) throw ConfigError("chamber boundary is not a single loop");
    }
    return PressureConstraint{chain};
}

inline BuiltScenario build_scenario(const Scenario& s) {
    validate_scenario(s);
    BuiltScenario built;
    built.scenario = s;

    if (!s.mesh_file.empty()) {
        built.mesh = load_mesh(s.mesh_file);
    } else if (s.has_chamber) {
        const int cb = s.chamber_col_begin, ce = s.chamber_col_end, cr = s.chamber_row;
        built.mesh = make_grid_mesh(s.length_mm, s.height_mm, s.cols, s.rows,
                                    [&](int cx, int cy) { return cy == cr && cx >= cb && cx < ce; });
    } else {
        built.mesh = make_grid_mesh(s.length_mm, s.height_mm, s.cols, s.rows);
    }

    built.material = Material{s.young_modulus * s.scaling_factor, s.poisson_ratio, s.thickness_mm};
    validate_material(built.material);

    const Point2 line_a(s.marker_x0_mm, s.marker_y_mm);
    const Point2 line_b(s.marker_x1_mm, s.marker_y_mm);
    built.markers = sample_centerline(built.mesh, {line_a, line_b}, s.marker_count);
    built.base_point = Point2(s.marker_x0_mm, s.marker_y_mm);

    const Point2 sensor_a(s.sensor_x0_mm, s.marker_y_mm);
    const Point2 sensor_b(s.sensor_x0_mm + s.sensor_span_mm, s.marker_y_mm);
    built.nominal_points = sample_centerline(built.mesh, {sensor_a, sensor_b}, s.tap_count);
    built.sensor_line =
        sample_centerline(built.mesh, {sensor_a, sensor_b}, std::max(s.sensor_sample_count, 3));
    built.layout = make_uniform_layout(s.tap_count, s.sensor_span_mm, s.base_resistance_ohm,
                                       s.curvature_gain_ohm, s.coupling, s.noise_std_ohm);
    // Tap arcs are measured from the sensor base; the dense line shares that
    // origin so integration uses a common arc coordinate.

    for (const auto& a : built.nominal_points.anchors)
        built.effectors.push_back(PoseEffector{
            a, s.mode == ShapeMode::orientation ? EffectorKind::orientation : EffectorKind::position});

    for (const auto& site : s.force_sites)
        built.forces.push_back(make_force_constraint(built.mesh, site.position, site.direction));

    if (s.has_chamber) {
        const double dx = s.length_mm / s.cols, dy = s.height_mm / s.rows;
        built.chambers.push_back(chamber_loop(
            built.mesh, s.chamber_col_begin * dx, s.chamber_col_end * dx, s.chamber_row * dy,
            (s.chamber_row + 1) * dy));
        validate_pressure_constraint(built.mesh, built.chambers.back());
    }

    if (s.has_cable) {
        Centerline cable_line = sample_centerline(
            built.mesh, {Point2(s.cable_x0_mm, s.cable_y_mm), Point2(s.cable_x1_mm, s.cable_y_mm)},
            s.cable_point_count);
        built.cable = make_length_constraint(built.mesh, cable_line.anchors);
    }

    VectorXd q0 = rest_positions(built.mesh);
    built.rest_shape.resize(int(built.effectors.size()) * shape_mode_width(s.mode));
    int row = 0;
    for (const auto& e : built.effectors) {
        VectorXd v = effector_value(built.mesh, e, q0);
        built.rest_shape.segment(row, v.size()) = v;
        row += int(v.size());
    }
    return built;
}

// ---------------------------------------------------------------------------
// Load schedules sampled at the recording rate. Internal units.

struct FrameLoads {
    VectorXd pressures;  // N/mm^2 per chamber (scaling applied)
    VectorXd forces;     // N per site
};

inline std::vector<FrameLoads> sample_schedule(const BuiltScenario& built) {
    const Scenario& s = built.scenario;
    const ScheduleSpec& sched = s.schedule;
    const int chambers = built.chamber_count();
    const int sites = built.site_count();
    const double dt = 1.0 / s.rate_hz;

    double duration = sched.duration_s;
    if (sched.kind == ScheduleSpec::Kind::site_ramps)
        duration = sched.ramp_in_s + sched.ramp_duration_s * sites;
    const int frames = std::max(1, int(std::llround(duration * s.rate_hz)) + 1);

    std::vector<FrameLoads> out{std::size_t(frames)};
    Rng rng = Rng(s.seed).fork(0xefc0de);

    if (sched.kind == ScheduleSpec::Kind::random_smooth) {
        const double a = std::exp(-dt / std::max(sched.correlation_s, 1e-3));
        const double sig = std::sqrt(1.0 - a * a);
        VectorXd xp = VectorXd::Zero(chambers), xf = VectorXd::Zero(sites);
        for (int k = 0; k < frames; ++k) {
            double t = k * dt;
            double envelope = sched.ramp_in_s > 0 ? std::min(1.0, t / sched.ramp_in_s) : 1.0;
            FrameLoads& frame = out[std::size_t(k)];
            frame.pressures.resize(chambers);
            frame.forces.resize(sites);
            for (int c = 0; c < chambers; ++c) {
                xp(c) = a * xp(c) + sig * rng.gaussian();
                double mid = 0.5 * (sched.pressure_lo_kpa + sched.pressure_hi_kpa);
                double half = 0.5 * (sched.pressure_hi_kpa - sched.pressure_lo_kpa);
                double kpa = std::clamp(mid + half * xp(c) / 1.5, sched.pressure_lo_kpa,
                                        sched.pressure_hi_kpa);
                frame.pressures(c) = built.pressure_to_internal(envelope * kpa);
            }
            for (int f = 0; f < sites; ++f) {
                xf(f) = a * xf(f) + sig * rng.gaussian();
                double mid = 0.5 * (sched.force_lo_n + sched.force_hi_n);
                double half = 0.5 * (sched.force_hi_n - sched.force_lo_n);
                frame.forces(f) = envelope * std::clamp(mid + half * xf(f) / 1.5, sched.force_lo_n,
                                                        sched.force_hi_n);
            }
        }
    } else if (sched.kind == ScheduleSpec::Kind::site_ramps) {
        for (int k = 0; k < frames; ++k) {
            double t = k * dt;
            FrameLoads& frame = out[std::size_t(k)];
            double envelope = sched.ramp_in_s > 0 ? std::min(1.0, t / sched.ramp_in_s) : 1.0;
            frame.pressures =
                VectorXd::Constant(chambers, built.pressure_to_internal(envelope * sched.hold_pressure_kpa));
            frame.forces = VectorXd::Zero(sites);
            double u = t - sched.ramp_in_s;
            if (u >= 0 && sites > 0) {
                int site = std::min(sites - 1, int(u / sched.ramp_duration_s));
                double phase = (u - site * sched.ramp_duration_s) / sched.ramp_duration_s;
                frame.forces(site) = sched.ramp_peak_n * (1.0 - std::abs(2.0 * phase - 1.0));
            }
        }
    } else {
        for (int k = 0; k < frames; ++k) {
            double t = k * dt;
            FrameLoads& frame = out[std::size_t(k)];
            frame.pressures = VectorXd::Zero(chambers);
            frame.forces = VectorXd::Zero(sites);
            if (!sched.key_times_s.empty()) {
                const auto& times = sched.key_times_s;
                std::size_t hi = 0;
                while (hi < times.size() && times[hi] < t) ++hi;
                auto value_at = [&](const std::vector<double>& values, double fallback) {
                    if (values.empty()) return fallback;
                    if (hi == 0) return values.front();
                    if (hi >= values.size()) return values.back();
                    double w = (t - times[hi - 1]) / std::max(times[hi] - times[hi - 1], 1e-12);
                    return (1.0 - w) * values[hi - 1] + w * values[hi];
                };
                for (int c = 0; c < chambers; ++c)
                    frame.pressures(c) =
                        built.pressure_to_internal(value_at(sched.key_pressures_kpa, 0.0));
                for (int f = 0; f < sites; ++f) {
                    std::vector<double> channel;
                    for (const auto& key : sched.key_forces_n)
                        channel.push_back(f < int(key.size()) ? key[std::size_t(f)] : 0.0);
                    frame.forces(f) = value_at(channel, 0.0);
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON round trip. Unit-annotated keys; modulus in Pa, pressures in kPa.

inline nlohmann::json schedule_to_json(const ScheduleSpec& s) {
    nlohmann::json j;
    j["kind"] = s.kind == ScheduleSpec::Kind::keyframes       ? "keyframes"
                : s.kind == ScheduleSpec::Kind::random_smooth ? "random_smooth"
                                                              : "site_ramps";
    j["duration_s"] = s.duration_s;
    j["key_times_s"] = s.key_times_s;
    j["key_pressures_kpa"] = s.key_pressures_kpa;
    j["key_forces_n"] = s.key_forces_n;
    j["pressure_lo_kpa"] = s.pressure_lo_kpa;
    j["pressure_hi_kpa"] = s.pressure_hi_kpa;
    j["force_lo_n"] = s.force_lo_n;
    j["force_hi_n"] = s.force_hi_n;
    j["correlation_s"] = s.correlation_s;
    j["ramp_in_s"] = s.ramp_in_s;
    j["ramp_peak_n"] = s.ramp_peak_n;
    j["ramp_duration_s"] = s.ramp_duration_s;
    j["hold_pressure_kpa"] = s.hold_pressure_kpa;
    return j;
}

inline ScheduleSpec schedule_from_json(const nlohmann::json& j) {
    ScheduleSpec s;
    std::string kind = j.value("kind", "keyframes");
    if (kind == "keyframes") s.kind = ScheduleSpec::Kind::keyframes;
    else if (kind == "random_smooth") s.kind = ScheduleSpec::Kind::random_smooth;
    else if (kind == "site_ramps") s.kind = ScheduleSpec::Kind::site_ramps;
    else throw ConfigError("unknown schedule kind: " + kind);
    s.duration_s = j.value("duration_s", s.duration_s);
    s.key_times_s = j.value("key_times_s", s.key_times_s);
    s.key_pressures_kpa = j.value("key_pressures_kpa", s.key_pressures_kpa);
    s.key_forces_n = j.value("key_forces_n", s.key_forces_n);
    s.pressure_lo_kpa = j.value("pressure_lo_kpa", s.pressure_lo_kpa);
    s.pressure_hi_kpa = j.value("pressure_hi_kpa", s.pressure_hi_kpa);
    s.force_lo_n = j.value("force_lo_n", s.force_lo_n);
    s.force_hi_n = j.value("force_hi_n", s.force_hi_n);
    s.correlation_s = j.value("correlation_s", s.correlation_s);
    s.ramp_in_s = j.value("ramp_in_s", s.ramp_in_s);
    s.ramp_peak_n = j.value("ramp_peak_n", s.ramp_peak_n);
    s.ramp_duration_s = j.value("ramp_duration_s", s.ramp_duration_s);
    s.hold_pressure_kpa = j.value("hold_pressure_kpa", s.hold_pressure_kpa);
    return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json j;
    j["version"] = 1;
    j["name"] = s.name;
    j["device"] = device_name(s.device);
    j["length_mm"] = s.length_mm;
    j["height_mm"] = s.height_mm;
    j["cols"] = s.cols;
    j["rows"] = s.rows;
    j["mesh_file"] = s.mesh_file;
    j["has_chamber"] = s.has_chamber;
    j["chamber_col_begin"] = s.chamber_col_begin;
    j["chamber_col_end"] = s.chamber_col_end;
    j["chamber_row"] = s.chamber_row;
    j["has_cable"] = s.has_cable;
    j["cable_y_mm"] = s.cable_y_mm;
    j["cable_x0_mm"] = s.cable_x0_mm;
    j["cable_x1_mm"] = s.cable_x1_mm;
    j["cable_point_count"] = s.cable_point_count;
    j["young_modulus_pa"] = s.young_modulus / PaToInternal;
    j["poisson_ratio"] = s.poisson_ratio;
    j["thickness_mm"] = s.thickness_mm;
    j["scaling_factor"] = s.scaling_factor;
    j["marker_count"] = s.marker_count;
    j["sensorized_count"] = s.sensorized_count;
    j["marker_y_mm"] = s.marker_y_mm;
    j["marker_x0_mm"] = s.marker_x0_mm;
    j["marker_x1_mm"] = s.marker_x1_mm;
    j["shape_mode"] = shape_mode_name(s.mode);
    j["tap_count"] = s.tap_count;
    j["sensor_x0_mm"] = s.sensor_x0_mm;
    j["sensor_span_mm"] = s.sensor_span_mm;
    j["base_resistance_ohm"] = s.base_resistance_ohm;
    j["curvature_gain_ohm"] = s.curvature_gain_ohm;
    j["coupling"] = s.coupling;
    j["noise_std_ohm"] = s.noise_std_ohm;
    j["sensor_sample_count"] = s.sensor_sample_count;
    j["force_sites"] = nlohmann::json::array();
    for (const auto& site : s.force_sites)
        j["force_sites"].push_back({{"x_mm", site.position.x()},
                                    {"y_mm", site.position.y()},
                                    {"dir", {site.direction.x(), site.direction.y()}}});
    j["force_lo_n"] = s.force_lo_n;
    j["force_hi_n"] = s.force_hi_n;
    j["qp_ridge"] = s.qp_ridge;
    j["orientation_scale_mm"] = s.orientation_scale_mm;
    j["schedule"] = schedule_to_json(s.schedule);
    j["rate_hz"] = s.rate_hz;
    j["seed"] = s.seed;
    return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    Scenario s;
    if (j.contains("preset")) s = make_preset(j.at("preset").get<std::string>());
    if (j.contains("schedule_preset")) {
        std::string p = j.at("schedule_preset").get<std::string>();
        if (s.device == DeviceKind::strip)
            s.schedule = p == "test" ? strip_test_schedule() : strip_training_schedule();
        else
            s.schedule = p == "test" ? finger_test_schedule() : finger_training_schedule();
    }
    s.name = j.value("name", s.name);
    if (j.contains("device")) s.device = device_from_name(j.at("device").get<std::string>());
    s.length_mm = j.value("length_mm", s.length_mm);
    s.height_mm = j.value("height_mm", s.height_mm);
    s.cols = j.value("cols", s.cols);
    s.rows = j.value("rows", s.rows);
    s.mesh_file = j.value("mesh_file", s.mesh_file);
    s.has_chamber = j.value("has_chamber", s.has_chamber);
    s.chamber_col_begin = j.value("chamber_col_begin", s.chamber_col_begin);
    s.chamber_col_end = j.value("chamber_col_end", s.chamber_col_end);
    s.chamber_row = j.value("chamber_row", s.chamber_row);
    s.has_cable = j.value("has_cable", s.has_cable);
    s.cable_y_mm = j.value("cable_y_mm", s.cable_y_mm);
    s.cable_x0_mm = j.value("cable_x0_mm", s.cable_x0_mm);
    s.cable_x1_mm = j.value("cable_x1_mm", s.cable_x1_mm);
    s.cable_point_count = j.value("cable_point_count", s.cable_point_count);
    if (j.contains("young_modulus_pa"))
        s.young_modulus = j.at("young_modulus_pa").get<double>() * PaToInternal;
    s.poisson_ratio = j.value("poisson_ratio", s.poisson_ratio);
    s.thickness_mm = j.value("thickness_mm", s.thickness_mm);
    s.scaling_factor = j.value("scaling_factor", s.scaling_factor);
    s.marker_count = j.value("marker_count", s.marker_count);
    s.sensorized_count = j.value("sensorized_count", s.sensorized_count);
    s.marker_y_mm = j.value("marker_y_mm", s.marker_y_mm);
    s.marker_x0_mm = j.value("marker_x0_mm", s.marker_x0_mm);
    s.marker_x1_mm = j.value("marker_x1_mm", s.marker_x1_mm);
    if (j.contains("shape_mode")) s.mode = shape_mode_from_name(j.at("shape_mode").get<std::string>());
    s.tap_count = j.value("tap_count", s.tap_count);
    s.sensor_x0_mm = j.value("sensor_x0_mm", s.sensor_x0_mm);
    s.sensor_span_mm = j.value("sensor_span_mm", s.sensor_span_mm);
    s.base_resistance_ohm = j.value("base_resistance_ohm", s.base_resistance_ohm);
    s.curvature_gain_ohm = j.value("curvature_gain_ohm", s.curvature_gain_ohm);
    s.coupling = j.value("coupling", s.coupling);
    s.noise_std_ohm = j.value("noise_std_ohm", s.noise_std_ohm);
    s.sensor_sample_count = j.value("sensor_sample_count", s.sensor_sample_count);
    if (j.contains("force_sites")) {
        s.force_sites.clear();
        for (const auto& site : j.at("force_sites")) {
            ForceSite fs;
            fs.position = Point2(site.at("x_mm").get<double>(), site.at("y_mm").get<double>());
            fs.direction = Eigen::Vector2d(site.at("dir").at(0).get<double>(),
                                           site.at("dir").at(1).get<double>());
            s.force_sites.push_back(fs);
        }
    }
    s.force_lo_n = j.value("force_lo_n", s.force_lo_n);
    s.force_hi_n = j.value("force_hi_n", s.force_hi_n);
    s.qp_ridge = j.value("qp_ridge", s.qp_ridge);
    s.orientation_scale_mm = j.value("orientation_scale_mm", s.orientation_scale_mm);
    if (j.contains("schedule")) s.schedule = schedule_from_json(j.at("schedule"));
    s.rate_hz = j.value("rate_hz", s.rate_hz);
    s.seed = j.value("seed", s.seed);
    validate_scenario(s);
    return s;
}

inline std::string scenario_hash(const Scenario& s) {
    return fnv1a64_hex(scenario_to_json(s).dump());
}

}  // namespace proprio
