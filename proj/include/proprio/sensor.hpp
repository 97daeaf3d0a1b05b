#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "proprio/core.hpp"
#include "proprio/geometry.hpp"

namespace proprio {

/// Whether shape entries are in-plane rotations (one per point) or planar
/// displacements (two per point).
enum class ShapeMode { orientation, position };

inline int shape_mode_width(ShapeMode m) { return m == ShapeMode::orientation ? 1 : 2; }

inline std::string shape_mode_name(ShapeMode m) {
    return m == ShapeMode::orientation ? "orientation" : "position";
}

inline ShapeMode shape_mode_from_name(const std::string& s) {
    if (s == "orientation") return ShapeMode::orientation;
    if (s == "position") return ShapeMode::position;
    throw ConfigError("unknown shape mode: " + s);
}

/// Parametric multi-tap resistive sensor. Taps sit at tap_arcs along the
/// centerline; each inter-tap segment reports a resistance that grows with
/// the bend accumulated over the segment, leaks a fraction of the other
/// segments' response (the segments share one substrate), and carries
/// Gaussian readout noise.
struct SensorLayout {
    std::vector<double> tap_arcs;          // mm, strictly increasing
    std::vector<double> base_resistance;   // ohm, one per segment
    double curvature_gain = 5000.0;        // ohm per radian of accumulated |bend|
    double coupling = 0.15;                // cross-segment leak in [0, 1)
    double noise_std = 20.0;               // ohm

    int segment_count() const { return int(tap_arcs.size()) - 1; }
};

inline void validate_layout(const SensorLayout& layout) {
    if (layout.tap_arcs.size() < 2) throw ConfigError("sensor needs at least 2 taps");
    for (std::size_t i = 1; i < layout.tap_arcs.size(); ++i)
        if (!(layout.tap_arcs[i] > layout.tap_arcs[i - 1]))
            throw ConfigError("tap arcs must be strictly increasing");
    if (int(layout.base_resistance.size()) != layout.segment_count())
        throw ConfigError("base_resistance needs one entry per segment");
    for (double r : layout.base_resistance)
        if (!(r > 0)) throw ConfigError("base resistance must be positive");
    if (!(layout.coupling >= 0 && layout.coupling < 1))
        throw ConfigError("coupling must be in [0, 1)");
    if (!(layout.noise_std >= 0)) throw ConfigError("noise_std must be non-negative");
}

inline SensorLayout make_uniform_layout(int tap_count, double span_mm, double base_ohm = 10000.0,
                                        double gain = 5000.0, double coupling = 0.15,
                                        double noise_std = 20.0) {
    if (tap_count < 2) throw ConfigError("sensor needs at least 2 taps");
    SensorLayout layout;
    for (int i = 0; i < tap_count; ++i)
        layout.tap_arcs.push_back(span_mm * i / (tap_count - 1));
    layout.base_resistance.assign(std::size_t(tap_count - 1), base_ohm);
    layout.curvature_gain = gain;
    layout.coupling = coupling;
    layout.noise_std = noise_std;
    validate_layout(layout);
    return layout;
}

/// Signed Menger curvature of three consecutive points (1/mm); positive for
/// a left turn.
inline double menger_curvature(const Point2& a, const Point2& b, const Point2& c) {
    Point2 ab = b - a, bc = c - b, ac = c - a;
    double la = ab.norm(), lb = bc.norm(), lc = ac.norm();
    if (la <= 1e-12 || lb <= 1e-12 || lc <= 1e-12)
        throw DegenerateSegment("coincident centerline points");
    double cross = ab.x() * bc.y() - ab.y() * bc.x();
    return 2.0 * cross / (la * lb * lc);
}

/// Discrete signed curvature at each point of a sampled polyline; interior
/// points use the circumscribed circle of their neighbor triple, endpoints
/// copy their neighbor.
inline std::vector<double> curvature_from_points(const std::vector<Point2>& points) {
    if (points.size() < 3) throw ConfigError("curvature needs at least 3 points");
    std::vector<double> kappa(points.size(), 0.0);
    for (std::size_t i = 1; i + 1 < points.size(); ++i)
        kappa[i] = menger_curvature(points[i - 1], points[i], points[i + 1]);
    kappa.front() = kappa[1];
    kappa.back() = kappa[points.size() - 2];
    return kappa;
}

/// Curvature samples along a centerline under configuration q.
inline std::vector<double> curvature_profile(const TriMesh& mesh, const VectorXd& q,
                                             const Centerline& line) {
    if (line.point_count() < 3) throw ConfigError("centerline needs at least 3 points");
    std::vector<Point2> pts;
    pts.reserve(line.anchors.size());
    for (const auto& a : line.anchors) pts.push_back(anchor_position(mesh, a, q));
    return curvature_from_points(pts);
}

/// Integral of |kappa| over [s0, s1], with kappa piecewise linear over the
/// sample arcs. Exact: spans that change sign are split at the root.
inline double integrate_abs_curvature(const std::vector<double>& arcs,
                                      const std::vector<double>& kappa, double s0, double s1) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < arcs.size(); ++i) {
        double a = std::max(arcs[i], s0), b = std::min(arcs[i + 1], s1);
        if (b <= a) continue;
        double span = arcs[i + 1] - arcs[i];
        auto value = [&](double s) {
            double t = span > 0 ? (s - arcs[i]) / span : 0.0;
            return (1.0 - t) * kappa[i] + t * kappa[i + 1];
        };
        double va = value(a), vb = value(b);
        if (va * vb < 0.0) {
            double root = a + (b - a) * va / (va - vb);
            total += 0.5 * std::abs(va) * (root - a) + 0.5 * std::abs(vb) * (b - root);
        } else {
            total += 0.5 * (std::abs(va) + std::abs(vb)) * (b - a);
        }
    }
    return total;
}

/// Synthetic per-segment resistances for one curvature profile:
///   r_j = base_j + gain * I_j + coupling * mean_{k != j}(gain * I_k) + noise
/// with I_j the |curvature| integrated over segment j.
inline VectorXd simulate_resistance(const SensorLayout& layout, const std::vector<double>& arcs,
                                    const std::vector<double>& kappa, Rng& rng) {
    validate_layout(layout);
    if (arcs.size() != kappa.size()) throw ConfigError("curvature profile size mismatch");
    if (arcs.front() > layout.tap_arcs.front() + 1e-9 ||
        arcs.back() < layout.tap_arcs.back() - 1e-9)
        throw ConfigError("curvature profile does not cover the sensor span");

    const int m = layout.segment_count();
    VectorXd bend(m);
    for (int j = 0; j < m; ++j)
        bend(j) = layout.curvature_gain *
                  integrate_abs_curvature(arcs, kappa, layout.tap_arcs[std::size_t(j)],
                                          layout.tap_arcs[std::size_t(j) + 1]);
    VectorXd r(m);
    for (int j = 0; j < m; ++j) {
        double leak = 0.0;
        if (m > 1) {
            for (int k = 0; k < m; ++k)
                if (k != j) leak += bend(k);
            leak *= layout.coupling / (m - 1);
        }
        r(j) = layout.base_resistance[std::size_t(j)] + bend(j) + leak;
    }
    for (int j = 0; j < m; ++j) r(j) += rng.gaussian(0.0, layout.noise_std);
    return r;
}

// ---------------------------------------------------------------------------
// Datasets

/// One recording's synchronized signals, one row per frame.
struct SignalSeries {
    MatrixXd resistances;  // frames x segments
    MatrixXd shapes;       // frames x shape_dim, offsets from the rest shape
};

struct Sample {
    VectorXd input;   // window * segments, oldest frame first
    VectorXd target;
};

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> validation;
    std::vector<Sample> test;
    int window = 1;
    int segment_count = 0;
    int shape_dim = 0;
};

enum class TargetKind {
    step_delta,   // shape change between consecutive frames
    rest_offset,  // shape offset from the rest configuration
};

/// Pair resistance windows with shape targets. Windows never cross recording
/// boundaries. With step_delta targets and window 1, the first frame pairs
/// with a zero target so the sample count equals the frame count.
inline Dataset build_dataset(const std::vector<SignalSeries>& recordings, int window,
                             TargetKind targets, double validation_fraction = 0.15) {
    if (window < 1) throw ConfigError("dataset window must be at least 1");
    if (recordings.empty()) throw ConfigError("dataset needs at least one recording");
    Dataset d;
    d.window = window;
    d.segment_count = int(recordings.front().resistances.cols());
    d.shape_dim = int(recordings.front().shapes.cols());

    for (const auto& rec : recordings) {
        if (int(rec.resistances.cols()) != d.segment_count ||
            int(rec.shapes.cols()) != d.shape_dim)
            throw ShapeMismatch("recordings disagree on signal dimensions");
        const int frames = int(rec.resistances.rows());
        std::vector<Sample> samples;
        int first = std::max(window - 1, targets == TargetKind::step_delta && window > 1 ? 1 : 0);
        for (int t = first; t < frames; ++t) {
            Sample s;
            s.input.resize(window * d.segment_count);
            for (int k = 0; k < window; ++k)
                s.input.segment(k * d.segment_count, d.segment_count) =
                    rec.resistances.row(t - window + 1 + k);
            if (targets == TargetKind::step_delta)
                s.target = t > 0 ? VectorXd(rec.shapes.row(t) - rec.shapes.row(t - 1))
                                 : VectorXd(VectorXd::Zero(d.shape_dim));
            else
                s.target = rec.shapes.row(t);
            samples.push_back(std::move(s));
        }
        // Chronological split keeps windows from leaking across the cut.
        std::size_t cut = std::size_t(double(samples.size()) * (1.0 - validation_fraction));
        for (std::size_t i = 0; i < samples.size(); ++i)
            (i < cut ? d.train : d.validation).push_back(std::move(samples[i]));
    }
    return d;
}

/// Histogram-equalized resampling over deformation magnitude: draw with
/// replacement so each occupied bin contributes an equal expected count.
/// Output size equals input size; only the training split is resampled.
inline Dataset resample_dataset(const Dataset& d, int bins, std::uint64_t seed = 1) {
    if (bins < 2) throw ConfigError("resampling needs at least 2 bins");
    Dataset out = d;
    if (d.train.empty()) return out;

    std::vector<double> magnitude(d.train.size());
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < d.train.size(); ++i) {
        magnitude[i] = d.train[i].target.norm();
        lo = std::min(lo, magnitude[i]);
        hi = std::max(hi, magnitude[i]);
    }
    if (!(hi > lo)) return out;  // all targets identical: equalization is a no-op

    std::vector<std::vector<int>> bin_members{std::size_t(bins)};
    for (std::size_t i = 0; i < magnitude.size(); ++i) {
        int b = std::min(bins - 1, int(double(bins) * (magnitude[i] - lo) / (hi - lo)));
        bin_members[std::size_t(b)].push_back(int(i));
    }
    std::vector<int> occupied;
    for (int b = 0; b < bins; ++b)
        if (!bin_members[std::size_t(b)].empty()) occupied.push_back(b);

    Rng rng(seed);
    out.train.clear();
    out.train.reserve(d.train.size());
    for (std::size_t i = 0; i < d.train.size(); ++i) {
        const auto& members = bin_members[std::size_t(occupied[rng.index(occupied.size())])];
        out.train.push_back(d.train[members[rng.index(members.size())]]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset file format: CSV with header t,r_0..r_{m-1},s_0..s_{k-1} plus a
// JSON manifest carrying the layout and mode.

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_signal_csv(const std::string& path, const std::vector<double>& times,
                             const SignalSeries& series) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write dataset file: " + path);
    out << "t";
    for (int j = 0; j < series.resistances.cols(); ++j) out << ",r_" << j;
    for (int j = 0; j < series.shapes.cols(); ++j) out << ",s_" << j;
    out << "\n";
    for (int i = 0; i < series.resistances.rows(); ++i) {
        out << format_double(times[std::size_t(i)]);
        for (int j = 0; j < series.resistances.cols(); ++j)
            out << "," << format_double(series.resistances(i, j));
        for (int j = 0; j < series.shapes.cols(); ++j)
            out << "," << format_double(series.shapes(i, j));
        out << "\n";
    }
}

inline nlohmann::json layout_to_json(const SensorLayout& layout) {
    nlohmann::json j;
    j["tap_arcs_mm"] = layout.tap_arcs;
    j["base_resistance_ohm"] = layout.base_resistance;
    j["curvature_gain_ohm"] = layout.curvature_gain;
    j["coupling"] = layout.coupling;
    j["noise_std_ohm"] = layout.noise_std;
    return j;
}

inline SensorLayout layout_from_json(const nlohmann::json& j) {
    SensorLayout layout;
    layout.tap_arcs = j.at("tap_arcs_mm").get<std::vector<double>>();
    layout.base_resistance = j.at("base_resistance_ohm").get<std::vector<double>>();
    layout.curvature_gain = j.at("curvature_gain_ohm").get<double>();
    layout.coupling = j.at("coupling").get<double>();
    layout.noise_std = j.at("noise_std_ohm").get<double>();
    validate_layout(layout);
    return layout;
}

inline void write_dataset_manifest(const std::string& path, const SensorLayout& layout,
                                   ShapeMode mode, double rate_hz) {
    nlohmann::json j;
    j["version"] = 1;
    j["layout"] = layout_to_json(layout);
    j["shape_mode"] = shape_mode_name(mode);
    j["rate_hz"] = rate_hz;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write dataset manifest: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace proprio
