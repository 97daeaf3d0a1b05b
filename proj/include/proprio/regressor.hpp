#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "proprio/core.hpp"
#include "proprio/sensor.hpp"

namespace proprio {

/// Feed-forward mapping from resistance windows to shape vectors. Two
/// presets: a small convolutional net over a stacked window (strip), and a
/// two-layer dense net over a single frame (finger). The output layer is
/// linear. Inputs and targets are standardized with statistics stored in the
/// model, so files carry raw units.
struct Regressor {
    enum class Variant { conv, dense };
    enum class Activation { relu, tanh };

    Variant variant = Variant::dense;
    Activation activation = Activation::relu;
    ShapeMode mode = ShapeMode::position;
    int window = 1;
    int segments = 0;
    int output_dim = 0;

    // conv variant: filter_count filters of filter_rows x filter_cols over the
    // window-by-segments input image, valid padding.
    int filter_count = 32, filter_rows = 3, filter_cols = 3;
    std::vector<MatrixXd> filters;
    VectorXd filter_bias;
    double conv_dropout = 0.5;

    // dense variant
    MatrixXd w1, w2;
    VectorXd b1, b2;
    double dense_dropout = 0.2;

    // shared linear output layer
    MatrixXd w_out;
    VectorXd b_out;

    VectorXd input_mean, input_std, target_mean, target_std;

    int input_dim() const { return window * segments; }
    int conv_out_rows() const { return window - filter_rows + 1; }
    int conv_out_cols() const { return segments - filter_cols + 1; }
    int hidden_dim() const {
        return variant == Variant::conv ? filter_count * conv_out_rows() * conv_out_cols()
                                        : int(w2.rows());
    }
};

namespace detail {

inline void init_matrix(MatrixXd& m, int rows, int cols, Rng& rng) {
    m.resize(rows, cols);
    double scale = std::sqrt(1.0 / std::max(1, cols));
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-scale, scale);
}

}  // namespace detail

/// Strip preset: one convolutional layer of 32 3x3 filters with 0.5 dropout
/// over a 5-frame resistance window, flattened into a linear output layer.
inline Regressor make_strip_regressor(int segments, int output_dim, std::uint64_t seed = 7) {
    if (segments < 3) throw ConfigError("conv regressor needs at least 3 segments");
    Rng rng(seed);
    Regressor r;
    r.variant = Regressor::Variant::conv;
    r.mode = ShapeMode::orientation;
    r.window = 5;
    r.segments = segments;
    r.output_dim = output_dim;
    r.filters.resize(std::size_t(r.filter_count));
    for (auto& f : r.filters) detail::init_matrix(f, r.filter_rows, r.filter_cols, rng);
    r.filter_bias = VectorXd::Zero(r.filter_count);
    detail::init_matrix(r.w_out, output_dim, r.filter_count * r.conv_out_rows() * r.conv_out_cols(),
                        rng);
    r.b_out = VectorXd::Zero(output_dim);
    r.input_mean = VectorXd::Zero(r.input_dim());
    r.input_std = VectorXd::Ones(r.input_dim());
    r.target_mean = VectorXd::Zero(output_dim);
    r.target_std = VectorXd::Ones(output_dim);
    return r;
}

/// Finger preset: fully connected 32 and 16 tanh layers with 0.2 dropout over
/// the current resistance frame.
inline Regressor make_finger_regressor(int segments, int output_dim, std::uint64_t seed = 7) {
    Rng rng(seed);
    Regressor r;
    r.variant = Regressor::Variant::dense;
    r.mode = ShapeMode::position;
    r.window = 1;
    r.segments = segments;
    r.output_dim = output_dim;
    detail::init_matrix(r.w1, 32, segments, rng);
    r.b1 = VectorXd::Zero(32);
    detail::init_matrix(r.w2, 16, 32, rng);
    r.b2 = VectorXd::Zero(16);
    detail::init_matrix(r.w_out, output_dim, 16, rng);
    r.b_out = VectorXd::Zero(output_dim);
    r.input_mean = VectorXd::Zero(segments);
    r.input_std = VectorXd::Ones(segments);
    r.target_mean = VectorXd::Zero(output_dim);
    r.target_std = VectorXd::Ones(output_dim);
    return r;
}

namespace detail {

inline double activate(Regressor::Activation a, double z) {
    return a == Regressor::Activation::relu ? (z > 0 ? z : 0.0) : std::tanh(z);
}

/// Derivative expressed through the activation output.
inline double activate_prime(Regressor::Activation a, double out) {
    return a == Regressor::Activation::relu ? (out > 0 ? 1.0 : 0.0) : 1.0 - out * out;
}

struct ForwardCache {
    VectorXd x;                      // normalized input
    std::vector<MatrixXd> conv_act;  // activation outputs per filter
    std::vector<MatrixXd> conv_mask;
    VectorXd h1, h2, mask1, mask2;   // dense path
    VectorXd hidden;                 // input to the output layer
    VectorXd y;                      // normalized output
};

inline MatrixXd conv_valid(const MatrixXd& image, const MatrixXd& kernel) {
    const int rows = int(image.rows() - kernel.rows() + 1);
    const int cols = int(image.cols() - kernel.cols() + 1);
    MatrixXd out(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            out(i, j) = (image.block(i, j, kernel.rows(), kernel.cols()).array() * kernel.array())
                            .sum();
    return out;
}

/// Forward pass on a normalized input. Dropout masks are drawn from rng when
/// training is true, otherwise inference scaling is used (masks of ones).
inline void forward(const Regressor& r, const VectorXd& x_norm, bool training, Rng& rng,
                    ForwardCache& cache) {
    cache.x = x_norm;
    if (r.variant == Regressor::Variant::conv) {
        MatrixXd image(r.window, r.segments);
        for (int t = 0; t < r.window; ++t)
            image.row(t) = x_norm.segment(t * r.segments, r.segments);
        const int hr = r.conv_out_rows(), hc = r.conv_out_cols();
        cache.conv_act.assign(std::size_t(r.filter_count), MatrixXd());
        cache.conv_mask.assign(std::size_t(r.filter_count), MatrixXd());
        cache.hidden.resize(r.filter_count * hr * hc);
        const double keep = 1.0 - r.conv_dropout;
        int offset = 0;
        for (int f = 0; f < r.filter_count; ++f) {
            MatrixXd pre = conv_valid(image, r.filters[std::size_t(f)]);
            pre.array() += r.filter_bias(f);
            MatrixXd act = pre.unaryExpr([&](double z) { return activate(r.activation, z); });
            MatrixXd mask = MatrixXd::Ones(hr, hc);
            if (training && r.conv_dropout > 0) {
                for (int i = 0; i < hr; ++i)
                    for (int j = 0; j < hc; ++j)
                        mask(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
            }
            cache.conv_act[std::size_t(f)] = act;
            cache.conv_mask[std::size_t(f)] = mask;
            MatrixXd dropped = act.array() * mask.array();
            for (int i = 0; i < hr; ++i)
                for (int j = 0; j < hc; ++j) cache.hidden(offset++) = dropped(i, j);
        }
    } else {
        const double keep = 1.0 - r.dense_dropout;
        auto draw_mask = [&](int n) {
            VectorXd m = VectorXd::Ones(n);
            if (training && r.dense_dropout > 0)
                for (int i = 0; i < n; ++i) m(i) = rng.uniform() < keep ? 1.0 / keep : 0.0;
            return m;
        };
        cache.h1 = (r.w1 * x_norm + r.b1)
                       .unaryExpr([&](double z) { return activate(r.activation, z); });
        cache.mask1 = draw_mask(int(cache.h1.size()));
        VectorXd d1 = cache.h1.cwiseProduct(cache.mask1);
        cache.h2 = (r.w2 * d1 + r.b2)
                       .unaryExpr([&](double z) { return activate(r.activation, z); });
        cache.mask2 = draw_mask(int(cache.h2.size()));
        cache.hidden = cache.h2.cwiseProduct(cache.mask2);
    }
    cache.y = r.w_out * cache.hidden + r.b_out;
}

/// Accumulated parameter gradients, mirroring the Regressor layout.
struct Gradients {
    std::vector<MatrixXd> filters;
    VectorXd filter_bias;
    MatrixXd w1, w2, w_out;
    VectorXd b1, b2, b_out;

    static Gradients zero(const Regressor& r) {
        Gradients g;
        if (r.variant == Regressor::Variant::conv) {
            g.filters.assign(std::size_t(r.filter_count),
                             MatrixXd::Zero(r.filter_rows, r.filter_cols));
            g.filter_bias = VectorXd::Zero(r.filter_count);
        } else {
            g.w1 = MatrixXd::Zero(r.w1.rows(), r.w1.cols());
            g.b1 = VectorXd::Zero(r.b1.size());
            g.w2 = MatrixXd::Zero(r.w2.rows(), r.w2.cols());
            g.b2 = VectorXd::Zero(r.b2.size());
        }
        g.w_out = MatrixXd::Zero(r.w_out.rows(), r.w_out.cols());
        g.b_out = VectorXd::Zero(r.b_out.size());
        return g;
    }
};

/// Backprop of dL/dy through the cached forward pass.
inline void backward(const Regressor& r, const ForwardCache& cache, const VectorXd& dy,
                     Gradients& g) {
    g.w_out += dy * cache.hidden.transpose();
    g.b_out += dy;
    VectorXd dhidden = r.w_out.transpose() * dy;

    if (r.variant == Regressor::Variant::conv) {
        MatrixXd image(r.window, r.segments);
        for (int t = 0; t < r.window; ++t)
            image.row(t) = cache.x.segment(t * r.segments, r.segments);
        const int hr = r.conv_out_rows(), hc = r.conv_out_cols();
        int offset = 0;
        for (int f = 0; f < r.filter_count; ++f) {
            const MatrixXd& act = cache.conv_act[std::size_t(f)];
            const MatrixXd& mask = cache.conv_mask[std::size_t(f)];
            MatrixXd dpre(hr, hc);
            for (int i = 0; i < hr; ++i)
                for (int j = 0; j < hc; ++j)
                    dpre(i, j) =
                        dhidden(offset++) * mask(i, j) * activate_prime(r.activation, act(i, j));
            g.filter_bias(f) += dpre.sum();
            MatrixXd& gf = g.filters[std::size_t(f)];
            for (int u = 0; u < r.filter_rows; ++u)
                for (int v = 0; v < r.filter_cols; ++v)
                    gf(u, v) += (image.block(u, v, hr, hc).array() * dpre.array()).sum();
        }
    } else {
        VectorXd dh2 = dhidden.cwiseProduct(cache.mask2);
        VectorXd da2 = dh2.cwiseProduct(cache.h2.unaryExpr(
            [&](double out) { return activate_prime(r.activation, out); }));
        VectorXd d1 = cache.h1.cwiseProduct(cache.mask1);
        g.w2 += da2 * d1.transpose();
        g.b2 += da2;
        VectorXd dh1 = (r.w2.transpose() * da2).cwiseProduct(cache.mask1);
        VectorXd da1 = dh1.cwiseProduct(cache.h1.unaryExpr(
            [&](double out) { return activate_prime(r.activation, out); }));
        g.w1 += da1 * cache.x.transpose();
        g.b1 += da1;
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parameter flattening (fixed order) for optimizers and gradient checks.

inline int parameter_count(const Regressor& r) {
    int n = int(r.w_out.size() + r.b_out.size());
    if (r.variant == Regressor::Variant::conv)
        n += r.filter_count * r.filter_rows * r.filter_cols + r.filter_count;
    else
        n += int(r.w1.size() + r.b1.size() + r.w2.size() + r.b2.size());
    return n;
}

namespace detail {

template <typename Fn>
inline void visit_parameters(Regressor& r, Fn&& fn) {
    auto visit_m = [&](MatrixXd& m) {
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) fn(m(i, j));
    };
    auto visit_v = [&](VectorXd& v) {
        for (int i = 0; i < v.size(); ++i) fn(v(i));
    };
    if (r.variant == Regressor::Variant::conv) {
        for (auto& f : r.filters) visit_m(f);
        visit_v(r.filter_bias);
    } else {
        visit_m(r.w1);
        visit_v(r.b1);
        visit_m(r.w2);
        visit_v(r.b2);
    }
    visit_m(r.w_out);
    visit_v(r.b_out);
}

template <typename Fn>
inline void visit_gradients(const Regressor& r, Gradients& g, Fn&& fn) {
    auto visit_m = [&](MatrixXd& m) {
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) fn(m(i, j));
    };
    auto visit_v = [&](VectorXd& v) {
        for (int i = 0; i < v.size(); ++i) fn(v(i));
    };
    if (r.variant == Regressor::Variant::conv) {
        for (auto& f : g.filters) visit_m(f);
        visit_v(g.filter_bias);
    } else {
        visit_m(g.w1);
        visit_v(g.b1);
        visit_m(g.w2);
        visit_v(g.b2);
    }
    visit_m(g.w_out);
    visit_v(g.b_out);
}

}  // namespace detail

inline VectorXd get_parameters(const Regressor& r) {
    VectorXd p(parameter_count(r));
    int k = 0;
    detail::visit_parameters(const_cast<Regressor&>(r), [&](double& v) { p(k++) = v; });
    return p;
}

inline void set_parameters(Regressor& r, const VectorXd& p) {
    if (p.size() != parameter_count(r)) throw ShapeMismatch("parameter vector size mismatch");
    int k = 0;
    detail::visit_parameters(r, [&](double& v) { v = p(k++); });
}

/// Mean squared error over a batch of normalized samples and its gradient
/// with respect to the flattened parameters. Dropout disabled.
inline double loss_and_gradient(const Regressor& r, const MatrixXd& inputs,
                                const MatrixXd& targets, VectorXd& grad_out) {
    const int batch = int(inputs.rows());
    const double denom = double(batch) * double(r.output_dim);
    detail::Gradients g = detail::Gradients::zero(r);
    detail::ForwardCache cache;
    Rng unused(0);
    double loss = 0.0;
    for (int s = 0; s < batch; ++s) {
        detail::forward(r, inputs.row(s).transpose(), false, unused, cache);
        VectorXd err = cache.y - targets.row(s).transpose();
        loss += err.squaredNorm();
        VectorXd dy = 2.0 * err / denom;
        detail::backward(r, cache, dy, g);
    }
    grad_out.resize(parameter_count(r));
    int k = 0;
    detail::visit_gradients(r, g, [&](double& v) { grad_out(k++) = v; });
    return loss / denom;
}

/// Forward pass in raw units with dropout disabled. The window is flattened
/// oldest frame first, matching build_dataset.
inline VectorXd predict_shape(const Regressor& r, const VectorXd& raw_window) {
    if (raw_window.size() != r.input_dim())
        throw ShapeMismatch("input window does not match the regressor layout");
    VectorXd x = (raw_window - r.input_mean).cwiseQuotient(r.input_std);
    detail::ForwardCache cache;
    Rng unused(0);
    detail::forward(r, x, false, unused, cache);
    VectorXd y = cache.y.cwiseProduct(r.target_std) + r.target_mean;
    if (!y.allFinite()) throw Diverged("regressor produced non-finite output");
    return y;
}

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
    int epochs = 100;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    int batch_size = 64;
    std::uint64_t seed = 1;
};

struct TrainResult {
    Regressor model;                    // parameters at the best validation loss
    std::vector<double> train_mse;      // raw units, dropout disabled
    std::vector<double> validation_mse;
    int best_epoch = -1;
};

namespace detail {

inline double raw_mse(const Regressor& r, const std::vector<Sample>& samples) {
    if (samples.empty()) return 0.0;
    double loss = 0.0;
    for (const auto& s : samples) loss += (predict_shape(r, s.input) - s.target).squaredNorm();
    return loss / (double(samples.size()) * double(r.output_dim));
}

}  // namespace detail

/// Mini-batch SGD with momentum on the mean squared error. Dropout is active
/// only while training; the returned model carries the parameters of the
/// best validation epoch. Deterministic given the seed.
inline TrainResult train_regressor(const Dataset& data, Regressor model,
                                   const TrainOptions& options = {}) {
    if (data.train.empty()) throw ConfigError("training split is empty");
    if (data.window != model.window || data.segment_count != model.segments ||
        data.shape_dim != model.output_dim)
        throw ShapeMismatch("dataset layout does not match the regressor");

    const int n = int(data.train.size());
    const int in_dim = model.input_dim(), out_dim = model.output_dim;

    // Standardization statistics from the training split.
    model.input_mean = VectorXd::Zero(in_dim);
    model.target_mean = VectorXd::Zero(out_dim);
    for (const auto& s : data.train) {
        model.input_mean += s.input;
        model.target_mean += s.target;
    }
    model.input_mean /= n;
    model.target_mean /= n;
    VectorXd in_var = VectorXd::Zero(in_dim), tgt_var = VectorXd::Zero(out_dim);
    for (const auto& s : data.train) {
        in_var += (s.input - model.input_mean).cwiseAbs2();
        tgt_var += (s.target - model.target_mean).cwiseAbs2();
    }
    model.input_std = (in_var / n).cwiseSqrt().cwiseMax(1e-9);
    model.target_std = (tgt_var / n).cwiseSqrt().cwiseMax(1e-12);

    MatrixXd x_norm(n, in_dim), y_norm(n, out_dim);
    for (int i = 0; i < n; ++i) {
        x_norm.row(i) = (data.train[std::size_t(i)].input - model.input_mean)
                            .cwiseQuotient(model.input_std);
        y_norm.row(i) = (data.train[std::size_t(i)].target - model.target_mean)
                            .cwiseQuotient(model.target_std);
    }

    Rng rng(options.seed);
    VectorXd velocity = VectorXd::Zero(parameter_count(model));
    VectorXd params = get_parameters(model);
    std::vector<int> order(std::size_t(n), 0);
    for (int i = 0; i < n; ++i) order[std::size_t(i)] = i;

    TrainResult result;
    double best_val = std::numeric_limits<double>::infinity();

    detail::ForwardCache cache;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i) std::swap(order[std::size_t(i)], order[rng.index(std::size_t(i) + 1)]);

        for (int start = 0; start < n; start += options.batch_size) {
            const int batch = std::min(options.batch_size, n - start);
            const double denom = double(batch) * double(out_dim);
            detail::Gradients g = detail::Gradients::zero(model);
            for (int b = 0; b < batch; ++b) {
                int idx = order[std::size_t(start + b)];
                detail::forward(model, x_norm.row(idx).transpose(), true, rng, cache);
                VectorXd dy = 2.0 * (cache.y - y_norm.row(idx).transpose()) / denom;
                detail::backward(model, cache, dy, g);
            }
            VectorXd grad(parameter_count(model));
            int k = 0;
            detail::visit_gradients(model, g, [&](double& v) { grad(k++) = v; });
            velocity = options.momentum * velocity - options.learning_rate * grad;
            params += velocity;
            set_parameters(model, params);
        }

        double train_loss = detail::raw_mse(model, data.train);
        double val_loss =
            data.validation.empty() ? train_loss : detail::raw_mse(model, data.validation);
        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw Diverged("training loss became non-finite");
        result.train_mse.push_back(train_loss);
        result.validation_mse.push_back(val_loss);
        if (val_loss < best_val) {
            best_val = val_loss;
            result.best_epoch = epoch;
            result.model = model;
        }
    }
    if (result.best_epoch < 0) result.model = model;

    return result;
}

// ---------------------------------------------------------------------------
// Regressor file format: JSON with layer sizes and row-major weight arrays.

namespace detail {

inline nlohmann::json matrix_to_json(const MatrixXd& m) {
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(std::size_t(m.size()));
    for (int i = 0; i < m.rows(); ++i)
        for (int jcol = 0; jcol < m.cols(); ++jcol) data.push_back(m(i, jcol));
    j["data"] = data;
    return j;
}

inline MatrixXd matrix_from_json(const nlohmann::json& j) {
    MatrixXd m(j.at("rows").get<int>(), j.at("cols").get<int>());
    auto data = j.at("data").get<std::vector<double>>();
    if (int(data.size()) != m.size()) throw ConfigError("weight array size mismatch");
    std::size_t k = 0;
    for (int i = 0; i < m.rows(); ++i)
        for (int jcol = 0; jcol < m.cols(); ++jcol) m(i, jcol) = data[k++];
    return m;
}

inline std::vector<double> vector_to_std(const VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline VectorXd vector_from_std(const std::vector<double>& v) {
    return Eigen::Map<const VectorXd>(v.data(), long(v.size()));
}

}  // namespace detail

inline nlohmann::json regressor_to_json(const Regressor& r) {
    nlohmann::json j;
    j["version"] = 1;
    j["variant"] = r.variant == Regressor::Variant::conv ? "conv" : "dense";
    j["activation"] = r.activation == Regressor::Activation::relu ? "relu" : "tanh";
    j["shape_mode"] = shape_mode_name(r.mode);
    j["window"] = r.window;
    j["segments"] = r.segments;
    j["output_dim"] = r.output_dim;
    if (r.variant == Regressor::Variant::conv) {
        j["filter_count"] = r.filter_count;
        j["filter_rows"] = r.filter_rows;
        j["filter_cols"] = r.filter_cols;
        j["conv_dropout"] = r.conv_dropout;
        j["filters"] = nlohmann::json::array();
        for (const auto& f : r.filters) j["filters"].push_back(detail::matrix_to_json(f));
        j["filter_bias"] = detail::vector_to_std(r.filter_bias);
    } else {
        j["dense_dropout"] = r.dense_dropout;
        j["w1"] = detail::matrix_to_json(r.w1);
        j["b1"] = detail::vector_to_std(r.b1);
        j["w2"] = detail::matrix_to_json(r.w2);
        j["b2"] = detail::vector_to_std(r.b2);
    }
    j["w_out"] = detail::matrix_to_json(r.w_out);
    j["b_out"] = detail::vector_to_std(r.b_out);
    j["input_mean"] = detail::vector_to_std(r.input_mean);
    j["input_std"] = detail::vector_to_std(r.input_std);
    j["target_mean"] = detail::vector_to_std(r.target_mean);
    j["target_std"] = detail::vector_to_std(r.target_std);
    return j;
}

inline Regressor regressor_from_json(const nlohmann::json& j) {
    Regressor r;
    try {
        std::string variant = j.at("variant").get<std::string>();
        r.variant = variant == "conv" ? Regressor::Variant::conv : Regressor::Variant::dense;
        r.activation = j.value("activation", std::string("relu")) == "tanh"
                           ? Regressor::Activation::tanh
                           : Regressor::Activation::relu;
        r.mode = shape_mode_from_name(j.at("shape_mode").get<std::string>());
        r.window = j.at("window").get<int>();
        r.segments = j.at("segments").get<int>();
        r.output_dim = j.at("output_dim").get<int>();
        if (r.variant == Regressor::Variant::conv) {
            r.filter_count = j.at("filter_count").get<int>();
            r.filter_rows = j.at("filter_rows").get<int>();
            r.filter_cols = j.at("filter_cols").get<int>();
            r.conv_dropout = j.at("conv_dropout").get<double>();
            for (const auto& f : j.at("filters")) r.filters.push_back(detail::matrix_from_json(f));
            r.filter_bias = detail::vector_from_std(j.at("filter_bias").get<std::vector<double>>());
        } else {
            r.dense_dropout = j.at("dense_dropout").get<double>();
            r.w1 = detail::matrix_from_json(j.at("w1"));
            r.b1 = detail::vector_from_std(j.at("b1").get<std::vector<double>>());
            r.w2 = detail::matrix_from_json(j.at("w2"));
            r.b2 = detail::vector_from_std(j.at("b2").get<std::vector<double>>());
        }
        r.w_out = detail::matrix_from_json(j.at("w_out"));
        r.b_out = detail::vector_from_std(j.at("b_out").get<std::vector<double>>());
        r.input_mean = detail::vector_from_std(j.at("input_mean").get<std::vector<double>>());
        r.input_std = detail::vector_from_std(j.at("input_std").get<std::vector<double>>());
        r.target_mean = detail::vector_from_std(j.at("target_mean").get<std::vector<double>>());
        r.target_std = detail::vector_from_std(j.at("target_std").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed regressor file: ") + e.what());
    }
    return r;
}

inline void save_regressor(const std::string& path, const Regressor& r) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write regressor file: " + path);
    out << regressor_to_json(r).dump(2) << "\n";
}

inline Regressor load_regressor(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open regressor file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("cannot parse regressor file: ") + e.what());
    }
    return regressor_from_json(j);
}

}  // namespace proprio
