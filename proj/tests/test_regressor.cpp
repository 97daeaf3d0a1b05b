#include <doctest.h>

#include "proprio/core.hpp"
#include "proprio/regressor.hpp"
#include "proprio/sensor.hpp"

using namespace proprio;

namespace {

/// Noiseless linear mapping from standard-normal inputs.
Dataset linear_dataset(int samples, int in_dim, int out_dim, int window, std::uint64_t seed) {
    Rng rng(seed);
    MatrixXd a(out_dim, window * in_dim);
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) a(i, j) = rng.uniform(-0.4, 0.4);
    Dataset d;
    d.window = window;
    d.segment_count = in_dim;
    d.shape_dim = out_dim;
    for (int s = 0; s < samples; ++s) {
        Sample sample;
        sample.input.resize(window * in_dim);
        for (int i = 0; i < sample.input.size(); ++i) sample.input(i) = rng.gaussian();
        sample.target = a * sample.input;
        (s % 8 == 7 ? d.validation : d.train).push_back(std::move(sample));
    }
    return d;
}

double target_variance(const Dataset& d) {
    VectorXd mean = VectorXd::Zero(d.shape_dim);
    for (const auto& s : d.validation) mean += s.target;
    mean /= double(d.validation.size());
    double var = 0.0;
    for (const auto& s : d.validation) var += (s.target - mean).squaredNorm();
    return var / (double(d.validation.size()) * d.shape_dim);
}

double fd_gradient(Regressor& model, const MatrixXd& inputs, const MatrixXd& targets, int index,
                   double step) {
    VectorXd params = get_parameters(model);
    VectorXd probe = params;
    VectorXd unused;
    probe(index) = params(index) + step;
    set_parameters(model, probe);
    double hi = loss_and_gradient(model, inputs, targets, unused);
    probe(index) = params(index) - step;
    set_parameters(model, probe);
    double lo = loss_and_gradient(model, inputs, targets, unused);
    set_parameters(model, params);
    return (hi - lo) / (2 * step);
}

void check_gradients(Regressor model, std::uint64_t seed) {
    Rng rng(seed);
    const int batch = 6;
    MatrixXd inputs(batch, model.input_dim()), targets(batch, model.output_dim);
    for (int i = 0; i < batch; ++i) {
        for (int j = 0; j < model.input_dim(); ++j) inputs(i, j) = rng.gaussian();
        for (int j = 0; j < model.output_dim; ++j) targets(i, j) = rng.gaussian();
    }
    VectorXd grad;
    loss_and_gradient(model, inputs, targets, grad);
    for (int check = 0; check < 5; ++check) {
        int index = int(rng.index(std::size_t(parameter_count(model))));
        double numeric = fd_gradient(model, inputs, targets, index, 1e-5);
        double denom = std::max(std::abs(numeric), 1e-8);
        CHECK(std::abs(grad(index) - numeric) / denom < 1e-4);
    }
}

}  // namespace

TEST_SUITE("regressor") {

TEST_CASE("strip preset consumes a 5-frame window and conv layout") {
    Regressor r = make_strip_regressor(7, 8);
    CHECK(r.window == 5);
    CHECK(r.input_dim() == 35);
    CHECK(r.filter_count == 32);
    CHECK(r.filter_rows == 3);
    CHECK(r.conv_dropout == 0.5);
    CHECK(int(r.w_out.cols()) == 32 * 3 * 5);
    VectorXd out = predict_shape(r, VectorXd::Zero(35));
    CHECK(out.size() == 8);
}

TEST_CASE("finger preset is the 32/16 dense stack over one frame") {
    Regressor r = make_finger_regressor(7, 16);
    CHECK(r.window == 1);
    CHECK(r.w1.rows() == 32);
    CHECK(r.w2.rows() == 16);
    CHECK(r.dense_dropout == 0.2);
    CHECK(predict_shape(r, VectorXd::Zero(7)).size() == 16);
}

TEST_CASE("analytic gradients match central finite differences") {
    check_gradients(make_finger_regressor(7, 6, 21), 1001);
    check_gradients(make_strip_regressor(7, 8, 22), 1002);
}

TEST_CASE("a zero-weight network outputs its bias") {
    Regressor r = make_finger_regressor(5, 3);
    set_parameters(r, VectorXd::Zero(parameter_count(r)));
    VectorXd params = get_parameters(r);
    r.b_out << 0.5, -0.25, 1.5;
    Rng rng(3);
    VectorXd input(5);
    for (int i = 0; i < 5; ++i) input(i) = rng.uniform(-1, 1);
    VectorXd out = predict_shape(r, input);
    CHECK((out - r.b_out).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("inference is pure") {
    Regressor r = make_strip_regressor(7, 8, 5);
    Rng rng(4);
    VectorXd input(35);
    for (int i = 0; i < 35; ++i) input(i) = rng.uniform(9000, 12000);
    VectorXd a = predict_shape(r, input);
    VectorXd b = predict_shape(r, input);
    for (int i = 0; i < a.size(); ++i) CHECK(a(i) == b(i));
}

TEST_CASE("mismatched windows are rejected") {
    Regressor r = make_strip_regressor(7, 8);
    CHECK_THROWS_AS(predict_shape(r, VectorXd::Zero(7)), ShapeMismatch);
}

TEST_CASE("a linear mapping is learned to high accuracy") {
    // Learnability oracle: dropout off isolates the fit from regularization
    // noise, which otherwise floors the error at about a percent of the
    // target variance.
    Dataset d = linear_dataset(12000, 5, 2, 1, 2024);
    Regressor prototype = make_finger_regressor(5, 2, 31);
    prototype.dense_dropout = 0.0;
    TrainOptions options;
    options.epochs = 200;
    options.seed = 9;
    options.learning_rate = 1e-2;
    TrainResult result = train_regressor(d, prototype, options);
    double var = target_variance(d);
    double best = result.validation_mse[std::size_t(result.best_epoch)];
    CHECK(best < 1e-4 * var);
}

TEST_CASE("the window preset also learns a linear mapping") {
    Dataset d = linear_dataset(8000, 7, 4, 5, 2025);
    Regressor prototype = make_strip_regressor(7, 4, 33);
    prototype.conv_dropout = 0.0;
    TrainOptions options;
    options.epochs = 200;
    options.seed = 10;
    options.learning_rate = 1e-2;
    TrainResult result = train_regressor(d, prototype, options);
    double var = target_variance(d);
    CHECK(result.validation_mse[std::size_t(result.best_epoch)] < 1e-4 * var);
}

TEST_CASE("constant targets collapse onto the bias") {
    Dataset d;
    d.window = 1;
    d.segment_count = 4;
    d.shape_dim = 2;
    Rng rng(6);
    VectorXd constant(2);
    constant << 0.75, -0.3;
    for (int s = 0; s < 400; ++s) {
        Sample sample;
        sample.input.resize(4);
        for (int i = 0; i < 4; ++i) sample.input(i) = rng.gaussian();
        sample.target = constant;
        (s % 8 == 7 ? d.validation : d.train).push_back(std::move(sample));
    }
    TrainOptions options;
    options.epochs = 50;
    TrainResult result = train_regressor(d, make_finger_regressor(4, 2, 41), options);
    CHECK(result.validation_mse[std::size_t(result.best_epoch)] < 1e-10);
    VectorXd out = predict_shape(result.model, VectorXd::Zero(4));
    CHECK((out - constant).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("training loss descends steadily on the linear problem") {
    Dataset d = linear_dataset(3000, 7, 6, 1, 77);
    Regressor prototype = make_finger_regressor(7, 6, 51);
    prototype.dense_dropout = 0.0;  // isolate the optimizer from mask noise
    TrainOptions options;
    options.epochs = 120;
    options.seed = 12;
    TrainResult result = train_regressor(d, prototype, options);
    for (std::size_t e = 1; e < result.train_mse.size(); ++e)
        CHECK(result.train_mse[e] <= result.train_mse[e - 1] + 1e-6);
}

TEST_CASE("json round trip preserves every parameter bit") {
    for (bool conv : {false, true}) {
        Regressor r = conv ? make_strip_regressor(7, 8, 61) : make_finger_regressor(7, 16, 62);
        r.input_mean = VectorXd::Constant(r.input_dim(), 10000.0);
        r.input_std = VectorXd::Constant(r.input_dim(), 250.0);
        Regressor back = regressor_from_json(regressor_to_json(r));
        VectorXd pa = get_parameters(r), pb = get_parameters(back);
        REQUIRE(pa.size() == pb.size());
        for (int i = 0; i < pa.size(); ++i) CHECK(pa(i) == pb(i));
        CHECK(back.window == r.window);
        CHECK(back.mode == r.mode);
        for (int i = 0; i < r.input_dim(); ++i) CHECK(back.input_mean(i) == r.input_mean(i));
    }
}

TEST_CASE("training rejects mismatched datasets") {
    Dataset d = linear_dataset(100, 5, 3, 1, 1);
    CHECK_THROWS_AS(train_regressor(d, make_finger_regressor(7, 3, 1), TrainOptions{}),
                    ShapeMismatch);
}

}  // TEST_SUITE
