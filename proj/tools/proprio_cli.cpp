// Command-line front end: forward simulation, regressor training, shape and
// force estimation, and parameter calibration over scenario config files.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "proprio/calibration.hpp"
#include "proprio/core.hpp"
#include "proprio/pipeline.hpp"
#include "proprio/regressor.hpp"
#include "proprio/scenario.hpp"
#include "proprio/sensor.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliContext {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool exact_shape = false;

    json config;
    proprio::Scenario scenario;

    fs::path input_path(const std::string& rel) const {
        fs::path p(rel);
        if (p.is_absolute()) return p;
        return fs::path(config_path).parent_path() / p;
    }
    fs::path output_path(const std::string& rel) const { return fs::path(out_dir) / rel; }
};

std::string manifest_path_for(const fs::path& csv) {
    fs::path p = csv;
    p.replace_extension("");
    return p.string() + ".manifest.json";
}

void load_config(CliContext& ctx) {
    std::ifstream in(ctx.config_path);
    if (!in) throw proprio::ConfigError("cannot open config: " + ctx.config_path);
    try {
        in >> ctx.config;
    } catch (const json::exception& e) {
        throw proprio::ConfigError(std::string("cannot parse config: ") + e.what());
    }
    if (!ctx.config.contains("scenario"))
        throw proprio::ConfigError("config is missing a scenario section");
    ctx.scenario = proprio::scenario_from_json(ctx.config.at("scenario"));
    if (ctx.seed_set) ctx.scenario.seed = ctx.seed;
    fs::create_directories(ctx.out_dir);
}

double elapsed_s(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int run_simulate(CliContext& ctx) {
    auto start = std::chrono::steady_clock::now();
    json section = ctx.config.value("simulate", json::object());
    std::string out_name = section.value("recording_out", ctx.scenario.name + "_recording.csv");

    proprio::BuiltScenario built = proprio::build_scenario(ctx.scenario);
    proprio::Recording rec = proprio::run_forward(built);
    fs::path csv = ctx.output_path(out_name);
    proprio::write_recording(csv.string(), manifest_path_for(csv), rec, ctx.scenario);
    std::cerr << "simulate: " << rec.frame_count() << " frames -> " << csv.string() << " ("
              << elapsed_s(start) << " s)\n";
    return 0;
}

int run_train(CliContext& ctx) {
    auto start = std::chrono::steady_clock::now();
    if (!ctx.config.contains("train")) throw proprio::ConfigError("config has no train section");
    json section = ctx.config.at("train");
    if (!section.contains("recordings"))
        throw proprio::ConfigError("train section needs a recordings list");

    proprio::BuiltScenario built = proprio::build_scenario(ctx.scenario);
    std::vector<proprio::SignalSeries> series;
    std::vector<proprio::Recording> recordings;
    for (const auto& rel : section.at("recordings")) {
        fs::path csv = ctx.input_path(rel.get<std::string>());
        recordings.push_back(proprio::read_recording(csv.string(), manifest_path_for(csv)));
        series.push_back(proprio::recording_signals(recordings.back()));
    }

    const bool strip = ctx.scenario.device == proprio::DeviceKind::strip;
    proprio::Regressor model =
        strip ? proprio::make_strip_regressor(built.layout.segment_count(), built.shape_dim(),
                                              proprio::Rng(ctx.scenario.seed).fork(11).next_u64())
              : proprio::make_finger_regressor(built.layout.segment_count(), built.shape_dim(),
                                               proprio::Rng(ctx.scenario.seed).fork(11).next_u64());
    model.mode = ctx.scenario.mode;

    proprio::Dataset dataset = proprio::build_dataset(
        series, model.window,
        strip ? proprio::TargetKind::step_delta : proprio::TargetKind::rest_offset);
    int bins = section.value("resample_bins", 20);
    if (bins > 1)
        dataset = proprio::resample_dataset(dataset, bins,
                                            proprio::Rng(ctx.scenario.seed).fork(12).next_u64());

    if (section.contains("dataset_out")) {
        std::string base = section.at("dataset_out").get<std::string>();
        for (std::size_t i = 0; i < series.size(); ++i) {
            fs::path path = ctx.output_path(
                series.size() == 1 ? base
                                   : (fs::path(base).stem().string() + "_" + std::to_string(i) +
                                      fs::path(base).extension().string()));
            proprio::write_signal_csv(path.string(), recordings[i].times, series[i]);
            proprio::write_dataset_manifest(manifest_path_for(path), built.layout,
                                            ctx.scenario.mode, ctx.scenario.rate_hz);
        }
    }

    proprio::TrainOptions options;
    options.epochs = section.value("epochs", 80);
    options.learning_rate = section.value("learning_rate", 1e-3);
    options.momentum = section.value("momentum", 0.9);
    options.batch_size = section.value("batch_size", 64);
    options.seed = proprio::Rng(ctx.scenario.seed).fork(13).next_u64();

    proprio::TrainResult result = proprio::train_regressor(dataset, model, options);
    std::string out_name = section.value("regressor_out", ctx.scenario.name + "_regressor.json");
    proprio::save_regressor(ctx.output_path(out_name).string(), result.model);
    std::cerr << "train: " << dataset.train.size() << " samples, best epoch " << result.best_epoch
              << ", validation mse " << result.validation_mse[std::size_t(result.best_epoch)]
              << " -> " << ctx.output_path(out_name).string() << " (" << elapsed_s(start)
              << " s)\n";
    return 0;
}

int run_estimate(CliContext& ctx) {
    auto start = std::chrono::steady_clock::now();
    if (!ctx.config.contains("estimate"))
        throw proprio::ConfigError("config has no estimate section");
    json section = ctx.config.at("estimate");
    if (!section.contains("recording"))
        throw proprio::ConfigError("estimate section needs a recording");

    proprio::BuiltScenario built = proprio::build_scenario(ctx.scenario);
    fs::path csv = ctx.input_path(section.at("recording").get<std::string>());
    proprio::Recording rec = proprio::read_recording(csv.string(), manifest_path_for(csv));

    bool exact = ctx.exact_shape || section.value("exact_shape", false);
    proprio::Regressor regressor;
    if (!exact) {
        if (!section.contains("regressor"))
            throw proprio::ConfigError("estimate section needs a regressor (or --exact-shape)");
        regressor = proprio::load_regressor(
            ctx.input_path(section.at("regressor").get<std::string>()).string());
    }

    proprio::ReplayResult replay =
        proprio::reconstruct_and_score(built, rec, exact ? nullptr : &regressor);

    proprio::write_metrics(
        ctx.output_path(section.value("metrics_out", "metrics.json")).string(), replay.metrics);
    proprio::write_force_traces(ctx.output_path(section.value("forces_out", "forces.csv")).string(),
                                rec, replay);
    proprio::write_marker_traces(
        ctx.output_path(section.value("markers_out", "markers.csv")).string(), rec, replay);
    std::cerr << "estimate: " << rec.frame_count() << " frames, boundary error "
              << replay.metrics.boundary_marker_error_pct << " %, tip error "
              << replay.metrics.tip_marker_error_pct << " %, mean force error "
              << replay.metrics.mean_force_error_pct << " % (" << elapsed_s(start) << " s)\n";
    return 0;
}

int run_calibrate(CliContext& ctx) {
    auto start = std::chrono::steady_clock::now();
    if (!ctx.config.contains("calibrate"))
        throw proprio::ConfigError("config has no calibrate section");
    json section = ctx.config.at("calibrate");
    std::string mode = section.value("mode", "young_modulus");
    std::string out_name = section.value("report_out", "calibration.json");

    proprio::CalibrationResult result;
    if (mode == "young_modulus") {
        auto interval = section.at("interval_pa").get<std::vector<double>>();
        if (interval.size() != 2) throw proprio::ConfigError("interval_pa needs two entries");
        proprio::PressureSweepReference ref = proprio::read_sweep_reference(
            ctx.input_path(section.at("sweep").get<std::string>()).string());
        result = proprio::identify_young_modulus(ctx.scenario, ref,
                                                 interval[0] * proprio::PaToInternal,
                                                 interval[1] * proprio::PaToInternal);
    } else if (mode == "scaling_factor") {
        auto interval = section.at("interval").get<std::vector<double>>();
        if (interval.size() != 2) throw proprio::ConfigError("interval needs two entries");
        fs::path csv = ctx.input_path(section.at("recording").get<std::string>());
        proprio::Recording rec = proprio::read_recording(csv.string(), manifest_path_for(csv));
        result = proprio::calibrate_scaling_factor(ctx.scenario, rec, interval[0], interval[1]);
    } else {
        throw proprio::ConfigError("unknown calibrate mode: " + mode);
    }
    proprio::write_calibration_report(ctx.output_path(out_name).string(), result);
    std::cerr << "calibrate: " << mode << " -> " << ctx.output_path(out_name).string() << " ("
              << elapsed_s(start) << " s)\n";
    return 0;
}

bool is_validation_error(const proprio::Error& e) {
    return e.code() == "config_error" || e.code() == "shape_mismatch" ||
           e.code() == "point_outside_mesh";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"soft-body proprioception toolkit"};
    app.require_subcommand(1);

    CliContext ctx;
    for (const std::string name : {"simulate", "train", "estimate", "calibrate"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", ctx.config_path, "scenario config file")->required();
        sub->add_option("--out", ctx.out_dir, "output directory");
        sub->add_option("--seed", ctx.seed, "override the scenario seed")
            ->each([&ctx](const std::string&) { ctx.seed_set = true; });
        if (name == "estimate")
            sub->add_flag("--exact-shape", ctx.exact_shape, "bypass the regressor");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: cli_usage: " << e.what() << "\n" << app.help() << "\n";
        return 1;
    }

    try {
        load_config(ctx);
        if (app.got_subcommand("simulate")) return run_simulate(ctx);
        if (app.got_subcommand("train")) return run_train(ctx);
        if (app.got_subcommand("estimate")) return run_estimate(ctx);
        if (app.got_subcommand("calibrate")) return run_calibrate(ctx);
    } catch (const proprio::Error& e) {
        std::cerr << "error: " << e.code() << ": " << e.what() << "\n";
        return is_validation_error(e) ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
