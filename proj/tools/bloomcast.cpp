/**
 * @file
 * @brief Command line entry point: `bloomcast {train|evaluate|predict|report} --config run.json`.
 *
 * Exit codes: 0 success, 1 I/O or malformed input, 2 invalid configuration, 3 numeric failure.
 */

#include "bloomcast/app/config.hpp"
#include "bloomcast/app/pipeline.hpp"
#include "bloomcast/exceptions.hpp"

#include "CLI11.hpp"
#include "fmt/core.h"

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

namespace {

enum exit_code : int { ok = 0, io_failure = 1, config_failure = 2, numeric_failure = 3 };

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{ "Peak bloom date classification from daily temperatures" };
    app.require_subcommand(1);

    std::string config_path;
    std::string model_path;
    std::string date;

    CLI::App *train = app.add_subcommand("train", "train the configured model on the training years");
    train->add_option("-c,--config", config_path, "run configuration (JSON)")->required();
    train->add_option("-m,--model", model_path, "model file to write (default: <output_dir>/model.json)");

    CLI::App *evaluate = app.add_subcommand("evaluate", "evaluate a trained model on the test years");
    evaluate->add_option("-c,--config", config_path, "run configuration (JSON)")->required();
    evaluate->add_option("-m,--model", model_path, "model file (default: <output_dir>/model.json)");

    CLI::App *predict = app.add_subcommand("predict", "classify the window ending at a date");
    predict->add_option("-c,--config", config_path, "run configuration (JSON)")->required();
    predict->add_option("-m,--model", model_path, "model file (default: <output_dir>/model.json)");
    predict->add_option("-d,--date", date, "last day of the window (YYYY-MM-DD)")->required();

    CLI::App *report = app.add_subcommand("report", "train and evaluate the SVM under all three imbalance regimes");
    report->add_option("-c,--config", config_path, "run configuration (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? exit_code::ok : exit_code::config_failure;
    }

    try {
        const bloomcast::app::run_config cfg = bloomcast::app::load_config(config_path);
        const std::filesystem::path model = model_path.empty() ? bloomcast::app::default_model_path(cfg) : std::filesystem::path{ model_path };

        if (train->parsed()) {
            const auto summary = bloomcast::app::cmd_train(cfg, model);
            fmt::print("trained {} on {} samples; model written to {}\n", bloomcast::app::to_string(cfg.model), summary.train_samples, summary.model_path.string());
        } else if (evaluate->parsed()) {
            const auto result = bloomcast::app::cmd_evaluate(cfg, model);
            fmt::print("accuracy {:.2f}%  precision {:.3f}  recall {:.3f}  f1 {:.3f}  (reports in {})\n", result.accuracy, result.precision, result.recall, result.f1, cfg.output_dir.string());
        } else if (predict->parsed()) {
            const auto result = bloomcast::app::cmd_predict(cfg, model, date);
            fmt::print("{}: class {} ({})\n", date, result.label, result.message);
        } else if (report->parsed()) {
            const auto reports = bloomcast::app::cmd_report(cfg);
            fmt::print("{:<12} {:>9} {:>9} {:>9} {:>9}\n", "regime", "accuracy", "precision", "recall", "f1");
            const char *names[] = { "ordinary", "weighted", "oversampled" };
            for (std::size_t i = 0; i < reports.size(); ++i) {
                fmt::print("{:<12} {:>9.2f} {:>9.3f} {:>9.3f} {:>9.3f}\n", names[i], reports[i].accuracy, reports[i].precision, reports[i].recall, reports[i].f1);
            }
        }
    } catch (const bloomcast::file_exception &e) {
        fmt::print(stderr, "I/O error: {}\n", e.what());
        return exit_code::io_failure;
    } catch (const bloomcast::data_format_exception &e) {
        fmt::print(stderr, "input error: {}\n", e.what());
        return exit_code::io_failure;
    } catch (const bloomcast::config_exception &e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return exit_code::config_failure;
    } catch (const bloomcast::invalid_argument_exception &e) {
        fmt::print(stderr, "invalid argument: {}\n", e.what());
        return exit_code::config_failure;
    } catch (const bloomcast::convergence_exception &e) {
        fmt::print(stderr, "numeric failure: {}\n", e.what());
        return exit_code::numeric_failure;
    } catch (const bloomcast::divergence_exception &e) {
        fmt::print(stderr, "numeric failure: {}\n", e.what());
        return exit_code::numeric_failure;
    } catch (const std::exception &e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return exit_code::io_failure;
    }
    return exit_code::ok;
}
