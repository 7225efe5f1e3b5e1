/**
 * @file
 * @brief Run configuration of the command line tool.
 *
 * A run is described by one JSON file:
 * @code
 * {
 *   "data": { "temperature_csv": "temperature.csv", "bloom_csv": "bloom.csv" },
 *   "window": { "length": 10, "horizon": 10, "mode": "raw", "channels": "tavg" },
 *   "model": "svm",
 *   "regime": "ordinary",
 *   "svm": { "C": 1.0, "gamma": null, "tol": 0.001, "max_passes": 1000, "smote_neighbors": 5 },
 *   "lstm": { "num_layers": 2, "input_size": 1, "hidden_size": 30, "dropout": 0.5, "learning_rate": 0.001,
 *             "epochs": 30, "batch_size": 16, "optimizer": "adam", "pr_curves": false },
 *   "split": { "train_years": [1990, 2012], "test_years": [2013, 2020] },
 *   "seed": 42,
 *   "output_dir": "out"
 * }
 * @endcode
 * Relative paths are resolved against the directory of the configuration file. Only "data", "split" and
 * "output_dir" are required.
 */

#pragma once

#include "bloomcast/detail/hash.hpp"     // bloomcast::detail::fnv1a_64_hex
#include "bloomcast/exceptions.hpp"      // bloomcast::config_exception, bloomcast::file_exception
#include "bloomcast/lstm/model_io.hpp"   // bloomcast::lstm::lstm_hyper_from_json
#include "bloomcast/phenology_data.hpp"  // bloomcast::window_config
#include "bloomcast/svm/ovo.hpp"         // bloomcast::svm::training_regime

#include "fmt/format.h"       // fmt::format
#include "nlohmann/json.hpp"  // nlohmann::json

#include <cstdint>     // std::uint64_t
#include <filesystem>  // std::filesystem::path
#include <fstream>     // std::ifstream
#include <optional>    // std::optional
#include <sstream>     // std::stringstream
#include <string>      // std::string

namespace bloomcast::app {

enum class model_kind { svm, lstm };

[[nodiscard]] inline std::string_view to_string(const model_kind kind) noexcept {
    return kind == model_kind::svm ? "svm" : "lstm";
}

/// Inclusive range of years.
struct year_range {
    int first{};
    int last{};

    [[nodiscard]] bool contains(const int year) const noexcept { return year >= first && year <= last; }
    [[nodiscard]] bool overlaps(const year_range &other) const noexcept { return first <= other.last && other.first <= last; }
};

struct svm_settings {
    double c{ 1.0 };
    /// Derived from the training data if absent.
    std::optional<double> gamma{};
    double tol{ 1e-3 };
    std::size_t max_passes{ 1000 };
    std::size_t smote_neighbors{ 5 };
};

struct run_config {
    std::filesystem::path temperature_csv{};
    std::filesystem::path bloom_csv{};
    window_config window{};
    model_kind model{ model_kind::svm };
    svm::training_regime regime{ svm::training_regime::ordinary };
    svm_settings svm{};
    lstm::lstm_hyper lstm{};
    bool lstm_pr_curves{ false };
    year_range train_years{};
    year_range test_years{};
    std::uint64_t seed{ 0 };
    std::filesystem::path output_dir{};
    /// Fingerprint of the configuration document.
    std::string hash{};

    /**
     * @brief Check the cross-field invariants.
     * @throws bloomcast::config_exception on the first violation found
     */
    void validate() const {
        const auto fail = [](const std::string &msg) { throw config_exception{ msg }; };
        if (train_years.first > train_years.last || test_years.first > test_years.last) {
            fail(fmt::format("year ranges must be ordered: train [{}, {}], test [{}, {}]", train_years.first, train_years.last, test_years.first, test_years.last));
        }
        if (train_years.overlaps(test_years)) {
            fail(fmt::format("train years [{}, {}] and test years [{}, {}] overlap", train_years.first, train_years.last, test_years.first, test_years.last));
        }
        if (window.window_len < 1) {
            fail("window.length must be at least 1");
        }
        if (window.k < 1) {
            fail("window.horizon must be at least 1");
        }
        if (window.mode == feature_mode::stats && window.channels != feature_channels::tavg) {
            fail("stats features use the daily average only; set window.channels to \"tavg\"");
        }
        if (!(svm.c > 0.0)) {
            fail(fmt::format("svm.C must be positive, but is {}", svm.c));
        }
        if (svm.gamma && !(*svm.gamma > 0.0)) {
            fail(fmt::format("svm.gamma must be positive, but is {}", *svm.gamma));
        }
        if (!(svm.tol > 0.0) || svm.max_passes < 1 || svm.smote_neighbors < 1) {
            fail("svm.tol, svm.max_passes and svm.smote_neighbors must be positive");
        }
        try {
            lstm.validate();
        } catch (const invalid_argument_exception &e) {
            fail(fmt::format("lstm: {}", e.what()));
        }
        if (lstm.n_classes != static_cast<std::size_t>(window.k) + 1) {
            fail(fmt::format("the LSTM must have horizon + 1 = {} classes, not {}", window.k + 1, lstm.n_classes));
        }
        if (model == model_kind::lstm) {
            if (window.feature_len() % lstm.input_size != 0) {
                fail(fmt::format("{} features per window can't be split into LSTM steps of {} values", window.feature_len(), lstm.input_size));
            }
            if (regime == svm::training_regime::weighted) {
                fail("the weighted regime applies to the SVM only; use \"ordinary\" or \"oversampled\" for the LSTM");
            }
        }
    }
};

namespace detail {

[[nodiscard]] inline year_range parse_year_range(const nlohmann::json &j, const std::string_view name) {
    if (!j.is_array() || j.size() != 2) {
        throw config_exception{ fmt::format("split.{} must be an array [first_year, last_year]", name) };
    }
    return { j[0].get<int>(), j[1].get<int>() };
}

}  // namespace detail

/**
 * @brief Interpret a configuration document; relative paths are resolved against @p base_dir.
 * @throws bloomcast::config_exception on missing keys, wrong types, unknown enum values, or violated invariants
 */
[[nodiscard]] inline run_config parse_config(const nlohmann::json &doc, const std::filesystem::path &base_dir) {
    run_config cfg;
    try {
        const auto resolve = [&](const std::string &p) {
            const std::filesystem::path path{ p };
            return path.is_absolute() ? path : base_dir / path;
        };
        cfg.temperature_csv = resolve(doc.at("data").at("temperature_csv").get<std::string>());
        cfg.bloom_csv = resolve(doc.at("data").at("bloom_csv").get<std::string>());
        cfg.output_dir = resolve(doc.at("output_dir").get<std::string>());

        const nlohmann::json window = doc.value("window", nlohmann::json::object());
        const int length = window.value("length", 10);
        if (length < 1) {
            throw config_exception{ fmt::format("window.length must be at least 1, but is {}", length) };
        }
        cfg.window.window_len = static_cast<std::size_t>(length);
        cfg.window.k = window.value("horizon", 10);
        const std::string mode = window.value("mode", std::string{ "raw" });
        if (mode != "raw" && mode != "stats") {
            throw config_exception{ fmt::format("window.mode must be \"raw\" or \"stats\", not \"{}\"", mode) };
        }
        cfg.window.mode = mode == "raw" ? feature_mode::raw : feature_mode::stats;
        const std::string channels = window.value("channels", std::string{ "tavg" });
        if (channels != "tavg" && channels != "extremes") {
            throw config_exception{ fmt::format("window.channels must be \"tavg\" or \"extremes\", not \"{}\"", channels) };
        }
        cfg.window.channels = channels == "tavg" ? feature_channels::tavg : feature_channels::extremes;

        const std::string model = doc.value("model", std::string{ "svm" });
        if (model != "svm" && model != "lstm") {
            throw config_exception{ fmt::format("model must be \"svm\" or \"lstm\", not \"{}\"", model) };
        }
        cfg.model = model == "svm" ? model_kind::svm : model_kind::lstm;
        const std::string regime = doc.value("regime", std::string{ "ordinary" });
        const auto parsed_regime = svm::regime_from_string(regime);
        if (!parsed_regime) {
            throw config_exception{ fmt::format("regime must be \"ordinary\", \"weighted\" or \"oversampled\", not \"{}\"", regime) };
        }
        cfg.regime = *parsed_regime;

        const nlohmann::json svm = doc.value("svm", nlohmann::json::object());
        cfg.svm.c = svm.value("C", cfg.svm.c);
        if (svm.contains("gamma") && !svm.at("gamma").is_null()) {
            cfg.svm.gamma = svm.at("gamma").get<double>();
        }
        cfg.svm.tol = svm.value("tol", cfg.svm.tol);
        cfg.svm.max_passes = svm.value("max_passes", cfg.svm.max_passes);
        cfg.svm.smote_neighbors = svm.value("smote_neighbors", cfg.svm.smote_neighbors);

        cfg.seed = doc.value("seed", std::uint64_t{ 0 });
        const nlohmann::json lstm = doc.value("lstm", nlohmann::json::object());
        lstm::lstm_hyper defaults;
        defaults.input_size = cfg.window.channels == feature_channels::extremes ? 2 : 1;
        defaults.seed = cfg.seed;
        defaults.n_classes = static_cast<std::size_t>(std::max(cfg.window.k, 0)) + 1;
        cfg.lstm = lstm::lstm_hyper_from_json(lstm, defaults);
        cfg.lstm_pr_curves = lstm.value("pr_curves", false);

        const nlohmann::json &split = doc.at("split");
        cfg.train_years = detail::parse_year_range(split.at("train_years"), "train_years");
        cfg.test_years = detail::parse_year_range(split.at("test_years"), "test_years");
    } catch (const nlohmann::json::exception &e) {
        throw config_exception{ fmt::format("invalid configuration: {}", e.what()) };
    } catch (const invalid_argument_exception &e) {
        throw config_exception{ fmt::format("invalid configuration: {}", e.what()) };
    }
    cfg.hash = bloomcast::detail::fnv1a_64_hex(doc.dump());
    cfg.validate();
    return cfg;
}

/**
 * @brief Read and interpret a configuration file.
 * @throws bloomcast::file_exception if the file can't be read
 * @throws bloomcast::config_exception if it is not valid JSON or not a valid configuration
 */
[[nodiscard]] inline run_config load_config(const std::filesystem::path &path) {
    std::ifstream in{ path };
    if (!in) {
        throw file_exception{ fmt::format("couldn't open configuration file '{}'", path.string()) };
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(buffer.str());
    } catch (const nlohmann::json::parse_error &e) {
        throw config_exception{ fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()) };
    }
    return parse_config(doc, path.parent_path());
}

}  // namespace bloomcast::app
