/**
 * @file
 * @brief The train / evaluate / predict / report commands behind the command line tool.
 *
 * Model files wrap the SVM or LSTM serialization in an envelope recording the window construction, so that
 * evaluation and prediction rebuild exactly the features the model was trained on:
 * @code
 * { "format": "bloomcast-model", "version": 1, "kind": "svm" | "lstm", "config_hash": "...",
 *   "window": { "length": 10, "horizon": 10, "mode": "raw", "channels": "tavg" },
 *   "model": { ... },
 *   "input_scaling": { "shift": [...], "scale": [...] } }   // LSTM only
 * @endcode
 */

#pragma once

#include "bloomcast/app/config.hpp"      // bloomcast::app::run_config
#include "bloomcast/exceptions.hpp"      // bloomcast::file_exception, bloomcast::config_exception, ...
#include "bloomcast/imbalance.hpp"       // bloomcast::smote_oversample
#include "bloomcast/lstm/model_io.hpp"   // bloomcast::lstm::to_json, bloomcast::lstm::lstm_model_from_json
#include "bloomcast/lstm/training.hpp"   // bloomcast::lstm::train_lstm
#include "bloomcast/metrics.hpp"         // bloomcast::metrics::evaluate
#include "bloomcast/phenology_data.hpp"  // bloomcast::build_windows
#include "bloomcast/svm/model_io.hpp"    // bloomcast::svm::to_json, bloomcast::svm::ovo_model_from_json
#include "bloomcast/svm/ovo.hpp"         // bloomcast::svm::train_ovo

#include "fmt/format.h"       // fmt::format
#include "nlohmann/json.hpp"  // nlohmann::json

#include <array>       // std::array
#include <cmath>       // std::sqrt
#include <filesystem>  // std::filesystem::path, std::filesystem::create_directories
#include <fstream>     // std::ifstream, std::ofstream
#include <optional>    // std::optional
#include <sstream>     // std::stringstream
#include <string>      // std::string
#include <vector>      // std::vector

namespace bloomcast::app {

inline constexpr std::string_view model_file_format = "bloomcast-model";
inline constexpr int model_file_version = 1;

/// Per-feature z-score transform fitted on training data (LSTM inputs).
struct input_scaling {
    std::vector<double> shift{};
    std::vector<double> scale{};

    [[nodiscard]] static input_scaling fit(const dataset &data) {
        input_scaling s{ std::vector<double>(data.feature_len, 0.0), std::vector<double>(data.feature_len, 1.0) };
        if (data.samples.empty()) {
            return s;
        }
        const auto n = static_cast<double>(data.samples.size());
        for (const window_sample &sample : data.samples) {
            for (std::size_t f = 0; f < data.feature_len; ++f) {
                s.shift[f] += sample.features[f] / n;
            }
        }
        std::vector<double> var(data.feature_len, 0.0);
        for (const window_sample &sample : data.samples) {
            for (std::size_t f = 0; f < data.feature_len; ++f) {
                var[f] += (sample.features[f] - s.shift[f]) * (sample.features[f] - s.shift[f]) / n;
            }
        }
        for (std::size_t f = 0; f < data.feature_len; ++f) {
            s.scale[f] = var[f] > 0.0 ? std::sqrt(var[f]) : 1.0;
        }
        return s;
    }

    [[nodiscard]] std::vector<double> apply(std::vector<double> features) const {
        for (std::size_t f = 0; f < features.size(); ++f) {
            features[f] = (features[f] - shift[f]) / scale[f];
        }
        return features;
    }

    [[nodiscard]] dataset apply(dataset data) const {
        for (window_sample &sample : data.samples) {
            sample.features = apply(std::move(sample.features));
        }
        return data;
    }
};

/// A trained model together with the window construction it expects.
struct trained_model {
    model_kind kind{ model_kind::svm };
    window_config window{};
    std::string config_hash{};
    svm::ovo_model svm{};
    lstm::lstm_hyper hyper{};
    lstm::lstm_params lstm{};
    input_scaling scaling{};

    /// Predicted class and per-class scores (vote shares for the SVM, probabilities for the LSTM).
    [[nodiscard]] std::pair<int, std::vector<double>> predict(const std::vector<double> &features) const {
        const std::size_t n_classes = static_cast<std::size_t>(window.k) + 1;
        std::vector<double> scores(n_classes, 0.0);
        if (kind == model_kind::svm) {
            const std::vector<double> votes = svm::predict_scores(svm, features);
            for (std::size_t c = 0; c < svm.classes.size(); ++c) {
                scores[static_cast<std::size_t>(svm.classes[c])] = votes[c];
            }
            return { svm::predict_ovo(svm, features), std::move(scores) };
        }
        const lstm::VectorXd probs = lstm::predict_probabilities(lstm, hyper, lstm::to_sequence(scaling.apply(features), hyper.input_size));
        for (std::size_t c = 0; c < n_classes; ++c) {
            scores[c] = probs(static_cast<Eigen::Index>(c));
        }
        return { static_cast<int>(lstm::argmax(probs)), std::move(scores) };
    }
};

namespace detail {

[[nodiscard]] inline nlohmann::json window_to_json(const window_config &w) {
    return { { "length", w.window_len }, { "horizon", w.k }, { "mode", to_string(w.mode) }, { "channels", to_string(w.channels) } };
}

[[nodiscard]] inline window_config window_from_json(const nlohmann::json &j) {
    window_config w;
    w.window_len = j.at("length").get<std::size_t>();
    w.k = j.at("horizon").get<int>();
    w.mode = j.at("mode").get<std::string>() == "stats" ? feature_mode::stats : feature_mode::raw;
    w.channels = j.at("channels").get<std::string>() == "extremes" ? feature_channels::extremes : feature_channels::tavg;
    return w;
}

inline void write_text(const std::filesystem::path &path, const std::string &content) {
    std::ofstream out{ path, std::ios::binary };
    if (!out) {
        throw file_exception{ fmt::format("couldn't open '{}' for writing", path.string()) };
    }
    out << content;
    if (!out) {
        throw file_exception{ fmt::format("couldn't write '{}'", path.string()) };
    }
}

inline void ensure_directory(const std::filesystem::path &dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw file_exception{ fmt::format("couldn't create directory '{}': {}", dir.string(), ec.message()) };
    }
}

}  // namespace detail

[[nodiscard]] inline nlohmann::json to_json(const trained_model &model) {
    nlohmann::json doc{ { "format", model_file_format },
                        { "version", model_file_version },
                        { "kind", to_string(model.kind) },
                        { "config_hash", model.config_hash },
                        { "window", detail::window_to_json(model.window) } };
    if (model.kind == model_kind::svm) {
        doc["model"] = svm::to_json(model.svm);
    } else {
        doc["model"] = lstm::to_json(model.hyper, model.lstm);
        doc["input_scaling"] = { { "shift", model.scaling.shift }, { "scale", model.scaling.scale } };
    }
    return doc;
}

inline void save_model(const trained_model &model, const std::filesystem::path &path) {
    detail::write_text(path, to_json(model).dump() + "\n");
}

/**
 * @throws bloomcast::file_exception if the file can't be read
 * @throws bloomcast::data_format_exception if it isn't a bloomcast model
 */
[[nodiscard]] inline trained_model load_model(const std::filesystem::path &path) {
    std::ifstream in{ path };
    if (!in) {
        throw file_exception{ fmt::format("couldn't open model file '{}'", path.string()) };
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        const nlohmann::json doc = nlohmann::json::parse(buffer.str());
        if (doc.at("format").get<std::string>() != model_file_format || doc.at("version").get<int>() != model_file_version) {
            throw data_format_exception{ fmt::format("'{}' is not a version {} bloomcast model", path.string(), model_file_version) };
        }
        trained_model model;
        model.kind = doc.at("kind").get<std::string>() == "lstm" ? model_kind::lstm : model_kind::svm;
        model.window = detail::window_from_json(doc.at("window"));
        model.config_hash = doc.at("config_hash").get<std::string>();
        if (model.kind == model_kind::svm) {
            model.svm = svm::ovo_model_from_json(doc.at("model"));
        } else {
            std::tie(model.hyper, model.lstm) = lstm::lstm_model_from_json(doc.at("model"));
            model.scaling.shift = doc.at("input_scaling").at("shift").get<std::vector<double>>();
            model.scaling.scale = doc.at("input_scaling").at("scale").get<std::vector<double>>();
        }
        return model;
    } catch (const nlohmann::json::exception &e) {
        throw data_format_exception{ fmt::format("malformed model file '{}': {}", path.string(), e.what()) };
    }
}

/// Temperature records (imputed) and bloom events of a run.
struct run_data {
    std::vector<daily_record> records{};
    std::vector<bloom_event> events{};
    std::size_t unimputable{};
};

[[nodiscard]] inline run_data load_run_data(const run_config &cfg) {
    run_data data;
    data.records = parse_temperature_csv(cfg.temperature_csv.string());
    data.events = parse_bloom_csv(cfg.bloom_csv.string());
    data.unimputable = impute_all(data.records);
    return data;
}

/// Samples of the bloom years inside @p years.
[[nodiscard]] inline dataset build_split(const run_data &data, const window_config &window, const year_range &years) {
    std::vector<bloom_event> events;
    for (const bloom_event &e : data.events) {
        if (years.contains(e.year)) {
            events.push_back(e);
        }
    }
    return build_windows(data.records, events, window);
}

struct train_summary {
    std::filesystem::path model_path{};
    std::size_t train_samples{};
    std::vector<double> loss_trace{};
};

[[nodiscard]] inline std::filesystem::path default_model_path(const run_config &cfg) {
    return cfg.output_dir / "model.json";
}

/**
 * @brief Train the configured model on the training years and persist it.
 *
 * Writes the model file, `train.log`, and for the LSTM `loss_trace.csv` (`epoch,loss`).
 */
inline train_summary cmd_train(const run_config &cfg, std::optional<std::filesystem::path> model_path = std::nullopt) {
    cfg.validate();
    detail::ensure_directory(cfg.output_dir);
    const std::filesystem::path path = model_path.value_or(default_model_path(cfg));
    if (path.has_parent_path()) {
        detail::ensure_directory(path.parent_path());
    }

    const run_data data = load_run_data(cfg);
    const dataset train = build_split(data, cfg.window, cfg.train_years);

    std::string log;
    log += fmt::format("config_hash {}\n", cfg.hash);
    log += fmt::format("model {}\nregime {}\n", to_string(cfg.model), svm::to_string(cfg.regime));
    log += fmt::format("window length {} horizon {} mode {} channels {}\n", cfg.window.window_len, cfg.window.k, to_string(cfg.window.mode), to_string(cfg.window.channels));
    log += fmt::format("train_years {}-{}\n", cfg.train_years.first, cfg.train_years.last);
    log += fmt::format("records {} (dropped unimputable {}), bloom events {}\n", data.records.size(), data.unimputable, data.events.size());
    for (const std::string &w : train.warnings) {
        log += fmt::format("warning: {}\n", w);
    }
    log += fmt::format("train samples {}\n", train.size());
    for (const auto &[label, count] : train.class_counts) {
        log += fmt::format("  class {:>3}: {}\n", label, count);
    }
    if (train.class_counts.size() < 2) {
        throw invalid_argument_exception{ fmt::format("the training years {}-{} yield {} class(es); at least two are needed", cfg.train_years.first, cfg.train_years.last, train.class_counts.size()) };
    }

    trained_model model;
    model.kind = cfg.model;
    model.window = cfg.window;
    model.config_hash = cfg.hash;
    train_summary summary{ path, train.size(), {} };

    if (cfg.model == model_kind::svm) {
        const svm::kernel_spec kernel{ cfg.svm.gamma.value_or(svm::default_gamma(train)) };
        log += fmt::format("svm C {} gamma {} tol {}\n", cfg.svm.c, kernel.gamma, cfg.svm.tol);
        if (cfg.regime == svm::training_regime::weighted) {
            for (const auto &[label, w] : compute_class_weights(train.class_counts)) {
                log += fmt::format("  weight class {:>3}: {}\n", label, w);
            }
        } else if (cfg.regime == svm::training_regime::oversampled) {
            log += fmt::format("smote neighbors {} seed {}\n", cfg.svm.smote_neighbors, cfg.seed);
        }
        svm::ovo_options options;
        options.solver.tol = cfg.svm.tol;
        options.solver.max_passes = cfg.svm.max_passes;
        options.smote_neighbors = cfg.svm.smote_neighbors;
        model.svm = svm::train_ovo(train, cfg.svm.c, kernel, cfg.regime, cfg.seed, options);
        std::size_t support = 0;
        for (const svm::pairwise_classifier &clf : model.svm.pairs) {
            support += clf.support_vectors.size();
        }
        log += fmt::format("sub-classifiers {}, support vectors {}\n", model.svm.pairs.size(), support);
    } else {
        dataset fit_set = train;
        if (cfg.regime == svm::training_regime::oversampled) {
            fit_set = smote_oversample(train, cfg.seed, cfg.svm.smote_neighbors);
            log += fmt::format("smote neighbors {} seed {}: {} samples after oversampling\n", cfg.svm.smote_neighbors, cfg.seed, fit_set.size());
        }
        model.scaling = input_scaling::fit(fit_set);
        model.hyper = cfg.lstm;
        log += fmt::format("lstm {}\n", lstm::to_json(model.hyper).dump());
        lstm::training_result trained = lstm::train_lstm(model.scaling.apply(std::move(fit_set)), model.hyper);
        model.lstm = std::move(trained.params);
        summary.loss_trace = std::move(trained.loss_trace);
        std::string trace = "epoch,loss\n";
        for (std::size_t e = 0; e < summary.loss_trace.size(); ++e) {
            trace += fmt::format("{},{}\n", e + 1, summary.loss_trace[e]);
        }
        detail::write_text(cfg.output_dir / "loss_trace.csv", trace);
        if (!summary.loss_trace.empty()) {
            log += fmt::format("final training loss {}\n", summary.loss_trace.back());
        }
    }

    save_model(model, path);
    log += fmt::format("model written to {}\n", path.filename().string());
    detail::write_text(cfg.output_dir / "train.log", log);
    return summary;
}

/// Fails unless @p model was trained with the window construction of @p cfg.
inline void check_compatible(const trained_model &model, const run_config &cfg) {
    const window_config &m = model.window;
    const window_config &c = cfg.window;
    if (m.window_len != c.window_len || m.k != c.k || m.mode != c.mode || m.channels != c.channels) {
        throw config_exception{ fmt::format("model features ({} window of {} days, {}, horizon {}; {} values) don't match the configuration ({} window of {} days, {}, horizon {}; {} values)",
                                            to_string(m.mode), m.window_len, to_string(m.channels), m.k, m.feature_len(),
                                            to_string(c.mode), c.window_len, to_string(c.channels), c.k, c.feature_len()) };
    }
}

/**
 * @brief Evaluate a model on the test years.
 *
 * Writes `metrics.json`, `confusion_matrix.csv` and (SVM, or LSTM with pr_curves enabled) one
 * `pr_curve_class_<c>.csv` per class with test samples, all into @p out_dir (default: the output directory).
 */
inline metrics::eval_report cmd_evaluate(const run_config &cfg, const std::filesystem::path &model_path, std::optional<std::filesystem::path> out_dir = std::nullopt) {
    cfg.validate();
    const trained_model model = load_model(model_path);
    check_compatible(model, cfg);
    const std::filesystem::path dir = out_dir.value_or(cfg.output_dir);
    detail::ensure_directory(dir);

    const run_data data = load_run_data(cfg);
    const dataset test = build_split(data, cfg.window, cfg.test_years);
    const std::size_t n_classes = static_cast<std::size_t>(cfg.window.k) + 1;

    std::vector<int> truth;
    std::vector<int> predicted;
    std::vector<std::vector<double>> scores;
    for (const window_sample &s : test.samples) {
        auto [label, score] = model.predict(s.features);
        truth.push_back(s.label);
        predicted.push_back(label);
        scores.push_back(std::move(score));
    }
    const bool with_curves = model.kind == model_kind::svm || cfg.lstm_pr_curves;
    metrics::eval_report report = metrics::evaluate(truth, predicted, n_classes, with_curves ? scores : std::vector<std::vector<double>>{});

    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t c = 0; c < n_classes; ++c) {
        const metrics::class_scores &s = report.per_class[c];
        nlohmann::json entry{ { "class", c }, { "precision", s.precision }, { "recall", s.recall }, { "f1", s.f1 }, { "support", s.support }, { "predicted", s.predicted }, { "in_macro_average", s.counted } };
        if (report.pr_curves[c]) {
            entry["pr_auc"] = report.pr_curves[c]->auc;
        }
        per_class.push_back(std::move(entry));
    }
    const nlohmann::json metrics_doc{ { "config_hash", cfg.hash },
                                      { "model_config_hash", model.config_hash },
                                      { "model", to_string(model.kind) },
                                      { "regime", model.kind == model_kind::svm ? std::string{ svm::to_string(model.svm.regime) } : std::string{ svm::to_string(cfg.regime) } },
                                      { "test_years", { cfg.test_years.first, cfg.test_years.last } },
                                      { "n_samples", test.size() },
                                      { "accuracy", report.accuracy },
                                      { "precision", report.precision },
                                      { "recall", report.recall },
                                      { "f1", report.f1 },
                                      { "per_class", std::move(per_class) } };
    detail::write_text(dir / "metrics.json", metrics_doc.dump(2) + "\n");

    std::string cm = "true\\predicted";
    for (std::size_t c = 0; c < n_classes; ++c) {
        cm += fmt::format(",{}", c);
    }
    cm += "\n";
    for (std::size_t t = 0; t < n_classes; ++t) {
        cm += fmt::format("{}", t);
        for (std::size_t p = 0; p < n_classes; ++p) {
            cm += fmt::format(",{}", report.confusion(t, p));
        }
        cm += "\n";
    }
    detail::write_text(dir / "confusion_matrix.csv", cm);

    for (std::size_t c = 0; c < n_classes; ++c) {
        if (!report.pr_curves[c]) {
            continue;
        }
        std::string csv = "threshold,recall,precision\n";
        for (const metrics::pr_point &pt : report.pr_curves[c]->points) {
            csv += fmt::format("{},{},{}\n", pt.threshold, pt.recall, pt.precision);
        }
        detail::write_text(dir / fmt::format("pr_curve_class_{}.csv", c), csv);
    }
    return report;
}

/// Human readable meaning of a predicted class.
[[nodiscard]] inline std::string interpret_class(const int label, const int k) {
    if (label == 0) {
        return fmt::format("peak bloom is more than {} days away", k);
    }
    return label == 1 ? std::string{ "peak bloom in 1 day" } : fmt::format("peak bloom in {} days", label);
}

struct prediction {
    int label{};
    std::string message{};
    std::vector<double> scores{};
};

/**
 * @brief Classify the window ending at @p iso_date.
 * @throws bloomcast::data_format_exception if the date is invalid or the window misses days (listed in the message)
 */
[[nodiscard]] inline prediction cmd_predict(const run_config &cfg, const std::filesystem::path &model_path, const std::string &iso_date) {
    const trained_model model = load_model(model_path);
    check_compatible(model, cfg);
    const auto date = parse_iso_date(iso_date);
    if (!date) {
        throw data_format_exception{ fmt::format("'{}' is not a valid YYYY-MM-DD date", iso_date) };
    }
    std::vector<daily_record> records = parse_temperature_csv(cfg.temperature_csv.string());
    impute_all(records);
    const record_index index{ records };
    const window_lookup lookup = window_features(index, date->first, date->second, cfg.window);
    if (!lookup.features) {
        std::string missing;
        for (const std::string &d : lookup.missing_dates) {
            missing += (missing.empty() ? "" : ", ") + d;
        }
        throw data_format_exception{ fmt::format("insufficient temperature data for the window ending {}; missing: {}", iso_date, missing) };
    }
    auto [label, scores] = model.predict(*lookup.features);
    return { label, interpret_class(label, cfg.window.k), std::move(scores) };
}

/**
 * @brief Train and evaluate the SVM under all three regimes.
 *
 * Each regime gets its own subdirectory of the output directory; `comparison.csv` collects the headline metrics.
 */
inline std::vector<metrics::eval_report> cmd_report(const run_config &cfg) {
    cfg.validate();
    constexpr std::array regimes{ svm::training_regime::ordinary, svm::training_regime::weighted, svm::training_regime::oversampled };
    std::vector<metrics::eval_report> reports;
    for (const svm::training_regime regime : regimes) {
        run_config sub = cfg;
        sub.model = model_kind::svm;
        sub.regime = regime;
        sub.output_dir = cfg.output_dir / std::string{ svm::to_string(regime) };
        const train_summary trained = cmd_train(sub);
        reports.push_back(cmd_evaluate(sub, trained.model_path));
    }
    std::string csv = "metric,ordinary,weighted,oversampled\n";
    const auto row = [&](const std::string_view name, auto getter) {
        csv += name;
        for (const metrics::eval_report &r : reports) {
            csv += fmt::format(",{}", getter(r));
        }
        csv += "\n";
    };
    row("accuracy", [](const metrics::eval_report &r) { return r.accuracy; });
    row("precision", [](const metrics::eval_report &r) { return r.precision; });
    row("recall", [](const metrics::eval_report &r) { return r.recall; });
    row("f1", [](const metrics::eval_report &r) { return r.f1; });
    detail::write_text(cfg.output_dir / "comparison.csv", csv);
    return reports;
}

}  // namespace bloomcast::app
