/**
 * @file
 * @brief JSON serialization of one-vs-one SVM models.
 *
 * Layout (version 1):
 * @code
 * { "format": "bloomcast-ovo-svm", "version": 1,
 *   "classes": [...], "gamma": g, "feature_len": n, "C": c, "regime": "weighted",
 *   "pairs": [ { "positive_class": m, "negative_class": n, "bias": b,
 *                "alphas": [...], "labels": [...], "support_vectors": [[...], ...] }, ... ] }
 * @endcode
 * Doubles are written in shortest round-trip form, so reading a written model reproduces it exactly.
 */

#pragma once

#include "bloomcast/exceptions.hpp"  // bloomcast::data_format_exception
#include "bloomcast/svm/ovo.hpp"     // bloomcast::svm::ovo_model

#include "fmt/format.h"          // fmt::format
#include "nlohmann/json.hpp"     // nlohmann::json

namespace bloomcast::svm {

inline constexpr std::string_view ovo_model_format = "bloomcast-ovo-svm";
inline constexpr int ovo_model_version = 1;

[[nodiscard]] inline nlohmann::json to_json(const ovo_model &model) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const pairwise_classifier &clf : model.pairs) {
        pairs.push_back({ { "positive_class", clf.positive_class },
                          { "negative_class", clf.negative_class },
                          { "bias", clf.bias },
                          { "alphas", clf.alphas },
                          { "labels", clf.labels },
                          { "support_vectors", clf.support_vectors } });
    }
    return { { "format", ovo_model_format },
             { "version", ovo_model_version },
             { "classes", model.classes },
             { "gamma", model.kernel.gamma },
             { "feature_len", model.feature_len },
             { "C", model.c },
             { "regime", to_string(model.regime) },
             { "pairs", std::move(pairs) } };
}

/**
 * @throws bloomcast::data_format_exception if the document is not a version 1 SVM model
 */
[[nodiscard]] inline ovo_model ovo_model_from_json(const nlohmann::json &doc) {
    try {
        if (doc.at("format").get<std::string>() != ovo_model_format) {
            throw data_format_exception{ fmt::format("not an SVM model (format '{}')", doc.at("format").get<std::string>()) };
        }
        if (doc.at("version").get<int>() != ovo_model_version) {
            throw data_format_exception{ fmt::format("unsupported SVM model version {}", doc.at("version").get<int>()) };
        }
        ovo_model model;
        model.classes = doc.at("classes").get<std::vector<int>>();
        model.kernel.gamma = doc.at("gamma").get<double>();
        model.feature_len = doc.at("feature_len").get<std::size_t>();
        model.c = doc.at("C").get<double>();
        const auto regime = regime_from_string(doc.at("regime").get<std::string>());
        if (!regime) {
            throw data_format_exception{ fmt::format("unknown training regime '{}'", doc.at("regime").get<std::string>()) };
        }
        model.regime = *regime;
        for (const nlohmann::json &p : doc.at("pairs")) {
            pairwise_classifier clf;
            clf.positive_class = p.at("positive_class").get<int>();
            clf.negative_class = p.at("negative_class").get<int>();
            clf.bias = p.at("bias").get<double>();
            clf.alphas = p.at("alphas").get<std::vector<double>>();
            clf.labels = p.at("labels").get<std::vector<int>>();
            clf.support_vectors = p.at("support_vectors").get<std::vector<std::vector<double>>>();
            if (clf.alphas.size() != clf.labels.size() || clf.alphas.size() != clf.support_vectors.size()) {
                throw data_format_exception{ fmt::format("pair ({}, {}): inconsistent support vector arrays", clf.positive_class, clf.negative_class) };
            }
            model.pairs.push_back(std::move(clf));
        }
        const std::size_t k = model.classes.size();
        if (model.pairs.size() != k * (k - 1) / 2) {
            throw data_format_exception{ fmt::format("{} classes need {} pairs, but the model has {}", k, k * (k - 1) / 2, model.pairs.size()) };
        }
        model.kernel.validate();
        return model;
    } catch (const nlohmann::json::exception &e) {
        throw data_format_exception{ fmt::format("malformed SVM model: {}", e.what()) };
    } catch (const invalid_argument_exception &e) {
        throw data_format_exception{ fmt::format("malformed SVM model: {}", e.what()) };
    }
}

}  // namespace bloomcast::svm
