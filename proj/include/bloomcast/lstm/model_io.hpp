/**
 * @file
 * @brief JSON serialization of LSTM hyperparameters and parameters.
 *
 * Matrices are stored as arrays of rows; doubles in shortest round-trip form, so a written model reads back
 * bit for bit.
 */

#pragma once

#include "bloomcast/exceptions.hpp"      // bloomcast::data_format_exception
#include "bloomcast/lstm/lstm.hpp"       // bloomcast::lstm::lstm_hyper, bloomcast::lstm::lstm_params

#include "fmt/format.h"       // fmt::format
#include "nlohmann/json.hpp"  // nlohmann::json

#include <string>  // std::string
#include <vector>  // std::vector

namespace bloomcast::lstm {

inline constexpr std::string_view lstm_model_format = "bloomcast-lstm";
inline constexpr int lstm_model_version = 1;

namespace detail {

[[nodiscard]] inline nlohmann::json matrix_to_json(const MatrixXd &m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row[static_cast<std::size_t>(c)] = m(r, c);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

[[nodiscard]] inline MatrixXd matrix_from_json(const nlohmann::json &j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) {
            throw data_format_exception{ "ragged matrix in LSTM model" };
        }
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

[[nodiscard]] inline nlohmann::json vector_to_json(const VectorXd &v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

[[nodiscard]] inline VectorXd vector_from_json(const nlohmann::json &j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace detail

[[nodiscard]] inline nlohmann::json to_json(const lstm_hyper &hyper) {
    return { { "num_layers", hyper.num_layers },
             { "input_size", hyper.input_size },
             { "hidden_size", hyper.hidden_size },
             { "dropout", hyper.dropout },
             { "n_classes", hyper.n_classes },
             { "learning_rate", hyper.learning_rate },
             { "epochs", hyper.epochs },
             { "batch_size", hyper.batch_size },
             { "seed", hyper.seed },
             { "optimizer", hyper.optimizer == optimizer_kind::adam ? "adam" : "sgd" } };
}

/// Missing keys keep the defaults of lstm_hyper.
[[nodiscard]] inline lstm_hyper lstm_hyper_from_json(const nlohmann::json &j, lstm_hyper hyper = {}) {
    hyper.num_layers = j.value("num_layers", hyper.num_layers);
    hyper.input_size = j.value("input_size", hyper.input_size);
    hyper.hidden_size = j.value("hidden_size", hyper.hidden_size);
    hyper.dropout = j.value("dropout", hyper.dropout);
    hyper.n_classes = j.value("n_classes", hyper.n_classes);
    hyper.learning_rate = j.value("learning_rate", hyper.learning_rate);
    hyper.epochs = j.value("epochs", hyper.epochs);
    hyper.batch_size = j.value("batch_size", hyper.batch_size);
    hyper.seed = j.value("seed", hyper.seed);
    const std::string opt = j.value("optimizer", std::string{ hyper.optimizer == optimizer_kind::adam ? "adam" : "sgd" });
    if (opt == "adam") {
        hyper.optimizer = optimizer_kind::adam;
    } else if (opt == "sgd") {
        hyper.optimizer = optimizer_kind::sgd;
    } else {
        throw invalid_argument_exception{ fmt::format("unknown optimizer '{}'", opt) };
    }
    return hyper;
}

[[nodiscard]] inline nlohmann::json to_json(const lstm_hyper &hyper, const lstm_params &params) {
    nlohmann::json layers = nlohmann::json::array();
    for (const layer_params &l : params.layers) {
        layers.push_back({ { "W", detail::matrix_to_json(l.w) }, { "U", detail::matrix_to_json(l.u) }, { "b", detail::vector_to_json(l.b) } });
    }
    return { { "format", lstm_model_format },
             { "version", lstm_model_version },
             { "hyper", to_json(hyper) },
             { "layers", std::move(layers) },
             { "head_W", detail::matrix_to_json(params.head_w) },
             { "head_b", detail::vector_to_json(params.head_b) } };
}

/**
 * @throws bloomcast::data_format_exception if the document is not a consistent version 1 LSTM model
 */
[[nodiscard]] inline std::pair<lstm_hyper, lstm_params> lstm_model_from_json(const nlohmann::json &doc) {
    try {
        if (doc.at("format").get<std::string>() != lstm_model_format) {
            throw data_format_exception{ fmt::format("not an LSTM model (format '{}')", doc.at("format").get<std::string>()) };
        }
        if (doc.at("version").get<int>() != lstm_model_version) {
            throw data_format_exception{ fmt::format("unsupported LSTM model version {}", doc.at("version").get<int>()) };
        }
        const lstm_hyper hyper = lstm_hyper_from_json(doc.at("hyper"));
        lstm_params params;
        for (const nlohmann::json &l : doc.at("layers")) {
            params.layers.push_back({ detail::matrix_from_json(l.at("W")), detail::matrix_from_json(l.at("U")), detail::vector_from_json(l.at("b")) });
        }
        params.head_w = detail::matrix_from_json(doc.at("head_W"));
        params.head_b = detail::vector_from_json(doc.at("head_b"));
        hyper.validate();
        check_shapes(params, hyper);
        return { hyper, std::move(params) };
    } catch (const nlohmann::json::exception &e) {
        throw data_format_exception{ fmt::format("malformed LSTM model: {}", e.what()) };
    } catch (const invalid_argument_exception &e) {
        throw data_format_exception{ fmt::format("malformed LSTM model: {}", e.what()) };
    }
}

}  // namespace bloomcast::lstm
