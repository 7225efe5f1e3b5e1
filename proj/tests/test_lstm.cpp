#include "bloomcast/lstm/lstm.hpp"
#include "bloomcast/lstm/model_io.hpp"
#include "bloomcast/lstm/training.hpp"

#include "support/generators.hpp"
#include "support/gradient_check.hpp"
#include "support/properties.hpp"

#include "gtest/gtest.h"

#include <cmath>
#include <random>

namespace {

using namespace bloomcast;
using namespace bloomcast::lstm;

lstm_hyper small_hyper() {
    lstm_hyper h;
    h.num_layers = 2;
    h.input_size = 2;
    h.hidden_size = 4;
    h.n_classes = 5;
    h.dropout = 0.5;
    h.seed = 11;
    return h;
}

MatrixXd random_matrix(std::mt19937_64 &rng, const Eigen::Index rows, const Eigen::Index cols, const double scale = 1.0) {
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = scale * bloomcast::detail::standard_normal(rng);
    }
    return m;
}

double logistic(const double a) { return 1.0 / (1.0 + std::exp(-a)); }

TEST(LstmCell, ZeroParamsGiveZeroState) {
    const layer_params zero{ MatrixXd::Zero(12, 2), MatrixXd::Zero(12, 3), VectorXd::Zero(12) };
    const auto [h, c] = cell_forward(VectorXd::Zero(2), VectorXd::Zero(3), VectorXd::Zero(3), zero);
    EXPECT_EQ(h, VectorXd::Zero(3));
    EXPECT_EQ(c, VectorXd::Zero(3));
}

TEST(LstmCell, SaturatedForgetGateKeepsMemory) {
    layer_params p{ MatrixXd::Zero(8, 1), MatrixXd::Zero(8, 2), VectorXd::Zero(8) };
    p.b.segment(0, 2).setConstant(-1e3);
    p.b.segment(2, 2).setConstant(1e3);
    VectorXd c_prev(2);
    c_prev << 0.75, -2.5;
    VectorXd x(1);
    x << 4.0;
    const auto [h, c] = cell_forward(x, VectorXd::Ones(2), c_prev, p);
    EXPECT_EQ(c, c_prev);
}

TEST(LstmCell, MatchesScalarReference) {
    std::mt19937_64 rng{ 42 };
    const int in = 3;
    const int hid = 4;
    const layer_params p{ random_matrix(rng, 4 * hid, in), random_matrix(rng, 4 * hid, hid), random_matrix(rng, 4 * hid, 1) };
    const VectorXd x = random_matrix(rng, in, 1);
    const VectorXd h_prev = random_matrix(rng, hid, 1);
    const VectorXd c_prev = random_matrix(rng, hid, 1);
    const auto [h, c] = cell_forward(x, h_prev, c_prev, p);
    for (int j = 0; j < hid; ++j) {
        double pre[4];
        for (int gate = 0; gate < 4; ++gate) {
            const int row = gate * hid + j;
            double s = p.b(row);
            for (int q = 0; q < in; ++q) {
                s += p.w(row, q) * x(q);
            }
            for (int q = 0; q < hid; ++q) {
                s += p.u(row, q) * h_prev(q);
            }
            pre[gate] = s;
        }
        const double ig = logistic(pre[0]);
        const double fg = logistic(pre[1]);
        const double gg = std::tanh(pre[2]);
        const double og = logistic(pre[3]);
        const double cj = fg * c_prev(j) + ig * gg;
        EXPECT_NEAR(c(j), cj, 1e-14);
        EXPECT_NEAR(h(j), og * std::tanh(cj), 1e-14);
    }
}

TEST(LstmCell, ShapeMismatch) {
    const layer_params p{ MatrixXd::Zero(8, 1), MatrixXd::Zero(8, 2), VectorXd::Zero(8) };
    EXPECT_THROW(std::ignore = cell_forward(VectorXd::Zero(2), VectorXd::Zero(2), VectorXd::Zero(2), p), invalid_argument_exception);
    EXPECT_THROW(std::ignore = cell_forward(VectorXd::Zero(1), VectorXd::Zero(3), VectorXd::Zero(2), p), invalid_argument_exception);
}

TEST(LstmCell, NonFiniteStateIsDivergence) {
    const layer_params p{ MatrixXd::Zero(8, 1), MatrixXd::Zero(8, 2), VectorXd::Zero(8) };
    VectorXd c_prev(2);
    c_prev << std::numeric_limits<double>::infinity(), 0.0;
    EXPECT_THROW(std::ignore = cell_forward(VectorXd::Zero(1), VectorXd::Zero(2), c_prev, p), divergence_exception);
}

TEST(Softmax, ZeroLogitsAreUniform) {
    const VectorXd p = softmax(VectorXd::Zero(11));
    for (Eigen::Index c = 0; c < 11; ++c) {
        EXPECT_NEAR(p(c), 1.0 / 11.0, 1e-15);
    }
}

TEST(Softmax, LargeLogitsStayFinite) {
    VectorXd logits(3);
    logits << 1000.0, 999.0, -1000.0;
    const VectorXd p = softmax(logits);
    EXPECT_TRUE(p.allFinite());
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_GT(p(0), p(1));
}

TEST(CrossEntropy, Examples) {
    VectorXd one_hot = VectorXd::Zero(4);
    one_hot(2) = 1.0;
    EXPECT_EQ(cross_entropy(one_hot, 2), 0.0);
    EXPECT_NEAR(cross_entropy(VectorXd::Constant(11, 1.0 / 11.0), 3), std::log(11.0), 1e-12);
    EXPECT_NEAR(cross_entropy(VectorXd::Constant(11, 1.0 / 11.0), 3), 2.3979, 1e-4);
    EXPECT_NEAR(cross_entropy(one_hot, 0), -std::log(1e-12), 1e-12);
    EXPECT_NEAR(cross_entropy(one_hot, 0), 27.631, 1e-3);
    EXPECT_THROW(std::ignore = cross_entropy(one_hot, 4), invalid_argument_exception);
}

TEST(LstmForward, NormalizedAndDeterministic) {
    const lstm_hyper h = small_hyper();
    const lstm_params params = init_params(h);
    std::mt19937_64 rng{ 3 };
    const MatrixXd seq = random_matrix(rng, 7, 2);
    const forward_cache a = forward(seq, params, h, false, 1);
    const forward_cache b = forward(seq, params, h, false, 2);
    EXPECT_EQ(a.probs, b.probs);
    EXPECT_NEAR(a.probs.sum(), 1.0, 1e-9);
    EXPECT_TRUE(a.layers[1].input_mask.size() == 0);
    const forward_cache t = forward(seq, params, h, true, 1);
    EXPECT_EQ(t.layers[0].input_mask.size(), 0);
    EXPECT_EQ(t.layers[1].input_mask.rows(), 7);
    EXPECT_NEAR(t.probs.sum(), 1.0, 1e-9);
    EXPECT_EQ(forward(seq, params, h, true, 1).probs, t.probs);
}

TEST(LstmForward, Errors) {
    const lstm_hyper h = small_hyper();
    const lstm_params params = init_params(h);
    EXPECT_THROW(std::ignore = forward(MatrixXd::Zero(0, 2), params, h, false, 0), invalid_argument_exception);
    EXPECT_THROW(std::ignore = forward(MatrixXd::Zero(3, 3), params, h, false, 0), invalid_argument_exception);
    lstm_hyper wider = h;
    wider.hidden_size = 5;
    EXPECT_THROW(std::ignore = forward(MatrixXd::Zero(3, 2), params, wider, false, 0), invalid_argument_exception);
}

TEST(LstmForward, LongSequenceStaysFinite) {
    lstm_hyper h = small_hyper();
    h.hidden_size = 16;
    h.input_size = 1;
    h.dropout = 0.0;
    std::mt19937_64 rng{ 10 };
    lstm_params params = init_params(h);
    params.for_each([&](auto &m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            m.data()[i] = bloomcast::detail::standard_normal(rng);
        }
    });
    const MatrixXd seq = random_matrix(rng, 1000, 1, 3.0);
    const forward_cache cache = forward(seq, params, h, false, 0);
    for (const layer_cache &lc : cache.layers) {
        for (std::size_t t = 0; t < lc.h.size(); ++t) {
            ASSERT_TRUE(lc.h[t].allFinite() && lc.c[t].allFinite());
            ASSERT_LE(lc.h[t].lpNorm<Eigen::Infinity>(), 1.0);
            ASSERT_LE(lc.c[t].lpNorm<Eigen::Infinity>(), 1001.0);
        }
    }
}

TEST(LstmBackward, MatchesFiniteDifferences) {
    for (const std::uint64_t seed : { 1U, 2U, 3U }) {
        const test::gradient_check_result r = test::check_lstm_gradients(seed, small_hyper(), 6);
        EXPECT_LT(r.max_relative_error, 1e-4) << "seed " << seed;
        EXPECT_GT(r.checked, 200U);
    }
    lstm_hyper single = small_hyper();
    single.num_layers = 1;
    single.input_size = 1;
    EXPECT_LT(test::check_lstm_gradients(4, single, 1).max_relative_error, 1e-4);
}

TEST(LstmBackward, AllOnesMaskEqualsNoDropout) {
    lstm_hyper h = small_hyper();
    const lstm_params params = init_params(h);
    std::mt19937_64 rng{ 5 };
    const MatrixXd seq = random_matrix(rng, 5, 2);
    forward_cache with_mask = forward(seq, params, h, false, 0);
    with_mask.layers[1].input_mask = MatrixXd::Ones(5, 4);
    const forward_cache plain = forward(seq, params, h, false, 0);
    EXPECT_EQ(backward(with_mask, 1, params), backward(plain, 1, params));
}

TEST(LstmTraining, ZeroEpochsReturnsInitialParams) {
    lstm_hyper h = small_hyper();
    h.epochs = 0;
    const dataset d = test::random_sequence_dataset(4, 8, 4, 6);
    const training_result r = train_lstm(d, h);
    EXPECT_EQ(r.params, init_params(h));
    EXPECT_TRUE(r.loss_trace.empty());
}

TEST(LstmTraining, SameSeedSameParams) {
    lstm_hyper h = small_hyper();
    h.epochs = 3;
    h.batch_size = 3;
    const dataset d = test::random_sequence_dataset(4, 8, 4, 10);
    const training_result a = train_lstm(d, h);
    const training_result b = train_lstm(d, h);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.loss_trace, b.loss_trace);
    EXPECT_EQ(a.loss_trace.size(), 3U);
    h.seed = 12;
    EXPECT_FALSE(train_lstm(d, h).params == a.params);
}

TEST(LstmTraining, SgdReducesLoss) {
    lstm_hyper h = small_hyper();
    h.optimizer = optimizer_kind::sgd;
    h.learning_rate = 0.1;
    h.dropout = 0.0;
    h.epochs = 40;
    const dataset d = test::random_sequence_dataset(4, 8, 4, 12);
    const training_result r = train_lstm(d, h);
    EXPECT_LT(r.loss_trace.back(), r.loss_trace.front());
}

TEST(LstmTraining, MemorizesOneSequence) {
    lstm_hyper h;
    h.num_layers = 2;
    h.input_size = 1;
    h.hidden_size = 30;
    h.n_classes = 11;
    h.dropout = 0.0;
    h.batch_size = 4;
    h.epochs = 200;
    h.learning_rate = 1e-2;
    h.seed = 3;
    dataset d = test::random_sequence_dataset(1, 10, 11, 1);
    d.samples.front().label = 7;
    d.samples.assign(20, d.samples.front());
    d.recount();
    const training_result r = train_lstm(d, h);
    EXPECT_LT(r.loss_trace.back(), 0.01);
    const MatrixXd seq = to_sequence(d.samples.front().features, 1);
    EXPECT_EQ(predict_lstm(r.params, h, seq), 7U);
}

TEST(LstmTraining, GradientVanishesAtMemorizedMinimum) {
    lstm_hyper h;
    h.num_layers = 1;
    h.input_size = 1;
    h.hidden_size = 8;
    h.n_classes = 3;
    h.dropout = 0.0;
    h.batch_size = 1;
    h.epochs = 6000;
    h.learning_rate = 0.1;
    h.seed = 1;
    dataset d = test::random_sequence_dataset(1, 5, 3, 1);
    const training_result r = train_lstm(d, h);
    const MatrixXd seq = to_sequence(d.samples.front().features, 1);
    const lstm_params g = backward(forward(seq, r.params, h, false, 0), static_cast<std::size_t>(d.samples.front().label), r.params);
    double norm2 = 0.0;
    g.for_each([&](const auto &m) { norm2 += m.squaredNorm(); });
    EXPECT_LT(std::sqrt(norm2), 1e-6);
}

TEST(LstmTraining, Errors) {
    lstm_hyper h = small_hyper();
    dataset d = test::random_sequence_dataset(4, 7, 4, 3);
    EXPECT_THROW(std::ignore = train_lstm(d, h), invalid_argument_exception);
    d = test::random_sequence_dataset(4, 8, 4, 3);
    d.samples.front().label = 9;
    EXPECT_THROW(std::ignore = train_lstm(d, h), invalid_argument_exception);
    h.dropout = 1.0;
    EXPECT_THROW(std::ignore = train_lstm(test::random_sequence_dataset(4, 8, 4, 3), h), invalid_argument_exception);
}

TEST(LstmTraining, DivergenceReportsEpoch) {
    lstm_hyper h = small_hyper();
    h.epochs = 5;
    dataset d = test::random_sequence_dataset(4, 8, 4, 6);
    d.samples[2].features[3] = std::numeric_limits<double>::quiet_NaN();
    try {
        std::ignore = train_lstm(d, h);
        FAIL() << "expected divergence";
    } catch (const divergence_exception &e) {
        EXPECT_GE(e.epoch(), 1U);
        EXPECT_LE(e.epoch(), 5U);
    }
}

TEST(LstmPredict, ArgmaxTies) {
    VectorXd p(3);
    p << 0.7, 0.2, 0.1;
    EXPECT_EQ(argmax(p), 0U);
    p << 0.25, 0.375, 0.375;
    EXPECT_EQ(argmax(p), 1U);
    EXPECT_EQ(argmax(VectorXd::Constant(11, 1.0 / 11)), 0U);
}

TEST(LstmModelIo, ExactRoundTrip) {
    lstm_hyper h = small_hyper();
    h.optimizer = optimizer_kind::sgd;
    h.learning_rate = 0.123456789012345;
    const lstm_params params = init_params(h);
    const auto [h2, p2] = lstm_model_from_json(nlohmann::json::parse(to_json(h, params).dump()));
    EXPECT_EQ(h2, h);
    EXPECT_EQ(p2, params);
    nlohmann::json broken = to_json(h, params);
    broken["head_b"] = nlohmann::json::array({ 1.0 });
    EXPECT_THROW(std::ignore = lstm_model_from_json(broken), data_format_exception);
}

TEST(LstmProperties, Softmax) {
    const auto failure = test::check_softmax_properties(31, 200);
    EXPECT_FALSE(failure.has_value()) << *failure;
}

}  // namespace
