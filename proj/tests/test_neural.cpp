#include "meslstm/error.hpp"
#include "meslstm/neural.hpp"
#include "oracles/finite_difference.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace meslstm;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
    return Matrix::NullaryExpr(r, c, [&] { return scale * rng.normal(); });
}

LstmLayer random_lstm(std::size_t k, std::size_t s, Rng& rng) {
    auto layer = LstmLayer::initialized(k, s, rng);
    layer.b = random_matrix(layer.b.rows(), 1, rng, 0.5);
    return layer;
}

// Weighted sum of every hidden state; its gradient w.r.t. h_t is weights[t].
double weighted_hidden(const LstmLayer& layer, const std::vector<Matrix>& steps, const std::vector<Matrix>& weights) {
    LstmCache cache;
    const auto hs = lstm_forward(layer, steps, cache);
    double total = 0.0;
    for (std::size_t t = 0; t < hs.size(); ++t) total += hs[t].cwiseProduct(weights[t]).sum();
    return total;
}

}  // namespace

TEST(Lstm, ZeroWeightsGiveZeroHidden) {
    const auto layer = LstmLayer::zeros(3, 4);
    Rng rng(1);
    LstmCache cache;
    const Matrix h = lstm_forward(layer, random_matrix(3, 6, rng), cache);
    EXPECT_TRUE(h.isZero(0.0));
    for (const auto& g : cache.gates) {
        EXPECT_TRUE(g.topRows(12).isConstant(0.5));
        EXPECT_TRUE(g.bottomRows(4).isZero(0.0));
    }
}

TEST(Lstm, EmptySequence) {
    const auto layer = LstmLayer::zeros(2, 3);
    LstmCache cache;
    EXPECT_TRUE(lstm_forward(layer, std::vector<Matrix>{}, cache).empty());
    EXPECT_EQ(lstm_forward(layer, Matrix(2, 0), cache).cols(), 0);
}

TEST(Lstm, ScalarHandComputation) {
    auto layer = LstmLayer::zeros(1, 1);
    layer.W << 0.5, -0.3, 0.8, 1.2;
    layer.b << 0.1, 1.0, -0.2, 0.05;
    const double x = 0.7;
    const double i = sig(0.5 * x + 0.1), f = sig(-0.3 * x + 1.0), o = sig(0.8 * x - 0.2);
    const double g = std::tanh(1.2 * x + 0.05);
    const double c = f * 0.0 + i * g;
    const double h = o * std::tanh(c);
    LstmCache cache;
    Matrix seq(1, 1);
    seq << x;
    EXPECT_NEAR(lstm_forward(layer, seq, cache)(0, 0), h, 1e-14);
    // Second step feeds h and c back through U and the forget gate.
    layer.U << 0.4, 0.2, -0.6, 0.9;
    Matrix two(1, 2);
    two << x, -x;
    const double i2 = sig(-0.5 * x + 0.4 * h + 0.1), f2 = sig(0.3 * x + 0.2 * h + 1.0);
    const double o2 = sig(-0.8 * x - 0.6 * h - 0.2), g2 = std::tanh(-1.2 * x + 0.9 * h + 0.05);
    const double h2 = o2 * std::tanh(f2 * c + i2 * g2);
    EXPECT_NEAR(lstm_forward(layer, two, cache)(0, 1), h2, 1e-14);
}

TEST(Lstm, GradientsMatchFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        auto layer = random_lstm(3, 4, rng);
        std::vector<Matrix> steps, weights;
        for (int t = 0; t < 5; ++t) {
            steps.push_back(random_matrix(3, 2, rng));
            weights.push_back(random_matrix(4, 2, rng));
        }
        LstmCache cache;
        lstm_forward(layer, steps, cache);
        const auto g = lstm_backward(layer, cache, weights);
        auto loss = [&] { return weighted_hidden(layer, steps, weights); };
        EXPECT_LT(oracle::check_gradient(layer.W, g.dW, loss).worst_relative, 1e-4) << "seed " << seed;
        EXPECT_LT(oracle::check_gradient(layer.U, g.dU, loss).worst_relative, 1e-4) << "seed " << seed;
        EXPECT_LT(oracle::check_gradient(layer.b, g.db, loss).worst_relative, 1e-4) << "seed " << seed;
        for (std::size_t t = 0; t < steps.size(); ++t) {
            EXPECT_LT(oracle::check_gradient(steps[t], g.dx[t], loss).worst_relative, 1e-4) << "seed " << seed;
        }
    }
}

TEST(Lstm, ZeroUpstreamGivesZeroGradient) {
    Rng rng(4);
    const auto layer = random_lstm(3, 4, rng);
    std::vector<Matrix> steps(5, random_matrix(3, 1, rng));
    LstmCache cache;
    lstm_forward(layer, steps, cache);
    const auto g = lstm_backward(layer, cache, std::vector<Matrix>(5, Matrix::Zero(4, 1)));
    EXPECT_TRUE(g.dW.isZero(0.0));
    EXPECT_TRUE(g.dU.isZero(0.0));
    EXPECT_TRUE(g.db.isZero(0.0));
}

TEST(Lstm, DuplicatedBatchDoublesGradient) {
    Rng rng(9);
    const auto layer = random_lstm(3, 4, rng);
    const Matrix seq = random_matrix(3, 5, rng);
    const Matrix up = random_matrix(4, 5, rng);
    std::vector<Matrix> one_steps, two_steps, one_up, two_up;
    for (Eigen::Index t = 0; t < 5; ++t) {
        one_steps.emplace_back(seq.col(t));
        two_steps.emplace_back(Matrix(3, 2));
        two_steps.back() << seq.col(t), seq.col(t);
        one_up.emplace_back(up.col(t));
        two_up.emplace_back(Matrix(4, 2));
        two_up.back() << up.col(t), up.col(t);
    }
    LstmCache c1, c2;
    lstm_forward(layer, one_steps, c1);
    lstm_forward(layer, two_steps, c2);
    const auto g1 = lstm_backward(layer, c1, one_up);
    const auto g2 = lstm_backward(layer, c2, two_up);
    EXPECT_TRUE(g2.dW.isApprox(2.0 * g1.dW, 1e-14));
    EXPECT_TRUE(g2.dU.isApprox(2.0 * g1.dU, 1e-14));
    EXPECT_TRUE(g2.db.isApprox(2.0 * g1.db, 1e-14));
}

TEST(Lstm, InitializationBoundsAndForgetBias) {
    Rng rng(2);
    const auto layer = LstmLayer::initialized(5, 7, rng);
    const double bound = std::sqrt(6.0 / 12.0);
    EXPECT_LE(layer.W.cwiseAbs().maxCoeff(), bound);
    EXPECT_TRUE(layer.b.middleRows(7, 7).isOnes(0.0));
    EXPECT_TRUE(layer.b.topRows(7).isZero(0.0));
    EXPECT_EQ(layer.parameter_count(), 4u * 7 * (5 + 7 + 1));
}

TEST(Dense, GradientsMatchFiniteDifferences) {
    for (auto act : {Activation::Identity, Activation::ReLU}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(100 + seed);
            auto layer = DenseLayer::initialized(6, 3, act, rng);
            layer.bias = random_matrix(3, 1, rng);
            Matrix x = random_matrix(6, 4, rng);
            const Matrix w = random_matrix(3, 4, rng);
            DenseCache cache;
            dense_forward(layer, x, &cache);
            // Keep ReLU away from its kink so central differences are valid.
            if (act == Activation::ReLU && cache.pre.cwiseAbs().minCoeff() < 1e-3) continue;
            const auto g = dense_backward(layer, cache, w);
            auto loss = [&] { return dense_forward(layer, x).cwiseProduct(w).sum(); };
            EXPECT_LT(oracle::check_gradient(layer.weights, g.dW, loss).worst_relative, 1e-4);
            EXPECT_LT(oracle::check_gradient(layer.bias, g.db, loss).worst_relative, 1e-4);
            EXPECT_LT(oracle::check_gradient(x, g.dx, loss).worst_relative, 1e-4);
        }
    }
}

TEST(Mae, Values) {
    Matrix p(1, 2), t(1, 2);
    p << 1, 3;
    t << 2, 2;
    EXPECT_DOUBLE_EQ(mae_loss(p, t).value, 1.0);
    EXPECT_DOUBLE_EQ(mae_loss(p, p).value, 0.0);
    EXPECT_TRUE(mae_loss(p, p).gradient.isZero(0.0));
    EXPECT_THROW(mae_loss(p, Matrix(2, 1)), ContractError);
}

TEST(Mae, GradientMatchesFiniteDifferencesAwayFromTies) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(200 + seed);
        Matrix pred = random_matrix(3, 5, rng);
        const Matrix target = random_matrix(3, 5, rng);
        if ((pred - target).cwiseAbs().minCoeff() < 1e-3) continue;
        const auto r = mae_loss(pred, target);
        auto loss = [&] { return mae_loss(pred, target).value; };
        const auto check = oracle::check_gradient(pred, r.gradient, loss);
        EXPECT_LT(check.worst_relative, 1e-6);
    }
}

TEST(Mae, NonNegative) {
    Rng rng(7);
    for (int i = 0; i < 100; ++i) EXPECT_GE(mae_loss(random_matrix(2, 3, rng), random_matrix(2, 3, rng)).value, 0.0);
}

TEST(Adam, FirstStep) {
    Matrix theta = Matrix::Zero(1, 1), g = Matrix::Ones(1, 1);
    AdamState st;
    Matrix* ps[] = {&theta};
    const Matrix* gs[] = {&g};
    adam_step(st, ps, gs);
    EXPECT_NEAR(theta(0, 0), -0.001 / (1.0 + 1e-8), 1e-15);
    EXPECT_NEAR(theta(0, 0), -0.000999999, 1e-9);
}

TEST(Adam, ZeroGradientAndEqualGradients) {
    Matrix a = Matrix::Constant(2, 2, 3.0), b = Matrix::Constant(2, 2, -1.0);
    const Matrix zero = Matrix::Zero(2, 2);
    Matrix ga = Matrix::Constant(2, 2, 0.25), gb = ga;
    AdamState st;
    Matrix* ps[] = {&a, &b};
    for (int i = 0; i < 10; ++i) {
        const Matrix* zs[] = {&zero, &zero};
        adam_step(st, ps, zs);
    }
    EXPECT_TRUE(a.isConstant(3.0, 0.0));
    EXPECT_TRUE(b.isConstant(-1.0, 0.0));
    const Matrix a0 = a, b0 = b;
    const Matrix* gs[] = {&ga, &gb};
    adam_step(st, ps, gs);
    EXPECT_TRUE((a - a0).isApprox(b - b0, 1e-9));
}

TEST(ClipNorm, ScalesToBound) {
    Matrix g1 = Matrix::Constant(1, 1, 3.0), g2 = Matrix::Constant(1, 1, 4.0);
    Matrix* gs[] = {&g1, &g2};
    EXPECT_DOUBLE_EQ(clip_global_norm(gs, 1.0), 5.0);
    EXPECT_NEAR(std::hypot(g1(0, 0), g2(0, 0)), 1.0, 1e-15);
}

TEST(Training, BitwiseDeterministic) {
    auto run = [] {
        Rng rng(42);
        auto layer = LstmLayer::initialized(2, 3, rng);
        auto head = DenseLayer::initialized(3, 1, Activation::Identity, rng);
        AdamState st;
        for (int it = 0; it < 30; ++it) {
            std::vector<Matrix> steps;
            for (int t = 0; t < 4; ++t) steps.push_back(random_matrix(2, 5, rng));
            const Matrix target = random_matrix(1, 5, rng);
            LstmCache lc;
            const auto hs = lstm_forward(layer, steps, lc);
            DenseCache dc;
            const Matrix out = dense_forward(head, hs.back(), &dc);
            const auto loss = mae_loss(out, target);
            const auto dg = dense_backward(head, dc, loss.gradient);
            std::vector<Matrix> dh(4, Matrix::Zero(3, 5));
            dh.back() = dg.dx;
            const auto lg = lstm_backward(layer, lc, dh);
            Matrix* ps[] = {&layer.W, &layer.U, &layer.b, &head.weights, &head.bias};
            const Matrix* gs[] = {&lg.dW, &lg.dU, &lg.db, &dg.dW, &dg.db};
            adam_step(st, ps, gs);
        }
        return lstm_to_json(layer).dump() + dense_to_json(head).dump();
    };
    EXPECT_EQ(run(), run());
}

TEST(Json, LayerRoundTrip) {
    Rng rng(3);
    const auto layer = LstmLayer::initialized(3, 2, rng);
    const auto back = lstm_from_json(nlohmann::ordered_json::parse(lstm_to_json(layer).dump()));
    EXPECT_EQ(back.W, layer.W);
    EXPECT_EQ(back.U, layer.U);
    EXPECT_EQ(back.b, layer.b);
    const auto dense = DenseLayer::initialized(3, 2, Activation::ReLU, rng);
    const auto dback = dense_from_json(nlohmann::ordered_json::parse(dense_to_json(dense).dump()));
    EXPECT_EQ(dback.weights, dense.weights);
    EXPECT_EQ(dback.activation, Activation::ReLU);
}
