#include "meslstm/neural.hpp"

#include "meslstm/error.hpp"

#include <cmath>

namespace meslstm {

namespace {

void glorot_fill(Eigen::Block<Matrix> block, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (Eigen::Index j = 0; j < block.cols(); ++j) {
        for (Eigen::Index i = 0; i < block.rows(); ++i) block(i, j) = rng.uniform(-bound, bound);
    }
}

Matrix sigmoid(const Matrix& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

}  // namespace

LstmLayer LstmLayer::zeros(std::size_t input_size, std::size_t hidden_size) {
    const auto k = static_cast<Eigen::Index>(input_size);
    const auto s = static_cast<Eigen::Index>(hidden_size);
    return {input_size, hidden_size, Matrix::Zero(4 * s, k), Matrix::Zero(4 * s, s), Matrix::Zero(4 * s, 1)};
}

LstmLayer LstmLayer::initialized(std::size_t input_size, std::size_t hidden_size, Rng& rng) {
    LstmLayer layer = zeros(input_size, hidden_size);
    const auto k = static_cast<Eigen::Index>(input_size);
    const auto s = static_cast<Eigen::Index>(hidden_size);
    for (Eigen::Index g = 0; g < 4; ++g) {
        glorot_fill(layer.W.block(g * s, 0, s, k), input_size, hidden_size, rng);
        glorot_fill(layer.U.block(g * s, 0, s, s), hidden_size, hidden_size, rng);
    }
    layer.b.block(s, 0, s, 1).setOnes();
    return layer;
}

LstmGrads LstmGrads::zeros_like(const LstmLayer& layer) {
    return {Matrix::Zero(layer.W.rows(), layer.W.cols()), Matrix::Zero(layer.U.rows(), layer.U.cols()),
            Matrix::Zero(layer.b.rows(), 1), {}};
}

std::vector<Matrix> pack_sequences(std::span<const Matrix> sequences) {
    if (sequences.empty()) return {};
    const Eigen::Index k = sequences.front().rows();
    const Eigen::Index m = sequences.front().cols();
    const auto batch = static_cast<Eigen::Index>(sequences.size());
    std::vector<Matrix> steps(static_cast<std::size_t>(m), Matrix(k, batch));
    for (Eigen::Index b = 0; b < batch; ++b) {
        const Matrix& seq = sequences[static_cast<std::size_t>(b)];
        if (seq.rows() != k || seq.cols() != m) throw ContractError("pack_sequences: ragged batch");
        for (Eigen::Index t = 0; t < m; ++t) steps[static_cast<std::size_t>(t)].col(b) = seq.col(t);
    }
    return steps;
}

std::vector<Matrix> lstm_forward(const LstmLayer& layer, std::span<const Matrix> steps, LstmCache& cache) {
    cache = {};
    const auto s = static_cast<Eigen::Index>(layer.hidden_size);
    if (steps.empty()) return {};
    const Eigen::Index batch = steps.front().cols();
    Matrix h = Matrix::Zero(s, batch);
    Matrix c = Matrix::Zero(s, batch);
    std::vector<Matrix> out;
    out.reserve(steps.size());
    for (const Matrix& x : steps) {
        if (x.rows() != static_cast<Eigen::Index>(layer.input_size) || x.cols() != batch) {
            throw ContractError("lstm_forward: input shape does not match layer");
        }
        if (!x.allFinite()) throw NumericError("lstm_forward: non-finite input");
        Matrix a = layer.W * x + layer.U * h;
        a.colwise() += layer.b.col(0);
        Matrix gates(4 * s, batch);
        gates.topRows(3 * s) = sigmoid(a.topRows(3 * s));
        gates.bottomRows(s) = a.bottomRows(s).array().tanh().matrix();
        c = (gates.middleRows(s, s).array() * c.array() +
             gates.topRows(s).array() * gates.bottomRows(s).array())
                .matrix();
        Matrix tc = c.array().tanh().matrix();
        h = (gates.middleRows(2 * s, s).array() * tc.array()).matrix();

        cache.x.push_back(x);
        cache.gates.push_back(std::move(gates));
        cache.c.push_back(c);
        cache.tanh_c.push_back(std::move(tc));
        cache.h.push_back(h);
        out.push_back(h);
    }
    return out;
}

Matrix lstm_forward(const LstmLayer& layer, const Matrix& sequence, LstmCache& cache) {
    std::vector<Matrix> steps;
    steps.reserve(static_cast<std::size_t>(sequence.cols()));
    for (Eigen::Index t = 0; t < sequence.cols(); ++t) steps.emplace_back(sequence.col(t));
    const auto hs = lstm_forward(layer, steps, cache);
    Matrix out(static_cast<Eigen::Index>(layer.hidden_size), sequence.cols());
    for (std::size_t t = 0; t < hs.size(); ++t) out.col(static_cast<Eigen::Index>(t)) = hs[t].col(0);
    return out;
}

LstmGrads lstm_backward(const LstmLayer& layer, const LstmCache& cache, std::span<const Matrix> dh) {
    const std::size_t steps = cache.steps();
    if (dh.size() != steps) throw ContractError("lstm_backward: upstream gradient length does not match cache");
    LstmGrads g = LstmGrads::zeros_like(layer);
    g.dx.resize(steps);
    if (steps == 0) return g;
    const auto s = static_cast<Eigen::Index>(layer.hidden_size);
    const Eigen::Index batch = cache.x.front().cols();
    for (const Matrix& d : dh) {
        if (d.rows() != s || d.cols() != batch) throw ContractError("lstm_backward: upstream gradient shape mismatch");
    }

    Matrix dh_next = Matrix::Zero(s, batch);
    Matrix dc_next = Matrix::Zero(s, batch);
    Matrix da(4 * s, batch);
    for (std::size_t step = steps; step-- > 0;) {
        const Matrix& gates = cache.gates[step];
        const auto i = gates.topRows(s).array();
        const auto f = gates.middleRows(s, s).array();
        const auto o = gates.middleRows(2 * s, s).array();
        const auto cand = gates.bottomRows(s).array();
        const auto tc = cache.tanh_c[step].array();

        const Matrix dh_t = dh[step] + dh_next;
        const Matrix dc = (dc_next.array() + dh_t.array() * o * (1.0 - tc.square())).matrix();
        const Matrix c_prev = step > 0 ? cache.c[step - 1] : Matrix::Zero(s, batch);

        da.topRows(s) = (dc.array() * cand * i * (1.0 - i)).matrix();
        da.middleRows(s, s) = (dc.array() * c_prev.array() * f * (1.0 - f)).matrix();
        da.middleRows(2 * s, s) = (dh_t.array() * tc * o * (1.0 - o)).matrix();
        da.bottomRows(s) = (dc.array() * i * (1.0 - cand.square())).matrix();

        g.dW.noalias() += da * cache.x[step].transpose();
        if (step > 0) g.dU.noalias() += da * cache.h[step - 1].transpose();
        g.db += da.rowwise().sum();
        g.dx[step] = layer.W.transpose() * da;
        dh_next = layer.U.transpose() * da;
        dc_next = (dc.array() * f).matrix();
    }
    return g;
}

DenseLayer DenseLayer::initialized(std::size_t in, std::size_t out, Activation act, Rng& rng) {
    DenseLayer layer{Matrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
                     Matrix::Zero(static_cast<Eigen::Index>(out), 1), act};
    glorot_fill(layer.weights.block(0, 0, layer.weights.rows(), layer.weights.cols()), in, out, rng);
    return layer;
}

Matrix dense_forward(const DenseLayer& layer, const Matrix& input, DenseCache* cache) {
    if (input.rows() != layer.weights.cols()) throw ContractError("dense_forward: input size mismatch");
    Matrix pre = layer.weights * input;
    pre.colwise() += layer.bias.col(0);
    Matrix out = layer.activation == Activation::ReLU ? Matrix(pre.cwiseMax(0.0)) : pre;
    if (cache) {
        cache->input = input;
        cache->pre = std::move(pre);
    }
    return out;
}

DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache, const Matrix& dy) {
    if (dy.rows() != layer.weights.rows() || dy.cols() != cache.input.cols()) {
        throw ContractError("dense_backward: gradient shape mismatch");
    }
    Matrix dpre = dy;
    if (layer.activation == Activation::ReLU) {
        dpre = (cache.pre.array() > 0.0).select(dy, 0.0);
    }
    return {dpre * cache.input.transpose(), dpre.rowwise().sum(), layer.weights.transpose() * dpre};
}

LossResult mae_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
        throw ContractError("mae_loss: shape mismatch");
    }
    const auto n = static_cast<double>(pred.size());
    if (n == 0) throw ContractError("mae_loss: empty input");
    const Matrix diff = pred - target;
    Matrix grad = diff.unaryExpr([n](double d) { return d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0); });
    return {diff.cwiseAbs().sum() / n, std::move(grad)};
}

void adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads) {
    if (params.size() != grads.size()) throw ContractError("adam_step: parameter and gradient counts differ");
    if (state.first.empty()) {
        for (const Matrix* p : params) {
            state.first.push_back(Matrix::Zero(p->rows(), p->cols()));
            state.second.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
    }
    if (state.first.size() != params.size()) throw ContractError("adam_step: parameter list changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->rows() != grads[i]->rows() || params[i]->cols() != grads[i]->cols() ||
            state.first[i].rows() != params[i]->rows() || state.first[i].cols() != params[i]->cols()) {
            throw ContractError("adam_step: shape mismatch");
        }
    }
    ++state.step;
    const auto& o = state.options;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Matrix& g = *grads[i];
        state.first[i] = o.beta1 * state.first[i] + (1.0 - o.beta1) * g;
        state.second[i] = o.beta2 * state.second[i] + (1.0 - o.beta2) * g.cwiseProduct(g);
        params[i]->array() -= o.learning_rate * (state.first[i].array() / c1) /
                              ((state.second[i].array() / c2).sqrt() + o.epsilon);
    }
}

double clip_global_norm(std::span<Matrix* const> grads, double max_norm) {
    double sq = 0.0;
    for (const Matrix* g : grads) sq += g->squaredNorm();
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (Matrix* g : grads) *g *= scale;
    }
    return norm;
}

nlohmann::ordered_json matrix_to_json(const Matrix& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const nlohmann::ordered_json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw ContractError("matrix: data size does not match shape");
    return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

nlohmann::ordered_json lstm_to_json(const LstmLayer& layer) {
    return {{"type", "lstm"},
            {"input_size", layer.input_size},
            {"hidden_size", layer.hidden_size},
            {"gate_order", "ifog"},
            {"W", matrix_to_json(layer.W)},
            {"U", matrix_to_json(layer.U)},
            {"b", matrix_to_json(layer.b)}};
}

LstmLayer lstm_from_json(const nlohmann::ordered_json& j) {
    LstmLayer layer{j.at("input_size").get<std::size_t>(), j.at("hidden_size").get<std::size_t>(),
                    matrix_from_json(j.at("W")), matrix_from_json(j.at("U")), matrix_from_json(j.at("b"))};
    const auto s = static_cast<Eigen::Index>(layer.hidden_size);
    if (layer.W.rows() != 4 * s || layer.W.cols() != static_cast<Eigen::Index>(layer.input_size) ||
        layer.U.rows() != 4 * s || layer.U.cols() != s || layer.b.rows() != 4 * s) {
        throw ContractError("lstm: parameter shapes inconsistent with sizes");
    }
    return layer;
}

nlohmann::ordered_json dense_to_json(const DenseLayer& layer) {
    return {{"type", "dense"},
            {"activation", layer.activation == Activation::ReLU ? "relu" : "identity"},
            {"weights", matrix_to_json(layer.weights)},
            {"bias", matrix_to_json(layer.bias)}};
}

DenseLayer dense_from_json(const nlohmann::ordered_json& j) {
    DenseLayer layer{matrix_from_json(j.at("weights")), matrix_from_json(j.at("bias")),
                     j.at("activation").get<std::string>() == "relu" ? Activation::ReLU : Activation::Identity};
    if (layer.bias.rows() != layer.weights.rows()) throw ContractError("dense: bias shape mismatch");
    return layer;
}

}  // namespace meslstm
