#pragma once

#include "meslstm/random.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstddef>
#include <span>
#include <vector>

namespace meslstm {

using Matrix = Eigen::MatrixXd;

/**
 * @brief Single LSTM layer, no peepholes.
 *
 * Gate parameters are stacked in blocks of `hidden` rows in the order
 * input, forget, output, candidate: W is 4S x k, U is 4S x S, b is 4S x 1.
 * Row block [S, 2S) of b is the forget-gate bias.
 */
struct LstmLayer {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    Matrix W;
    Matrix U;
    Matrix b;

    /// Glorot-uniform weights per gate block, zero biases, forget bias 1.
    static LstmLayer initialized(std::size_t input_size, std::size_t hidden_size, Rng& rng);
    static LstmLayer zeros(std::size_t input_size, std::size_t hidden_size);

    std::size_t parameter_count() const noexcept {
        return static_cast<std::size_t>(W.size() + U.size() + b.size());
    }
};

/// Activations of one forward pass over a batch; every entry is indexed by
/// time step and holds one column per sequence.
struct LstmCache {
    std::vector<Matrix> x;       // k x B
    std::vector<Matrix> gates;   // 4S x B, post-activation
    std::vector<Matrix> c;       // S x B
    std::vector<Matrix> tanh_c;  // S x B
    std::vector<Matrix> h;       // S x B

    std::size_t steps() const noexcept { return x.size(); }
    std::size_t batch() const noexcept { return x.empty() ? 0 : static_cast<std::size_t>(x.front().cols()); }
};

struct LstmGrads {
    Matrix dW;
    Matrix dU;
    Matrix db;
    std::vector<Matrix> dx;  // per step, k x B

    static LstmGrads zeros_like(const LstmLayer& layer);
};

/// Forward pass over B sequences of equal length. `steps[t]` is k x B.
/// Initial hidden and cell states are zero. Returns h per step (S x B).
std::vector<Matrix> lstm_forward(const LstmLayer& layer, std::span<const Matrix> steps, LstmCache& cache);

/// Batch-of-one convenience: sequence is k x m, result is S x m.
Matrix lstm_forward(const LstmLayer& layer, const Matrix& sequence, LstmCache& cache);

/// Backpropagation through time. `dh[t]` is the loss gradient w.r.t. h_t
/// (S x B). Parameter gradients are summed over the batch.
LstmGrads lstm_backward(const LstmLayer& layer, const LstmCache& cache, std::span<const Matrix> dh);

/// Sequence-major packing: B sequences of k x m into m matrices of k x B.
std::vector<Matrix> pack_sequences(std::span<const Matrix> sequences);

enum class Activation { Identity, ReLU };

struct DenseLayer {
    Matrix weights;  // out x in
    Matrix bias;     // out x 1
    Activation activation = Activation::Identity;

    static DenseLayer initialized(std::size_t in, std::size_t out, Activation act, Rng& rng);

    std::size_t in_size() const noexcept { return static_cast<std::size_t>(weights.cols()); }
    std::size_t out_size() const noexcept { return static_cast<std::size_t>(weights.rows()); }
    std::size_t parameter_count() const noexcept { return static_cast<std::size_t>(weights.size() + bias.size()); }
};

struct DenseCache {
    Matrix input;  // in x B
    Matrix pre;    // out x B
};

struct DenseGrads {
    Matrix dW;
    Matrix db;
    Matrix dx;
};

Matrix dense_forward(const DenseLayer& layer, const Matrix& input, DenseCache* cache = nullptr);
DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache, const Matrix& dy);

struct LossResult {
    double value = 0.0;
    Matrix gradient;
};

/// Mean absolute error and its subgradient sign(pred - target) / n, zero at
/// ties.
LossResult mae_loss(const Matrix& pred, const Matrix& target);

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moments per parameter tensor, created lazily on the
/// first step.
struct AdamState {
    AdamOptions options;
    long step = 0;
    std::vector<Matrix> first;
    std::vector<Matrix> second;
};

/// Bias-corrected Adam update, in place.
void adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads);

/// Scales gradients so their global L2 norm does not exceed `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(std::span<Matrix* const> grads, double max_norm);

/// {"rows":r, "cols":c, "data":[column-major values]}
nlohmann::ordered_json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json lstm_to_json(const LstmLayer& layer);
LstmLayer lstm_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json dense_to_json(const DenseLayer& layer);
DenseLayer dense_from_json(const nlohmann::ordered_json& j);

}  // namespace meslstm
