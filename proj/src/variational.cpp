#include "meslstm/variational.hpp"

#include "meslstm/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace meslstm {

double softplus(double x) noexcept { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double softplus_inverse(double y) {
    if (!(y > 0.0)) throw ContractError("softplus_inverse: argument must be positive");
    return y > 30.0 ? y : std::log(std::expm1(y));
}

namespace {

double logistic(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

Matrix softplus_of(const Matrix& rho) { return rho.unaryExpr([](double r) { return softplus(r); }); }
Matrix logistic_of(const Matrix& rho) { return rho.unaryExpr([](double r) { return logistic(r); }); }

double kl_sum(const Matrix& mu, const Matrix& rho) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        const double sigma = softplus(rho.data()[i]);
        const double m = mu.data()[i];
        total += 0.5 * (m * m + sigma * sigma - 1.0 - 2.0 * std::log(sigma));
    }
    return total;
}

}  // namespace

FlipoutDense FlipoutDense::initialized(std::size_t in, std::size_t out, Rng& rng, double initial_sigma) {
    const auto o = static_cast<Eigen::Index>(out);
    const auto i = static_cast<Eigen::Index>(in);
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    FlipoutDense layer;
    layer.weight_mean = Matrix::NullaryExpr(o, i, [&] { return rng.uniform(-bound, bound); });
    layer.weight_rho = Matrix::Constant(o, i, softplus_inverse(initial_sigma));
    layer.bias_mean = Matrix::Zero(o, 1);
    layer.bias_rho = Matrix::Constant(o, 1, softplus_inverse(initial_sigma));
    return layer;
}

Matrix FlipoutDense::weight_sigma() const { return softplus_of(weight_rho); }
Matrix FlipoutDense::bias_sigma() const { return softplus_of(bias_rho); }

FlipoutNoise draw_flipout_noise(const FlipoutDense& layer, Eigen::Index batch, Rng& rng) {
    const auto out = static_cast<Eigen::Index>(layer.out_size());
    const auto in = static_cast<Eigen::Index>(layer.in_size());
    FlipoutNoise noise;
    noise.kernel = Matrix::NullaryExpr(out, in, [&] { return rng.normal(); });
    noise.input_sign = Matrix::NullaryExpr(in, batch, [&] { return rng.sign(); });
    noise.output_sign = Matrix::NullaryExpr(out, batch, [&] { return rng.sign(); });
    noise.bias = layer.stochastic_bias ? Matrix(Matrix::NullaryExpr(out, 1, [&] { return rng.normal(); }))
                                       : Matrix(Matrix::Zero(out, 1));
    return noise;
}

Matrix flipout_forward(const FlipoutDense& layer, const Matrix& input, const FlipoutNoise& noise,
                       FlipoutCache* cache) {
    if (input.rows() != layer.weight_mean.cols()) throw ContractError("flipout_forward: input size mismatch");
    if (noise.input_sign.cols() != input.cols() || noise.kernel.rows() != layer.weight_mean.rows() ||
        noise.kernel.cols() != layer.weight_mean.cols()) {
        throw ContractError("flipout_forward: noise shape does not match layer and batch");
    }
    const Matrix perturbation = layer.weight_sigma().cwiseProduct(noise.kernel);
    Matrix out = layer.weight_mean * input +
                 (perturbation * input.cwiseProduct(noise.input_sign)).cwiseProduct(noise.output_sign);
    Matrix bias = layer.bias_mean;
    if (layer.stochastic_bias) bias += layer.bias_sigma().cwiseProduct(noise.bias);
    out.colwise() += bias.col(0);
    if (cache) {
        cache->input = input;
        cache->noise = noise;
    }
    return out;
}

Matrix flipout_forward(const FlipoutDense& layer, const Matrix& input, std::uint64_t seed, FlipoutCache* cache) {
    Rng rng(seed);
    const FlipoutNoise noise = draw_flipout_noise(layer, input.cols(), rng);
    return flipout_forward(layer, input, noise, cache);
}

FlipoutGrads flipout_backward(const FlipoutDense& layer, const FlipoutCache& cache, const Matrix& dy) {
    if (dy.rows() != layer.weight_mean.rows() || dy.cols() != cache.input.cols()) {
        throw ContractError("flipout_backward: gradient shape mismatch");
    }
    const auto& n = cache.noise;
    const Matrix sigma = layer.weight_sigma();
    const Matrix signed_input = cache.input.cwiseProduct(n.input_sign);
    const Matrix g = dy.cwiseProduct(n.output_sign);

    FlipoutGrads out;
    out.d_weight_mean = dy * cache.input.transpose();
    const Matrix d_perturbation = g * signed_input.transpose();
    out.d_weight_rho = d_perturbation.cwiseProduct(n.kernel).cwiseProduct(logistic_of(layer.weight_rho));
    out.d_bias_mean = dy.rowwise().sum();
    out.d_bias_rho = layer.stochastic_bias
                         ? Matrix(out.d_bias_mean.cwiseProduct(n.bias).cwiseProduct(logistic_of(layer.bias_rho)))
                         : Matrix(Matrix::Zero(layer.bias_rho.rows(), 1));
    out.dx = layer.weight_mean.transpose() * dy +
             (sigma.cwiseProduct(n.kernel).transpose() * g).cwiseProduct(n.input_sign);
    return out;
}

double kl_term(const FlipoutDense& layer) {
    double total = kl_sum(layer.weight_mean, layer.weight_rho);
    if (layer.stochastic_bias) total += kl_sum(layer.bias_mean, layer.bias_rho);
    return total;
}

void add_kl_gradient(const FlipoutDense& layer, double scale, FlipoutGrads& grads) {
    auto add = [scale](const Matrix& mu, const Matrix& rho, Matrix& d_mu, Matrix& d_rho) {
        const Matrix sigma = softplus_of(rho);
        d_mu += scale * mu;
        d_rho += scale * ((sigma.array() - sigma.array().inverse()) * logistic_of(rho).array()).matrix();
    };
    add(layer.weight_mean, layer.weight_rho, grads.d_weight_mean, grads.d_weight_rho);
    if (layer.stochastic_bias) add(layer.bias_mean, layer.bias_rho, grads.d_bias_mean, grads.d_bias_rho);
}

std::pair<double, double> percentile_pair(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("significance level must lie in (0,1)");
    return {alpha / 2.0, (1.0 - alpha) + alpha / 2.0};
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw ContractError("quantile: empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("quantile: probability outside [0,1]");
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval extract_interval(const ForecastDistribution& dist, double alpha) {
    const auto [p_lo, p_hi] = percentile_pair(alpha);
    if (dist.samples.size() < 2) throw ContractError("extract_interval: need at least two samples");
    const Eigen::Index rows = dist.samples.front().rows();
    const Eigen::Index cols = dist.samples.front().cols();
    Interval out{alpha, Matrix(rows, cols), Matrix(rows, cols)};
    std::vector<double> column(dist.samples.size());
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            for (std::size_t n = 0; n < dist.samples.size(); ++n) column[n] = dist.samples[n](r, c);
            std::sort(column.begin(), column.end());
            out.lower(r, c) = quantile_sorted(column, p_lo);
            out.upper(r, c) = quantile_sorted(column, p_hi);
        }
    }
    return out;
}

ForecastDistribution sample_head(const FlipoutDense& layer, const Matrix& features, std::size_t n_samples,
                                 std::uint64_t seed, const std::function<Matrix(const Matrix&)>& postprocess) {
    if (n_samples < 2) throw ContractError("sample_forecasts: at least two Monte-Carlo samples required");
    ForecastDistribution dist;
    dist.samples.reserve(n_samples);
    for (std::size_t n = 0; n < n_samples; ++n) {
        const Matrix raw = flipout_forward(layer, features, derive_seed(seed, n));
        Matrix sample = postprocess(raw);
        if (!sample.allFinite()) throw NumericError("sample_forecasts: non-finite sample");
        dist.samples.push_back(std::move(sample));
    }
    return dist;
}

void write_distribution_csv(std::ostream& os, const ForecastDistribution& dist,
                            const std::vector<std::string>& predictand_names) {
    os << "predictand,step,sample_index,value\n";
    if (dist.samples.empty()) return;
    const Eigen::Index rows = dist.samples.front().rows();
    const Eigen::Index cols = dist.samples.front().cols();
    if (static_cast<std::size_t>(rows) != predictand_names.size()) {
        throw ContractError("write_distribution_csv: one name per predictand required");
    }
    os.precision(17);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            for (std::size_t n = 0; n < dist.samples.size(); ++n) {
                os << predictand_names[static_cast<std::size_t>(r)] << ',' << c + 1 << ',' << n << ','
                   << dist.samples[n](r, c) << '\n';
            }
        }
    }
}

nlohmann::ordered_json flipout_to_json(const FlipoutDense& layer) {
    return {{"type", "dense_flipout"},
            {"stochastic_bias", layer.stochastic_bias},
            {"weight_mean", matrix_to_json(layer.weight_mean)},
            {"weight_rho", matrix_to_json(layer.weight_rho)},
            {"bias_mean", matrix_to_json(layer.bias_mean)},
            {"bias_rho", matrix_to_json(layer.bias_rho)}};
}

FlipoutDense flipout_from_json(const nlohmann::ordered_json& j) {
    FlipoutDense layer;
    layer.stochastic_bias = j.at("stochastic_bias").get<bool>();
    layer.weight_mean = matrix_from_json(j.at("weight_mean"));
    layer.weight_rho = matrix_from_json(j.at("weight_rho"));
    layer.bias_mean = matrix_from_json(j.at("bias_mean"));
    layer.bias_rho = matrix_from_json(j.at("bias_rho"));
    if (layer.weight_rho.rows() != layer.weight_mean.rows() || layer.weight_rho.cols() != layer.weight_mean.cols() ||
        layer.bias_mean.rows() != layer.weight_mean.rows() || layer.bias_rho.rows() != layer.weight_mean.rows()) {
        throw ContractError("dense_flipout: parameter shapes inconsistent");
    }
    return layer;
}

}  // namespace meslstm
