#pragma once

#include "meslstm/neural.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace meslstm {

/// log(1 + e^x), overflow-safe.
double softplus(double x) noexcept;
/// Inverse of softplus for y > 0.
double softplus_inverse(double y);

/**
 * @brief Dense layer with a mean-field Gaussian posterior over its kernel.
 *
 * Each weight has posterior N(mu, softplus(rho)^2) and prior N(0, 1). The
 * bias is a point estimate unless `stochastic_bias` is set, in which case it
 * carries its own (mean, rho) pair and contributes to the KL term.
 */
struct FlipoutDense {
    Matrix weight_mean;  // out x in
    Matrix weight_rho;   // out x in
    Matrix bias_mean;    // out x 1
    Matrix bias_rho;     // out x 1
    bool stochastic_bias = false;

    static FlipoutDense initialized(std::size_t in, std::size_t out, Rng& rng, double initial_sigma = 0.05);

    std::size_t in_size() const noexcept { return static_cast<std::size_t>(weight_mean.cols()); }
    std::size_t out_size() const noexcept { return static_cast<std::size_t>(weight_mean.rows()); }
    Matrix weight_sigma() const;
    Matrix bias_sigma() const;
    std::size_t parameter_count() const noexcept {
        return static_cast<std::size_t>(2 * weight_mean.size() + (stochastic_bias ? 2 : 1) * bias_mean.size());
    }
};

/// Shared Gaussian kernel perturbation plus per-example sign vectors.
struct FlipoutNoise {
    Matrix kernel;       // out x in, N(0,1)
    Matrix input_sign;   // in x B, +-1
    Matrix output_sign;  // out x B, +-1
    Matrix bias;         // out x 1, N(0,1)
};

FlipoutNoise draw_flipout_noise(const FlipoutDense& layer, Eigen::Index batch, Rng& rng);

struct FlipoutCache {
    Matrix input;
    FlipoutNoise noise;
};

struct FlipoutGrads {
    Matrix d_weight_mean;
    Matrix d_weight_rho;
    Matrix d_bias_mean;
    Matrix d_bias_rho;
    Matrix dx;
};

/// out = mu x + ((sigma .* E)(x .* r)) .* s + bias sample, for a batch x
/// of shape in x B.
Matrix flipout_forward(const FlipoutDense& layer, const Matrix& input, const FlipoutNoise& noise,
                       FlipoutCache* cache = nullptr);
/// Draws fresh noise from `seed`.
Matrix flipout_forward(const FlipoutDense& layer, const Matrix& input, std::uint64_t seed,
                       FlipoutCache* cache = nullptr);

/// Gradients of the data loss for the noise recorded in `cache`.
FlipoutGrads flipout_backward(const FlipoutDense& layer, const FlipoutCache& cache, const Matrix& dy);

/// Sum over stochastic parameters of KL(N(mu, sigma^2) || N(0, 1)).
double kl_term(const FlipoutDense& layer);

/// Gradient of `scale * kl_term` w.r.t. (mu, rho), added into `grads`.
void add_kl_gradient(const FlipoutDense& layer, double scale, FlipoutGrads& grads);

/// Monte-Carlo forecast samples. samples[n] is j x m.
struct ForecastDistribution {
    std::vector<Matrix> samples;
    std::vector<double> alphas{0.05, 0.1, 0.2};

    std::size_t size() const noexcept { return samples.size(); }
};

struct Interval {
    double alpha = 0.0;
    Matrix lower;
    Matrix upper;
};

/// (alpha/2, (1 - alpha) + alpha/2).
std::pair<double, double> percentile_pair(double alpha);

/// Linear interpolation between order statistics; `sorted` ascending,
/// 0 <= p <= 1.
double quantile_sorted(std::span<const double> sorted, double p);

Interval extract_interval(const ForecastDistribution& dist, double alpha);

/**
 * N_mc stochastic passes of the head over a fixed feature vector (in x 1).
 * Pass n draws its noise from derive_seed(seed, n), so the result does not
 * depend on evaluation order. `postprocess` maps each raw out x 1 vector to
 * its j x m sample.
 */
ForecastDistribution sample_head(const FlipoutDense& layer, const Matrix& features, std::size_t n_samples,
                                 std::uint64_t seed, const std::function<Matrix(const Matrix&)>& postprocess);

/// CSV with columns predictand,step,sample_index,value (step from 1).
void write_distribution_csv(std::ostream& os, const ForecastDistribution& dist,
                            const std::vector<std::string>& predictand_names);

nlohmann::ordered_json flipout_to_json(const FlipoutDense& layer);
FlipoutDense flipout_from_json(const nlohmann::ordered_json& j);

}  // namespace meslstm
