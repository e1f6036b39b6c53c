#pragma once

#include "meslstm/timeseries.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace testing_support {

/// Frame with columns c0..c{k-1} starting at day 0; predictands are the
/// first `j` rows.
inline meslstm::SeriesFrame frame_from(const Eigen::MatrixXd& values, std::size_t j = 1, std::int64_t first_day = 0) {
    std::vector<std::int64_t> days(static_cast<std::size_t>(values.cols()));
    for (std::size_t t = 0; t < days.size(); ++t) days[t] = first_day + static_cast<std::int64_t>(t);
    std::vector<std::string> names;
    for (Eigen::Index r = 0; r < values.rows(); ++r) names.push_back("c" + std::to_string(r));
    std::vector<std::size_t> pred;
    for (std::size_t p = 0; p < j; ++p) pred.push_back(p);
    return {std::move(days), values, std::move(names), std::move(pred)};
}

inline meslstm::SeriesFrame ramp_frame(std::size_t k, std::size_t T, std::size_t j = 1) {
    Eigen::MatrixXd v(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(T));
    for (Eigen::Index r = 0; r < v.rows(); ++r)
        for (Eigen::Index c = 0; c < v.cols(); ++c) v(r, c) = 10.0 * static_cast<double>(r + 1) + static_cast<double>(c);
    return frame_from(v, j);
}

/// Level plus weekly pattern plus AR(1) noise with innovation scale
/// `noise_frac` of the level (stationary std equals noise_frac * level).
inline meslstm::SeriesFrame seasonal_frame(std::size_t T, std::size_t k, double noise_frac, std::uint64_t seed) {
    static const double pattern[7] = {5, -3, 2, -1, 4, -6, -1};
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd v(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(T));
    const double phi = 0.5;
    for (std::size_t c = 0; c < k; ++c) {
        const double level = 100.0 * static_cast<double>(c + 1);
        const double innov = noise_frac * level * std::sqrt(1.0 - phi * phi);
        double e = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            e = phi * e + innov * z(gen);
            v(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) =
                level + pattern[t % 7] * static_cast<double>(c + 1) + e;
        }
    }
    return frame_from(v, 1);
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("meslstm_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing_support
