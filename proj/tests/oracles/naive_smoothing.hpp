#pragma once

// Straight-line re-implementation of the smoothing recursions, written against
// the recursions rather than the library. The seasonal indices live in a
// rotating queue (front = index for the next observation) instead of a
// phase-indexed array, so indexing mistakes in either version show up as a
// mismatch.

#include <cmath>
#include <cstddef>
#include <deque>
#include <vector>

namespace oracle {

struct Series {
    bool multiplicative = false;
    double level = 0.0;
    double trend = 0.0;
    double trend0 = 0.0;
    std::deque<double> season;  // season.front() applies to the next step
};

struct Constants {
    double alpha, gamma, delta;
    std::size_t period;
    bool freeze = false;
};

inline void renormalize(std::deque<double>& s, bool multiplicative) {
    const double n = static_cast<double>(s.size());
    if (!multiplicative) {
        double total = 0.0;
        for (double v : s) total += v;
        for (double& v : s) v -= total / n;
        return;
    }
    double prod_log = 0.0;
    for (double v : s) prod_log += std::log(v);
    const double g = std::exp(prod_log / n);
    for (double& v : s) v /= g;
}

inline Series start(const std::vector<double>& y, const Constants& k, bool multiplicative) {
    Series s;
    s.multiplicative = multiplicative;
    const std::size_t T = y.size();
    double sum = 0.0;
    for (double v : y) sum += v;
    s.level = sum / static_cast<double>(T);
    const double span = static_cast<double>(T - 1);
    s.trend = multiplicative ? std::pow(y.back() / y.front(), 1.0 / span) : (y.back() - y.front()) / span;
    s.trend0 = s.trend;
    // Trend line through the mean at time (T-1)/2.
    for (std::size_t p = 0; p < k.period; ++p) {
        const double dt = static_cast<double>(p) - span / 2.0;
        s.season.push_back(multiplicative ? y[p] / (s.level * std::pow(s.trend, dt))
                                          : y[p] - (s.level + s.trend * dt));
    }
    renormalize(s.season, multiplicative);
    return s;
}

inline void step(Series& s, double y, const Constants& k) {
    const double sv = s.season.front();
    s.season.pop_front();
    const double l = s.level;
    const double b = s.trend;
    double next_s;
    if (!s.multiplicative) {
        s.level = k.alpha * (y - sv) + (1 - k.alpha) * (l + b);
        s.trend = k.gamma * (s.level - l) + (1 - k.gamma) * b;
        next_s = k.delta * (y - s.level) + (1 - k.delta) * sv;
    } else {
        s.level = k.alpha * (y / sv) + (1 - k.alpha) * (l * b);
        s.trend = k.gamma * (s.level / l) + (1 - k.gamma) * b;
        next_s = k.delta * (y / (l * (k.freeze ? s.trend0 : b))) + (1 - k.delta) * sv;
    }
    s.season.push_back(next_s);
    // Mean and geometric mean are order-free, so the rotation is harmless.
    renormalize(s.season, s.multiplicative);
}

/// Seasonal index for the step `ahead` after the last absorbed one.
inline double season_ahead(const Series& s, std::size_t ahead) {
    return s.season[(ahead - 1) % s.season.size()];
}

}  // namespace oracle
