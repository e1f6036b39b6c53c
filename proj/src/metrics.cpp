#include "meslstm/metrics.hpp"

#include "meslstm/error.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace meslstm {

namespace {

void require_same(std::size_t a, std::size_t b, const char* op) {
    if (a != b) throw ContractError(std::string(op) + ": length mismatch");
    if (a == 0) throw ContractError(std::string(op) + ": empty input");
}

void require_ordered(std::span<const double> lower, std::span<const double> upper, const char* op) {
    for (std::size_t t = 0; t < lower.size(); ++t) {
        if (lower[t] > upper[t]) throw ContractError(std::string(op) + ": lower bound exceeds upper bound");
    }
}

bool all_equal(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

double sample_variance(std::span<const double> x, double mean) {
    if (all_equal(x)) return 0.0;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(x.size() - 1);
}

double normal_two_sided(double z) {
    if (std::isinf(z)) return 0.0;
    const boost::math::normal_distribution<double> n;
    return 2.0 * boost::math::cdf(boost::math::complement(n, std::abs(z)));
}

}  // namespace

double smape(std::span<const double> actual, std::span<const double> forecast) {
    require_same(actual.size(), forecast.size(), "smape");
    double total = 0.0;
    for (std::size_t t = 0; t < actual.size(); ++t) {
        const double denom = std::abs(actual[t]) + std::abs(forecast[t]);
        if (denom > 0.0) total += std::abs(actual[t] - forecast[t]) / denom;
    }
    return 2.0 * total / static_cast<double>(actual.size());
}

double rmse(std::span<const double> actual, std::span<const double> forecast) {
    require_same(actual.size(), forecast.size(), "rmse");
    double ss = 0.0;
    for (std::size_t t = 0; t < actual.size(); ++t) ss += (actual[t] - forecast[t]) * (actual[t] - forecast[t]);
    return std::sqrt(ss / static_cast<double>(actual.size()));
}

double mae(std::span<const double> actual, std::span<const double> forecast) {
    require_same(actual.size(), forecast.size(), "mae");
    double s = 0.0;
    for (std::size_t t = 0; t < actual.size(); ++t) s += std::abs(actual[t] - forecast[t]);
    return s / static_cast<double>(actual.size());
}

double mis(std::span<const double> actual, std::span<const double> lower, std::span<const double> upper,
           double alpha) {
    require_same(actual.size(), lower.size(), "mis");
    require_same(actual.size(), upper.size(), "mis");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("mis: alpha must lie in (0,1)");
    require_ordered(lower, upper, "mis");
    double total = 0.0;
    for (std::size_t t = 0; t < actual.size(); ++t) {
        total += upper[t] - lower[t];
        if (actual[t] < lower[t]) total += (2.0 / alpha) * (lower[t] - actual[t]);
        if (actual[t] > upper[t]) total += (2.0 / alpha) * (actual[t] - upper[t]);
    }
    return total / static_cast<double>(actual.size());
}

double coverage(std::span<const double> actual, std::span<const double> lower, std::span<const double> upper) {
    require_same(actual.size(), lower.size(), "coverage");
    require_same(actual.size(), upper.size(), "coverage");
    require_ordered(lower, upper, "coverage");
    std::size_t inside = 0;
    for (std::size_t t = 0; t < actual.size(); ++t) {
        if (lower[t] <= actual[t] && actual[t] <= upper[t]) ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(actual.size());
}

TestResult t_test_one_sided(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw ContractError("t_test: each sample needs at least two values");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / na;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / nb;
    const double qa = sample_variance(a, ma) / na;
    const double qb = sample_variance(b, mb) / nb;
    const double se2 = qa + qb;

    TestResult r;
    if (!(se2 > 0.0)) {
        r.degenerate = true;
        if (ma == mb) {
            r.statistic = 0.0;
            r.p_value = 0.5;
        } else {
            r.statistic = ma < mb ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
            r.p_value = ma < mb ? 0.0 : 1.0;
        }
        return r;
    }
    r.statistic = (ma - mb) / std::sqrt(se2);
    r.degrees_of_freedom = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    const boost::math::students_t_distribution<double> dist(r.degrees_of_freedom);
    r.p_value = boost::math::cdf(dist, r.statistic);
    return r;
}

std::vector<double> loss_differentials(std::span<const double> actual, std::span<const double> forecast_a,
                                       std::span<const double> forecast_b, DmLoss loss, std::size_t* skipped) {
    require_same(actual.size(), forecast_a.size(), "dm_test");
    require_same(actual.size(), forecast_b.size(), "dm_test");
    std::vector<double> d;
    d.reserve(actual.size());
    std::size_t dropped = 0;
    for (std::size_t t = 0; t < actual.size(); ++t) {
        const double ea = actual[t] - forecast_a[t];
        const double eb = actual[t] - forecast_b[t];
        switch (loss) {
            case DmLoss::AbsolutePercentage:
                if (actual[t] == 0.0) {
                    ++dropped;
                    continue;
                }
                d.push_back((std::abs(ea) - std::abs(eb)) / std::abs(actual[t]));
                break;
            case DmLoss::Absolute: d.push_back(std::abs(ea) - std::abs(eb)); break;
            case DmLoss::Squared: d.push_back(ea * ea - eb * eb); break;
        }
    }
    if (skipped) *skipped = dropped;
    return d;
}

TestResult dm_test(std::span<const double> d, std::size_t horizon) {
    if (d.size() < 2) throw ContractError("dm_test: need at least two loss differentials");
    if (horizon < 1) throw ContractError("dm_test: horizon must be positive");
    const double n = static_cast<double>(d.size());
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
    auto autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t t = lag; t < d.size(); ++t) s += (d[t] - mean) * (d[t - lag] - mean);
        return s / n;
    };
    const double gamma0 = all_equal(d) ? 0.0 : autocov(0);
    double long_run = gamma0;
    for (std::size_t lag = 1; gamma0 > 0.0 && lag < horizon && lag < d.size(); ++lag) long_run += 2.0 * autocov(lag);
    // The truncated window can go negative; fall back to the lag-0 variance.
    if (!(long_run > 0.0)) long_run = gamma0;

    TestResult r;
    if (!(long_run > 0.0)) {
        r.degenerate = true;
        if (mean == 0.0) {
            r.statistic = 0.0;
            r.p_value = 1.0;
        } else {
            r.statistic = mean < 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        return r;
    }
    r.statistic = mean / std::sqrt(long_run / n);
    r.p_value = normal_two_sided(r.statistic);
    return r;
}

TestResult dm_test(std::span<const double> actual, std::span<const double> forecast_a,
                   std::span<const double> forecast_b, DmLoss loss, std::size_t horizon) {
    std::size_t skipped = 0;
    const auto d = loss_differentials(actual, forecast_a, forecast_b, loss, &skipped);
    TestResult r = dm_test(d, horizon);
    r.skipped = skipped;
    return r;
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) throw ContractError("mean_std: empty input");
    // Sum-then-divide of identical values is not always exact.
    if (all_equal(values)) {
        return {values.front(), 0.0};
    }
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / n)};
}

}  // namespace meslstm
