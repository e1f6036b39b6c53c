#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace meslstm {

/// Symmetric MAPE on the [0, 2] fraction scale. Steps where both values are
/// zero contribute 0.
double smape(std::span<const double> actual, std::span<const double> forecast);

double rmse(std::span<const double> actual, std::span<const double> forecast);
double mae(std::span<const double> actual, std::span<const double> forecast);

/// Mean interval score: mean over t of width + (2/alpha) * distance outside
/// the bounds. Throws ContractError when any lower > upper.
double mis(std::span<const double> actual, std::span<const double> lower, std::span<const double> upper,
           double alpha);

/// Fraction of steps with lower <= actual <= upper.
double coverage(std::span<const double> actual, std::span<const double> lower, std::span<const double> upper);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    /// Zero-variance input; statistic/p follow the documented convention.
    bool degenerate = false;
    double degrees_of_freedom = std::numeric_limits<double>::quiet_NaN();
    /// Observations excluded from the loss (e.g. zero actuals under MAPE).
    std::size_t skipped = 0;
};

/**
 * Welch two-sample t-test, one-sided, H1: mean(a) < mean(b). Degrees of
 * freedom by Welch-Satterthwaite. When both variances vanish: equal means
 * give statistic 0, p 0.5; otherwise the statistic is +-inf and p is 0 or 1.
 */
TestResult t_test_one_sided(std::span<const double> a, std::span<const double> b);

enum class DmLoss { AbsolutePercentage, Absolute, Squared };

/// Loss differentials L(a) - L(b) per step. Under AbsolutePercentage, steps
/// with a zero actual are dropped and counted in `skipped`.
std::vector<double> loss_differentials(std::span<const double> actual, std::span<const double> forecast_a,
                                       std::span<const double> forecast_b, DmLoss loss,
                                       std::size_t* skipped = nullptr);

/**
 * Diebold-Mariano test on a loss-differential series. The long-run variance
 * uses the rectangular lag window with lags 0..horizon-1 (gamma_0 alone for
 * one-step forecasts), falling back to gamma_0 when that sum is not
 * positive. Two-sided p from the normal approximation. All-zero
 * differentials give the degenerate "no difference" result (0, 1); a
 * constant non-zero series gives +-inf with p = 0.
 */
TestResult dm_test(std::span<const double> differentials, std::size_t horizon = 1);

/// Convenience wrapper: differentials under `loss`, then dm_test.
TestResult dm_test(std::span<const double> actual, std::span<const double> forecast_a,
                   std::span<const double> forecast_b, DmLoss loss = DmLoss::AbsolutePercentage,
                   std::size_t horizon = 1);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  ///< population (ddof = 0)
};

MeanStd mean_std(std::span<const double> values);

}  // namespace meslstm
