#pragma once

#include "meslstm/timeseries.hpp"
#include "meslstm/variational.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace meslstm {

/// Multiple linear regression of each predictand on the predictor columns
/// plus an intercept.
struct OlsModel {
    std::vector<std::size_t> predictor_indices;
    std::vector<std::size_t> predictand_indices;
    /// (p + 1) x j, intercept in row 0.
    Eigen::MatrixXd coefficients;
    /// Residual standard deviation per predictand, sqrt(SSR / (n - rank)).
    Eigen::VectorXd residual_std;
    std::size_t observations = 0;
    /// The design was rank deficient and a 1e-8 ridge was used.
    bool rank_deficient = false;
    bool fitted = false;
};

/// Fit on raw matrices: X is n x p, Y is n x j. Requires n > p + 1.
OlsModel ols_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

/// Predictors are every non-predictand column of the frame.
OlsModel ols_fit(const SeriesFrame& train);

/// `predictors` is p x m (one column per forecast step); result is j x m.
Eigen::MatrixXd ols_predict(const OlsModel& model, const Eigen::MatrixXd& predictors);

/// Gaussian residual interval: prediction +- z_{1 - alpha/2} * residual std.
Interval ols_intervals(const OlsModel& model, const Eigen::MatrixXd& predictors, double alpha);

/// Upper standard normal quantile z_{1 - alpha/2}.
double normal_critical_value(double alpha);

/// Step h repeats the last observation at the same phase:
/// y[T + h - P * ceil(h / P)]. `tail` is j x L with L >= P.
Eigen::MatrixXd seasonal_naive(const Eigen::MatrixXd& tail, std::size_t period, std::size_t horizon);

}  // namespace meslstm
