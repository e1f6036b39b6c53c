#include "meslstm/baselines.hpp"

#include "meslstm/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>

namespace meslstm {

OlsModel ols_fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (Y.rows() != n) throw ContractError("ols_fit: design and response row counts differ");
    if (n <= p + 1) throw InsufficientDataError("ols_fit: need more rows than coefficients");
    if (!X.allFinite() || !Y.allFinite()) throw NumericError("ols_fit: non-finite input");

    // Centre and scale predictors so the solve sees comparable column norms;
    // zero-variance columns are left at zero and absorbed by the intercept.
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const Eigen::RowVectorXd y_mean = Y.colwise().mean();
    Eigen::MatrixXd Z = X.rowwise() - x_mean;
    Eigen::RowVectorXd scale = (Z.colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
    for (Eigen::Index c = 0; c < p; ++c) {
        if (scale(c) > 0.0) Z.col(c) /= scale(c);
    }
    const Eigen::MatrixXd Yc = Y.rowwise() - y_mean;

    OlsModel model;
    Eigen::MatrixXd beta_z(p, Y.cols());
    Eigen::Index rank = 1;
    if (p > 0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Z);
        rank += qr.rank();
        if (qr.rank() == p) {
            beta_z = qr.solve(Yc);
        } else {
            model.rank_deficient = true;
            Eigen::MatrixXd gram = Z.transpose() * Z;
            gram.diagonal().array() += 1e-8;
            beta_z = gram.ldlt().solve(Z.transpose() * Yc);
        }
    }

    model.coefficients.resize(p + 1, Y.cols());
    for (Eigen::Index c = 0; c < p; ++c) {
        model.coefficients.row(c + 1) = scale(c) > 0.0 ? Eigen::RowVectorXd(beta_z.row(c) / scale(c))
                                                       : Eigen::RowVectorXd::Zero(Y.cols());
    }
    model.coefficients.row(0) = y_mean - x_mean * model.coefficients.bottomRows(p);

    const Eigen::MatrixXd fitted =
        (X * model.coefficients.bottomRows(p)).rowwise() + model.coefficients.row(0);
    const Eigen::MatrixXd resid = Y - fitted;
    model.residual_std = (resid.colwise().squaredNorm().transpose() / static_cast<double>(n - rank)).cwiseSqrt();
    model.observations = static_cast<std::size_t>(n);
    model.fitted = true;
    return model;
}

OlsModel ols_fit(const SeriesFrame& train) {
    const auto& preds = train.predictand_indices();
    std::vector<std::size_t> predictors;
    for (std::size_t c = 0; c < train.covariates(); ++c) {
        if (std::find(preds.begin(), preds.end(), c) == preds.end()) predictors.push_back(c);
    }
    const auto n = static_cast<Eigen::Index>(train.length());
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(predictors.size()));
    for (std::size_t i = 0; i < predictors.size(); ++i) {
        X.col(static_cast<Eigen::Index>(i)) = train.values().row(static_cast<Eigen::Index>(predictors[i])).transpose();
    }
    const Eigen::MatrixXd Y = train.predictand_values().transpose();
    OlsModel model = ols_fit(X, Y);
    model.predictor_indices = std::move(predictors);
    model.predictand_indices = preds;
    return model;
}

Eigen::MatrixXd ols_predict(const OlsModel& model, const Eigen::MatrixXd& predictors) {
    if (!model.fitted) throw ContractError("ols_predict: model not fitted");
    if (predictors.rows() != model.coefficients.rows() - 1) throw ContractError("ols_predict: predictor count mismatch");
    const Eigen::Index p = predictors.rows();
    Eigen::MatrixXd out = model.coefficients.bottomRows(p).transpose() * predictors;
    out.colwise() += model.coefficients.row(0).transpose();
    return out;
}

double normal_critical_value(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("significance level must lie in (0,1)");
    const boost::math::normal_distribution<double> n;
    return boost::math::quantile(n, 1.0 - alpha / 2.0);
}

Interval ols_intervals(const OlsModel& model, const Eigen::MatrixXd& predictors, double alpha) {
    const double z = normal_critical_value(alpha);
    const Eigen::MatrixXd point = ols_predict(model, predictors);
    const Eigen::VectorXd half = z * model.residual_std;
    return {alpha, point.colwise() - half, point.colwise() + half};
}

Eigen::MatrixXd seasonal_naive(const Eigen::MatrixXd& tail, std::size_t period, std::size_t horizon) {
    if (period < 1) throw ContractError("seasonal_naive: period must be positive");
    const auto len = static_cast<std::size_t>(tail.cols());
    if (len < period) throw InsufficientDataError("seasonal_naive: tail shorter than one period");
    Eigen::MatrixXd out(tail.rows(), static_cast<Eigen::Index>(horizon));
    for (std::size_t h = 1; h <= horizon; ++h) {
        const std::size_t back = period * ((h + period - 1) / period);  // P * ceil(h / P)
        const std::size_t idx = len - 1 + h - back;
        out.col(static_cast<Eigen::Index>(h - 1)) = tail.col(static_cast<Eigen::Index>(idx));
    }
    return out;
}

}  // namespace meslstm
