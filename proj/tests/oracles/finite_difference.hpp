#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>

namespace oracle {

struct GradCheck {
    double worst_relative = 0.0;
    long compared = 0;
};

/// Relative error with an absolute floor so entries whose analytic and
/// numeric values both vanish do not blow up the ratio.
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

/// Central differences of `loss` w.r.t. every entry of `param`, compared
/// against `analytic`. `param` is perturbed in place and restored.
inline GradCheck check_gradient(Eigen::MatrixXd& param, const Eigen::MatrixXd& analytic,
                                const std::function<double()>& loss, double step = 1e-5) {
    GradCheck out;
    for (Eigen::Index i = 0; i < param.size(); ++i) {
        const double keep = param.data()[i];
        param.data()[i] = keep + step;
        const double up = loss();
        param.data()[i] = keep - step;
        const double down = loss();
        param.data()[i] = keep;
        const double numeric = (up - down) / (2.0 * step);
        out.worst_relative = std::max(out.worst_relative, relative_error(analytic.data()[i], numeric));
        ++out.compared;
    }
    return out;
}

}  // namespace oracle
