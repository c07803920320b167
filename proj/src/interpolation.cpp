#include "elglm/interpolation.hpp"

#include "elglm/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace elglm {

namespace {

double endpoint_slope(double h0, double h1, double d0, double d1) {
    // three-point end formula, kept shape preserving
    double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (m * d0 <= 0.0) return 0.0;
    if (d0 * d1 <= 0.0 && std::abs(m) > std::abs(3.0 * d0)) return 3.0 * d0;
    return m;
}

} // namespace

MonotoneCubic::MonotoneCubic(VectorXd knots, VectorXd values) : knots_(std::move(knots)), values_(std::move(values)) {
    const Eigen::Index n = knots_.size();
    if (n < 2 || values_.size() != n) throw DimensionError("monotone cubic needs >= 2 knots and matching values");
    for (Eigen::Index i = 1; i < n; ++i) {
        if (!(knots_[i] > knots_[i - 1])) {
            throw DomainError("interpolation knots must be strictly increasing (index " + std::to_string(i) + ")");
        }
    }
    if (!values_.allFinite()) throw DomainError("interpolation values must be finite");

    VectorXd h(n - 1);
    VectorXd delta(n - 1);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        h[i] = knots_[i + 1] - knots_[i];
        delta[i] = (values_[i + 1] - values_[i]) / h[i];
    }
    slopes_ = VectorXd::Zero(n);
    if (n == 2) {
        slopes_.setConstant(delta[0]);
        return;
    }
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) {
            slopes_[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            slopes_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    slopes_[0] = endpoint_slope(h[0], h[1], delta[0], delta[1]);
    slopes_[n - 1] = endpoint_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

InterpolatedValue MonotoneCubic::eval(double x) const {
    const Eigen::Index n = knots_.size();
    if (n < 2) throw DomainError("interpolant is empty");
    if (!(x >= knots_[0] && x <= knots_[n - 1])) {
        throw DomainError("query " + std::to_string(x) + " outside interpolation range [" +
                          std::to_string(knots_[0]) + ", " + std::to_string(knots_[n - 1]) + "]");
    }
    const auto* begin = knots_.data();
    const auto* it = std::upper_bound(begin, begin + n, x);
    Eigen::Index i = std::clamp<Eigen::Index>((it - begin) - 1, 0, n - 2);
    const double h = knots_[i + 1] - knots_[i];
    const double t = (x - knots_[i]) / h;
    const double y0 = values_[i];
    const double y1 = values_[i + 1];
    const double m0 = slopes_[i] * h;
    const double m1 = slopes_[i + 1] * h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double value = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
    const double d1 = (6 * t2 - 6 * t) * y0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * y1 + (3 * t2 - 2 * t) * m1;
    const double d2 = (12 * t - 6) * y0 + (6 * t - 4) * m0 + (-12 * t + 6) * y1 + (6 * t - 2) * m1;
    return {value, d1 / h, d2 / (h * h)};
}

} // namespace elglm
