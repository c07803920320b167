#pragma once

#include <Eigen/Dense>

namespace elglm {

using Eigen::VectorXd;

struct InterpolatedValue {
    double value;
    double first;
    double second;
};

/// Piecewise cubic Hermite interpolant with Fritsch-Carlson (PCHIP) slopes:
/// C1, shape preserving on monotone data. Queries outside [x_0, x_last]
/// raise DomainError.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(VectorXd knots, VectorXd values);

    [[nodiscard]] InterpolatedValue eval(double x) const;
    [[nodiscard]] const VectorXd& knots() const { return knots_; }
    [[nodiscard]] const VectorXd& values() const { return values_; }
    [[nodiscard]] double lower() const { return knots_[0]; }
    [[nodiscard]] double upper() const { return knots_[knots_.size() - 1]; }

private:
    VectorXd knots_;
    VectorXd values_;
    VectorXd slopes_;
};

} // namespace elglm
