#pragma once

#include <Eigen/Dense>

#include <functional>

namespace elglm {

using Eigen::VectorXd;

struct QuadratureRule {
    VectorXd nodes;
    VectorXd weights;

    template <class F>
    [[nodiscard]] double apply(F&& f) const {
        double s = 0.0;
        for (Eigen::Index k = 0; k < nodes.size(); ++k) s += weights[k] * f(nodes[k]);
        return s;
    }
};

/// Gauss-Hermite rule for the standard normal weight: sum_k w_k f(z_k) ~ E[f(Z)],
/// Z ~ N(0, 1), weights summing to one. Golub-Welsch on the probabilists' Jacobi matrix.
[[nodiscard]] QuadratureRule gauss_hermite(int order);

/// Gauss-Legendre rule on [a, b].
[[nodiscard]] QuadratureRule gauss_legendre(int order, double a = -1.0, double b = 1.0);

/// Adaptive Gauss-Kronrod on [a, b] (infinite bounds allowed). Throws
/// NumericalError when the estimate is not finite.
[[nodiscard]] double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                        double tolerance = 1e-12);

} // namespace elglm
