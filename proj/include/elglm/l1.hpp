#pragma once

#include <Eigen/Dense>

namespace elglm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct CoordinateDescentOptions {
    int max_sweeps = 10000;
    double tolerance = 1e-8; // KKT residual, infinity norm
};

struct CoordinateDescentResult {
    VectorXd solution;
    int sweeps = 0;
    double kkt_residual = 0.0;
};

/**
 * Cyclic coordinate descent for
 *   minimize 1/2 x^T A x - b^T x + lambda * sum_j w_j |x_j|
 * with A symmetric PSD and weights w >= 0 (w_j = 0 leaves x_j unpenalized).
 * Sweeps alternate between the active set and full passes; the gradient
 * b - A x is updated incrementally, so a sweep costs O(p^2).
 * Throws NumericalError with the residual if max_sweeps is exhausted.
 */
[[nodiscard]] CoordinateDescentResult solve_quadratic_l1(const MatrixXd& a, const VectorXd& b, double lambda,
                                                         const VectorXd& weights, const VectorXd& warm_start,
                                                         const CoordinateDescentOptions& options = {});

/// Infinity-norm violation of the subgradient conditions at x for gradient
/// g = b - A x (or the gradient of any smooth part being maximized).
[[nodiscard]] double l1_kkt_residual(const VectorXd& gradient, const VectorXd& x, double lambda,
                                     const VectorXd& weights);

/// Scalar soft threshold; |z| <= t maps to exactly zero.
[[nodiscard]] inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

} // namespace elglm
