#include "elglm/l1.hpp"

#include "elglm/error.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace elglm {

double l1_kkt_residual(const VectorXd& gradient, const VectorXd& x, double lambda, const VectorXd& weights) {
    double worst = 0.0;
    for (Index j = 0; j < x.size(); ++j) {
        const double t = lambda * weights[j];
        double r;
        if (x[j] > 0.0) {
            r = std::abs(gradient[j] - t);
        } else if (x[j] < 0.0) {
            r = std::abs(gradient[j] + t);
        } else {
            r = std::max(0.0, std::abs(gradient[j]) - t);
        }
        worst = std::max(worst, r);
    }
    return worst;
}

CoordinateDescentResult solve_quadratic_l1(const MatrixXd& a, const VectorXd& b, double lambda,
                                           const VectorXd& weights, const VectorXd& warm_start,
                                           const CoordinateDescentOptions& options) {
    const Index p = b.size();
    if (a.rows() != p || a.cols() != p) throw DimensionError("coordinate descent: A must be p x p");
    if (weights.size() != p) throw DimensionError("coordinate descent: weight vector length mismatch");
    if (!(lambda >= 0.0)) throw DomainError("coordinate descent: lambda must be nonnegative");
    if ((weights.array() < 0.0).any()) throw DomainError("coordinate descent: penalty weights must be nonnegative");

    VectorXd x = warm_start.size() == p ? warm_start : VectorXd::Zero(p);
    VectorXd grad = b - a * x;

    auto update = [&](Index j) {
        const double ajj = a(j, j);
        const double t = lambda * weights[j];
        double next;
        if (ajj <= 0.0) {
            if (std::abs(grad[j]) > t) throw NumericalError("coordinate descent: objective unbounded along coordinate " +
                                                            std::to_string(j));
            next = 0.0; // flat direction, the penalty pins it
            if (t == 0.0) next = x[j];
        } else {
            next = soft_threshold(grad[j] + ajj * x[j], t) / ajj;
        }
        const double delta = next - x[j];
        if (delta != 0.0) {
            grad.noalias() -= delta * a.col(j);
            x[j] = next;
        }
    };

    CoordinateDescentResult out;
    std::vector<Index> active;
    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        for (Index j = 0; j < p; ++j) update(j);
        out.sweeps = sweep;
        // recompute the gradient now and then so incremental updates do not drift
        if (sweep % 50 == 0) grad = b - a * x;
        double residual = l1_kkt_residual(grad, x, lambda, weights);
        if (residual <= options.tolerance) {
            grad = b - a * x;
            residual = l1_kkt_residual(grad, x, lambda, weights);
            if (residual <= options.tolerance) {
                out.solution = std::move(x);
                out.kkt_residual = residual;
                return out;
            }
        }
        // iterate on the current support until it settles
        active.clear();
        for (Index j = 0; j < p; ++j) {
            if (x[j] != 0.0) active.push_back(j);
        }
        for (int inner = 0; inner < 1000 && !active.empty(); ++inner) {
            double biggest = 0.0;
            for (Index j : active) {
                const double before = x[j];
                update(j);
                biggest = std::max(biggest, std::abs(x[j] - before) * std::sqrt(std::max(a(j, j), 0.0)));
            }
            if (biggest <= 0.1 * options.tolerance) break;
        }
    }
    grad = b - a * x;
    throw NumericalError("coordinate descent did not converge in " + std::to_string(options.max_sweeps) +
                         " sweeps (KKT residual " + std::to_string(l1_kkt_residual(grad, x, lambda, weights)) + ")");
}

} // namespace elglm
