#include "elglm/quadrature.hpp"

#include "elglm/error.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

namespace elglm {

namespace {

// Golub-Welsch: nodes are eigenvalues of the symmetric Jacobi matrix, weights are
// mu0 times the squared first eigenvector components.
QuadratureRule golub_welsch(const VectorXd& off_diagonal, Eigen::Index order, double mu0) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (Eigen::Index k = 0; k + 1 < order; ++k) {
        jacobi(k, k + 1) = off_diagonal[k];
        jacobi(k + 1, k) = off_diagonal[k];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    QuadratureRule rule;
    rule.nodes = es.eigenvalues();
    rule.weights = mu0 * es.eigenvectors().row(0).transpose().array().square();
    return rule;
}

} // namespace

QuadratureRule gauss_hermite(int order) {
    if (order < 1) throw DomainError("Gauss-Hermite order must be >= 1");
    VectorXd off(std::max(order - 1, 0));
    for (int k = 1; k < order; ++k) off[k - 1] = std::sqrt(static_cast<double>(k));
    QuadratureRule rule = golub_welsch(off, order, 1.0);
    rule.weights /= rule.weights.sum();
    return rule;
}

QuadratureRule gauss_legendre(int order, double a, double b) {
    if (order < 1) throw DomainError("Gauss-Legendre order must be >= 1");
    VectorXd off(std::max(order - 1, 0));
    for (int k = 1; k < order; ++k) {
        const double kk = static_cast<double>(k);
        off[k - 1] = kk / std::sqrt(4.0 * kk * kk - 1.0);
    }
    QuadratureRule rule = golub_welsch(off, order, 2.0);
    const double half = 0.5 * (b - a);
    rule.nodes = (rule.nodes.array() * half + 0.5 * (a + b)).matrix();
    rule.weights *= half;
    return rule;
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tolerance) {
    double error = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, tolerance, &error);
    if (!std::isfinite(value)) throw NumericalError("adaptive quadrature produced a non-finite value");
    return value;
}

} // namespace elglm
