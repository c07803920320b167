#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace testutil {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> z(0.0, sd);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = z(rng);
    return m;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double sd = 1.0) {
    return random_matrix(n, 1, rng, sd).col(0);
}

// well conditioned SPD
inline Eigen::MatrixXd random_spd(Eigen::Index p, std::mt19937_64& rng) {
    const Eigen::MatrixXd a = random_matrix(p, p, rng);
    return a * a.transpose() / static_cast<double>(p) + Eigen::MatrixXd::Identity(p, p) * 0.5;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

} // namespace testutil
