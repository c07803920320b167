#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace elglm {

using Eigen::Index;
using Eigen::VectorXd;

/**
 * Linear-Gaussian toy model used for risk comparisons: x ~ N(0, I_p),
 * r ~ N(x^T theta, 1), N samples. Ridge estimators penalize with c * p * I.
 *
 *   Mele:  X^T r / N
 *   Mle:   (X^T X)^{-1} X^T r
 *   Mpele: X^T r / (N + c p)
 *   Map:   (X^T X + c p I)^{-1} X^T r
 */
enum class EstimatorKind { Mele, Mle, Mpele, Map };

[[nodiscard]] std::string_view estimator_name(EstimatorKind kind);
[[nodiscard]] EstimatorKind estimator_from_name(std::string_view name);

struct RiskSpec {
    Index samples = 0;     // N
    Index dim = 0;         // p
    double snr = 0.0;      // theta^T theta
    double ridge_c = 0.0;  // c
    EstimatorKind kind = EstimatorKind::Mele;

    [[nodiscard]] double ratio() const { return static_cast<double>(dim) / static_cast<double>(samples); }
    void validate() const;
};

/// Exact finite-sample MSE. Map has no closed form (DomainError); Mle needs N > p + 1.
[[nodiscard]] double mse_closed_form(const RiskSpec& spec);

/// Limit as N, p -> inf with p / N = ratio. Map integrates against the
/// Marchenko-Pastur law, including the atom at zero when ratio > 1.
[[nodiscard]] double mse_asymptotic(EstimatorKind kind, double ratio, double snr, double ridge_c = 0.0);

/// Continuous part of the Marchenko-Pastur law of eigenvalues of X^T X / N.
class MarchenkoPastur {
public:
    explicit MarchenkoPastur(double ratio);

    [[nodiscard]] double ratio() const { return ratio_; }
    [[nodiscard]] double lower() const { return lower_; }
    [[nodiscard]] double upper() const { return upper_; }
    /// Mass of the atom at zero, max(0, 1 - 1 / ratio).
    [[nodiscard]] double zero_mass() const { return ratio_ > 1.0 ? 1.0 - 1.0 / ratio_ : 0.0; }

    /// Density of the continuous part; zero outside [lower, upper].
    [[nodiscard]] double density(double l) const;

    /// Integral of g against the continuous part only. The square-root edges
    /// are removed by l = lower + (upper - lower) sin^2(t).
    [[nodiscard]] double integrate_continuous(const std::function<double(double)>& g) const;

    /// E[g(l)] over the full law (continuous part plus atom at zero).
    [[nodiscard]] double expectation(const std::function<double(double)>& g) const;

private:
    double ratio_;
    double lower_;
    double upper_;
};

struct McEstimate {
    double mse = 0.0;
    double stderr_ = 0.0;
};

/**
 * Monte Carlo E||theta_hat - theta||^2 with fresh X and r per trial. Trial t
 * uses its own seed derived from (seed, t), so results do not depend on
 * evaluation order. Every requested estimator sees the same X and r.
 */
[[nodiscard]] std::vector<McEstimate> mc_mse_many(const std::vector<EstimatorKind>& kinds, Index samples,
                                                  const VectorXd& theta, int trials, std::uint64_t seed,
                                                  double ridge_c = 0.0);

[[nodiscard]] McEstimate mc_mse(EstimatorKind kind, Index samples, const VectorXd& theta, int trials,
                                std::uint64_t seed, double ridge_c = 0.0);

/// Ratio above which the Mele beats the Mle asymptotically: snr / (1 + snr).
[[nodiscard]] double crossover_rho(double snr);

struct OptimalRidge {
    double ridge_c = 0.0;
    double mse = 0.0;
};

/// Golden-section search of the asymptotic MSE over log c in [log_lo, log_hi].
[[nodiscard]] OptimalRidge optimal_ridge(EstimatorKind kind, double ratio, double snr, double log_lo = -6.0,
                                         double log_hi = 6.0, double tolerance = 1e-6);

/// Deterministic 64-bit stream splitter (splitmix64 finalizer).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

} // namespace elglm
