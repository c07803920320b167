#pragma once

#include "elglm/estimators.hpp"
#include "elglm/expected_loglik.hpp"
#include "elglm/glm.hpp"
#include "elglm/structured_matrix.hpp"

#include <limits>
#include <string>
#include <vector>

namespace elglm {

enum class EvidenceMode { Exact, El };

/**
 * Log marginal likelihood up to an additive constant that does not depend on
 * the prior. The dropped constant is spelled out in `dropped_constant`.
 */
struct EvidenceResult {
    double log_evidence = 0.0;
    std::string method;
    double q = 0.0;              // ||X^T r||^2
    double response_total = 0.0; // N_s
    double beta = std::numeric_limits<double>::quiet_NaN(); // when R = beta I
    std::string dropped_constant;
};

/**
 * Gaussian-family evidence with prior N(0, R^{-1}):
 *   1/2 log det R - 1/2 log det A + 1/2 b^T A^{-1} b,  b = X^T r / s2,
 * with A = X^T X / s2 + R (exact) or N C / s2 + R (El, needs covariance).
 */
[[nodiscard]] EvidenceResult gaussian_evidence(const GlmDataset& data, double noise_variance,
                                               const StructuredMatrix& ridge, EvidenceMode mode,
                                               const StructuredMatrix* covariance = nullptr);

/**
 * Laplace approximation at the supplied mode:
 *   L(theta) - 1/2 theta^T R theta + 1/2 log det R - 1/2 log det(-H).
 * The offset carries a flat prior and is integrated jointly, so H is the
 * (p+1)-dimensional Hessian; set integrate_offset = false to condition on it.
 * El mode evaluates L and H from the expected log-likelihood with structured
 * determinants.
 */
[[nodiscard]] EvidenceResult laplace_evidence(const CanonicalFamily& family, const GlmDataset& data,
                                              const StructuredMatrix& ridge, const GlmParams& mode_params,
                                              EvidenceMode mode, const ExpectationEngine* engine = nullptr,
                                              bool integrate_offset = true);

/// log F(beta) of the EL evidence for C = c I, R = beta I, up to constants:
///   q / (2 (c N_s + beta)) + p/2 log beta - p/2 log(c N_s + beta).
/// beta = +inf gives the limit 0.
[[nodiscard]] double el_log_evidence_scalar(double beta, double q, double response_total, Index p, double c = 1.0);

/**
 * Maximizer of el_log_evidence_scalar:
 *   beta = p (c N_s)^2 / (q - p c N_s) when q > p c N_s, otherwise +inf.
 */
[[nodiscard]] double rhat_analytic(double q, double response_total, Index p, double c = 1.0);

/// Shared-basis version: per direction j, (d_j N_s)^2 / (q_j^2 - d_j N_s), or
/// +inf when q_j^2 <= d_j N_s. q_j is X^T r projected on basis vector j, d_j
/// the covariance eigenvalue.
[[nodiscard]] VectorXd rhat_shared_basis(const VectorXd& projections, const VectorXd& covariance_eigenvalues,
                                         double response_total);

/// True when a ridge weight means "infinite penalization".
[[nodiscard]] inline bool is_infinite_ridge(double beta) { return beta == std::numeric_limits<double>::infinity(); }

struct FixedPointStep {
    double beta = 0.0;
    FitResult map_fit;
};

struct FixedPointResult {
    std::vector<FixedPointStep> steps; // steps[0] is the starting value
    bool converged = false;
};

/**
 * beta_{i+1} = (p - beta_i tr[(-H)^{-1}]_{theta}) / ||theta_MAP||^2 with a MAP
 * refit (warm started) at every beta. Stops when the relative change is
 * <= tolerance. A zero MAP filter raises DomainError (infinite ridge regime).
 */
[[nodiscard]] FixedPointResult rhat_fixed_point(const CanonicalFamily& family, const GlmDataset& data, double beta0,
                                                int max_iterations, double tolerance = 1e-4,
                                                const GlmParams* warm_start = nullptr);

struct RidgeSearchResult {
    double beta = 0.0;
    double log_evidence = 0.0;
    int evaluations = 0;
    GlmParams map_params;
};

/// Golden-section search of the exact-likelihood Laplace evidence over
/// log beta in [log_lo, log_hi], MAP refits warm started.
[[nodiscard]] RidgeSearchResult maximize_laplace_evidence(const CanonicalFamily& family, const GlmDataset& data,
                                                          double log_lo, double log_hi, double tolerance = 1e-3);

/// MAP fit at R = beta I; beta = +inf returns theta = 0 with the rate-matching offset.
[[nodiscard]] FitResult ridge_map_fit(const CanonicalFamily& family, const GlmDataset& data, double beta,
                                      const GlmParams* warm_start = nullptr);

} // namespace elglm
