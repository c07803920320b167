#pragma once

#include "elglm/expected_loglik.hpp"
#include "elglm/glm.hpp"
#include "elglm/l1.hpp"
#include "elglm/structured_matrix.hpp"

#include <memory>
#include <string>
#include <vector>

namespace elglm {

/// Log-prior -1/2 theta^T R theta - lambda * sum_j w_j |theta_j|. The offset
/// is never penalized.
struct Penalty {
    enum class Kind { None, Ridge, L1, RidgePlusL1 };

    Kind kind = Kind::None;
    std::shared_ptr<const StructuredMatrix> ridge;
    std::vector<double> lambdas; // one value, or a strictly decreasing path
    VectorXd l1_weights;         // empty means all ones

    static Penalty none() { return {}; }
    static Penalty ridge_only(StructuredMatrix r);
    static Penalty l1(double lambda, VectorXd weights = VectorXd());
    static Penalty l1_path(std::vector<double> lambdas, VectorXd weights = VectorXd());
    static Penalty ridge_plus_l1(StructuredMatrix r, double lambda, VectorXd weights = VectorXd());

    [[nodiscard]] bool has_ridge() const { return kind == Kind::Ridge || kind == Kind::RidgePlusL1; }
    [[nodiscard]] bool has_l1() const { return kind == Kind::L1 || kind == Kind::RidgePlusL1; }
    [[nodiscard]] const StructuredMatrix* ridge_ptr() const { return has_ridge() ? ridge.get() : nullptr; }
    [[nodiscard]] double lambda() const { return lambdas.empty() ? 0.0 : lambdas.front(); }
    [[nodiscard]] VectorXd weights(Index p) const;

    /// Throws on size mismatch, negative or non-decreasing lambdas.
    void validate(Index p) const;
    /// -log prior up to a constant: 1/2 theta^T R theta + lambda * sum w |theta|.
    [[nodiscard]] double cost(const VectorXd& theta) const;
};

/// 100 log-spaced values from ||X^T r||_inf down to ratio * that.
[[nodiscard]] std::vector<double> default_lambda_path(const VectorXd& xtr, int count = 100, double ratio = 1e-4);

struct FitResult {
    GlmParams params;
    std::vector<double> objective_trace;
    int iterations = 0;
    double wall_seconds = 0.0;
    bool converged = false;
    std::string solver;
    double lambda = 0.0;
    double kkt_residual = 0.0;
};

/**
 * Gaussian-family MELE with optional ridge: solves (N C + R) theta = X^T r
 * through the structured solver. The offset is the response mean.
 */
[[nodiscard]] FitResult mele_gaussian(const SufficientStats& stats, const StructuredMatrix& covariance,
                                      const StructuredMatrix* ridge = nullptr);

/**
 * Poisson MPELE: solves (C N_s + R) theta = X^T r and sets the profiled offset
 * log(N_s / (N dt)) - theta^T C theta / 2. DomainError when N_s = 0.
 */
[[nodiscard]] FitResult mpele_lnp(const SufficientStats& stats, const StructuredMatrix& covariance,
                                  const StructuredMatrix* ridge = nullptr, double bin_width = 1.0);

/// Which count multiplies C in the quadratic EL term.
enum class QuadraticScale {
    Samples, // N C (Gaussian EL)
    Events   // N_s C (Poisson EL with profiled offset)
};

/**
 * Whole L1 path for diagonal C by soft thresholding:
 *   theta_j = sign(s_j) max(|s_j| - lambda, 0) / (n C_jj), s = X^T r,
 * with n = N or N_s. Ties |s_j| = lambda give zero.
 */
[[nodiscard]] std::vector<FitResult> mpele_l1_path_diagonal(const SufficientStats& stats,
                                                            const StructuredMatrix& covariance,
                                                            const std::vector<double>& lambdas,
                                                            QuadraticScale scale = QuadraticScale::Samples,
                                                            double bin_width = 1.0);

/// Quadratic-plus-L1 EL problem for general C by cyclic coordinate descent.
[[nodiscard]] FitResult mpele_l1_general(const SufficientStats& stats, const StructuredMatrix& covariance,
                                         double lambda, QuadraticScale scale = QuadraticScale::Samples,
                                         const VectorXd& warm_start = VectorXd(),
                                         const CoordinateDescentOptions& options = {}, double bin_width = 1.0);

/// Path version with warm starts.
[[nodiscard]] std::vector<FitResult> mpele_l1_general_path(const SufficientStats& stats,
                                                           const StructuredMatrix& covariance,
                                                           const std::vector<double>& lambdas,
                                                           QuadraticScale scale = QuadraticScale::Samples,
                                                           const CoordinateDescentOptions& options = {},
                                                           double bin_width = 1.0);

enum class FitMethod { Newton, ConjugateGradient };

struct FitOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-8; // relative to max(1, |objective|)
    bool fit_offset = true;
    double kkt_tolerance = 1e-7;      // L1 mode, absolute
    CoordinateDescentOptions inner = {10000, 1e-10};
};

/**
 * Exact penalized maximum likelihood. Newton or nonlinear CG with backtracking
 * (Armijo 1e-4, shrink 0.5) for smooth penalties; proximal Newton with a
 * coordinate-descent inner solve when the penalty has an L1 part.
 * Stops when ||gradient||_inf <= tol * max(1, |objective|).
 */
[[nodiscard]] FitResult fit_exact(const CanonicalFamily& family, const GlmDataset& data, const Penalty& penalty,
                                  const GlmParams& init, FitMethod method = FitMethod::Newton,
                                  const FitOptions& options = {});

/// L1 path on the exact likelihood, warm-started from init along lambdas.
[[nodiscard]] std::vector<FitResult> fit_exact_l1_path(const CanonicalFamily& family, const GlmDataset& data,
                                                       const Penalty& penalty, const GlmParams& init,
                                                       const FitOptions& options = {});

/// Newton maximization of the penalized EL for any engine (smooth penalties).
[[nodiscard]] FitResult fit_el(const ExpectationEngine& engine, const SufficientStats& stats, const Penalty& penalty,
                               const GlmParams& init, const FitOptions& options = {});

/**
 * Applies the inverse of the negative penalized EL Hessian, evaluated once at
 * a reference point. With zero-mean stimuli the solve reduces to the
 * structured system (2 a f_v C + R + k u u^T) after eliminating the offset,
 * handled by Sherman-Morrison; otherwise the (p+1) system is factored densely.
 */
class ElPreconditioner {
public:
    ElPreconditioner(const ExpectationEngine& engine, const SufficientStats& stats, const Penalty& penalty,
                     const GlmParams& at);

    [[nodiscard]] VectorXd apply(const VectorXd& gradient) const;

private:
    bool dense_ = false;
    Eigen::LLT<MatrixXd> dense_factor_;
    std::shared_ptr<const StructuredMatrix> covariance_;
    std::shared_ptr<const StructuredMatrix> ridge_;
    double cov_weight_ = 0.0;   // 2 a f_v
    double offset_curv_ = 0.0;  // a f_mm
    double cross_ = 0.0;        // 2 a f_mv
    double rank_one_ = 0.0;     // a (4 f_vv - 4 f_mv^2 / f_mm)
    VectorXd u_;
    VectorXd b_inv_u_;
    double sm_denominator_ = 1.0;
};

/**
 * Runs `budget` nonlinear PCG iterations (Polak-Ribiere+, safeguarded Newton
 * line search using Hessian actions) on the exact penalized log-likelihood,
 * preconditioned by the EL Hessian at init. budget = 0 returns init. Stops
 * early only when the gradient criterion of fit_exact is already met.
 */
[[nodiscard]] FitResult pcg_refine(const CanonicalFamily& family, const GlmDataset& data, const Penalty& penalty,
                                   const GlmParams& init, int budget, const ElPreconditioner& preconditioner);

} // namespace elglm
