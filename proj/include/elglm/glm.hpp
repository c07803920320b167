#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <memory>
#include <string_view>

namespace elglm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class FamilyKind { Gaussian, Poisson, Bernoulli };

/**
 * Canonical-link exponential family with its cumulant function G.
 *
 *   Gaussian:  G(u) = u^2 / 2, log-likelihood scaled by 1 / sigma^2
 *   Poisson:   G(u) = exp(u), counts per bin of width dt (mean dt * exp(u))
 *   Bernoulli: G(u) = log(1 + exp(u))
 */
class CanonicalFamily {
public:
    static CanonicalFamily gaussian(double noise_variance = 1.0);
    static CanonicalFamily poisson(double bin_width = 1.0);
    static CanonicalFamily bernoulli();

    [[nodiscard]] FamilyKind kind() const { return kind_; }
    [[nodiscard]] std::string_view name() const;
    [[nodiscard]] double noise_variance() const { return noise_variance_; }
    [[nodiscard]] double bin_width() const { return bin_width_; }

    /// Multiplier on the whole log-likelihood (1/sigma^2 for Gaussian, else 1).
    [[nodiscard]] double scale() const { return kind_ == FamilyKind::Gaussian ? 1.0 / noise_variance_ : 1.0; }
    /// Multiplier on G inside the log-likelihood (dt for Poisson, else 1).
    [[nodiscard]] double exposure() const { return kind_ == FamilyKind::Poisson ? bin_width_ : 1.0; }

private:
    CanonicalFamily(FamilyKind kind, double noise_variance, double bin_width)
        : kind_(kind), noise_variance_(noise_variance), bin_width_(bin_width) {}
    FamilyKind kind_;
    double noise_variance_;
    double bin_width_;
};

struct NonlinearityValue {
    double value;
    double first;
    double second;
};

/// G(u), G'(u), G''(u). The logistic branch switches to asymptotic forms
/// beyond |u| > 35.
[[nodiscard]] NonlinearityValue nonlinearity_eval(const CanonicalFamily& family, double u);

/// G and its first four derivatives at u.
[[nodiscard]] std::array<double, 5> nonlinearity_derivatives(const CanonicalFamily& family, double u);

/// theta (p filter coefficients) plus scalar offset.
struct GlmParams {
    VectorXd theta;
    double offset = 0.0;

    [[nodiscard]] Index dim() const { return theta.size(); }
    /// (offset, theta) stacked into p + 1 entries.
    [[nodiscard]] VectorXd stacked() const;
    static GlmParams from_stacked(const VectorXd& v);
};

/// X^T r, sum of responses, and N: everything the EL needs from the data.
struct SufficientStats {
    VectorXd xtr;
    double response_total = 0.0;
    Index count = 0;
};

/**
 * Design matrix and response vector with cached sufficient statistics.
 * The design is held through a shared pointer so Hessian actions can outlive
 * the dataset object that produced them.
 */
class GlmDataset {
public:
    GlmDataset(MatrixXd design, VectorXd responses);

    [[nodiscard]] const MatrixXd& design() const { return *design_; }
    [[nodiscard]] const std::shared_ptr<const MatrixXd>& design_ptr() const { return design_; }
    [[nodiscard]] const VectorXd& responses() const { return responses_; }
    [[nodiscard]] const SufficientStats& stats() const { return stats_; }
    [[nodiscard]] Index rows() const { return design_->rows(); }
    [[nodiscard]] Index cols() const { return design_->cols(); }

    /// Throws DomainError when responses are illegal for the family
    /// (Bernoulli outside {0,1}, Poisson negative or non-integer).
    void validate_for(const CanonicalFamily& family) const;

    /// Rows [begin, begin + count) as a new dataset.
    [[nodiscard]] GlmDataset slice(Index begin, Index count) const;

private:
    std::shared_ptr<const MatrixXd> design_;
    VectorXd responses_;
    SufficientStats stats_;
};

/// Applies the (p+1) x (p+1) log-likelihood Hessian in O(Np) without forming it.
class HessianAction {
public:
    HessianAction() = default;
    HessianAction(std::shared_ptr<const MatrixXd> design, VectorXd weights)
        : design_(std::move(design)), weights_(std::move(weights)) {}

    [[nodiscard]] VectorXd apply(const VectorXd& v) const;
    [[nodiscard]] MatrixXd to_dense() const;
    /// Per-row curvature weights w_n; H = -Z^T diag(w) Z with Z = [1, X].
    [[nodiscard]] const VectorXd& weights() const { return weights_; }

private:
    std::shared_ptr<const MatrixXd> design_;
    VectorXd weights_;
};

struct LoglikEvaluation {
    double value = 0.0;
    VectorXd gradient; // (d/d offset, d/d theta)
    HessianAction hessian;
};

/**
 * Exact log-likelihood up to const(theta):
 *   scale * sum_n [ (offset + x_n^T theta) r_n - exposure * G(offset + x_n^T theta) ].
 * Constant data terms (-log r_n!, -r^T r / 2 sigma^2, r log dt) are omitted.
 */
[[nodiscard]] LoglikEvaluation exact_loglik(const CanonicalFamily& family, const GlmDataset& data,
                                            const GlmParams& params);

/// Value only, skipping gradient and Hessian work.
[[nodiscard]] double exact_loglik_value(const CanonicalFamily& family, const GlmDataset& data,
                                        const GlmParams& params);

/// Log-likelihood including the data constants dropped by exact_loglik
/// (log r!, Gaussian normalizer, r log dt), so values compare across models.
[[nodiscard]] double full_loglik(const CanonicalFamily& family, const GlmDataset& data, const GlmParams& params);

/// Draws one response per row from the family at the given parameters.
[[nodiscard]] VectorXd simulate_responses(const CanonicalFamily& family, const MatrixXd& design,
                                          const GlmParams& params, std::uint64_t seed);

} // namespace elglm
