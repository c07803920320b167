#pragma once

#include "elglm/glm.hpp"
#include "elglm/interpolation.hpp"
#include "elglm/quadrature.hpp"
#include "elglm/structured_matrix.hpp"

#include <functional>
#include <memory>
#include <variant>

namespace elglm {

/// Mean and covariance of the covariate distribution.
struct StimulusMoments {
    VectorXd mean;
    std::shared_ptr<const StructuredMatrix> covariance;

    static StimulusMoments centered(StructuredMatrix covariance);
    /// Sample mean and (dense) sample covariance of the rows of x.
    static StimulusMoments from_samples(const MatrixXd& x);
};

/// One-dimensional marginal law of y_1 for a whitened elliptically symmetric
/// covariate y = C^{-1/2} x.
struct RadialLaw {
    struct Gaussian {};
    struct StudentT {
        double dof;
    };
    struct Density {
        std::function<double(double)> pdf;
    };
    struct Samples {
        VectorXd draws;
    };
    std::variant<Gaussian, StudentT, Density, Samples> law;

    static RadialLaw gaussian() { return {Gaussian{}}; }
    /// Student t with dof degrees of freedom rescaled to unit variance (dof > 2).
    static RadialLaw student_t(double dof) { return {StudentT{dof}}; }
    static RadialLaw density(std::function<double(double)> pdf) { return {Density{std::move(pdf)}}; }
    static RadialLaw samples(VectorXd draws) { return {Samples{std::move(draws)}}; }
};

/**
 * Lookup table of g(s) = E[G(s y_1)] over the radius s = ||C^{1/2} theta||.
 * Interpolated by a monotone cubic in v = s^2 so the EL gradient stays C1 and
 * well defined at theta = 0.
 */
class EllipticTable {
public:
    /// curvature holds E[G''(s y_1)] per radius; only the logistic family needs it.
    EllipticTable(CanonicalFamily family, VectorXd radii, VectorXd values, VectorXd curvature = VectorXd());

    [[nodiscard]] const CanonicalFamily& family() const { return family_; }
    [[nodiscard]] const VectorXd& radii() const { return radii_; }
    [[nodiscard]] const VectorXd& values() const { return values_; }
    [[nodiscard]] double max_radius() const { return radii_[radii_.size() - 1]; }
    /// Interpolated g and its derivatives with respect to v = s^2.
    [[nodiscard]] InterpolatedValue at_squared_radius(double v) const;
    [[nodiscard]] bool has_curvature() const { return curvature_.size() > 0; }
    [[nodiscard]] const VectorXd& curvature() const { return curvature_; }
    [[nodiscard]] InterpolatedValue curvature_at_squared_radius(double v) const;

private:
    [[nodiscard]] double clamp_query(double v) const;

    CanonicalFamily family_;
    VectorXd radii_;
    VectorXd values_;
    VectorXd curvature_;
    bool log_scale_ = false;
    MonotoneCubic interpolant_;
    MonotoneCubic curvature_interpolant_;
};

/// {0} followed by `knots` log-spaced radii on [1e-4, r_max].
[[nodiscard]] VectorXd default_elliptic_grid(double r_max, int knots = 200);

[[nodiscard]] EllipticTable build_elliptic_table(const CanonicalFamily& family, const RadialLaw& law,
                                                 const VectorXd& radii);

/// f(m, v) = E[G(m + q)], q with mean 0 (beyond m) and variance v, and its
/// partial derivatives.
struct ProjectionDerivatives {
    double value = 0.0;
    double d_mean = 0.0;
    double d_var = 0.0;
    double d_mean_mean = 0.0;
    double d_mean_var = 0.0;
    double d_var_var = 0.0;
};

/**
 * Hessian of factor * E[G(offset + x^T theta)] over (offset, theta), kept in
 * the rank-structured form
 *   H_00 = f_mm,  H_0t = f_mm mu + 2 f_mv u,
 *   H_tt = f_mm mu mu^T + 2 f_mv (mu u^T + u mu^T) + 4 f_vv u u^T + 2 f_v C
 * with u = C theta. Applying it costs one structured matvec.
 */
class ExpectedHessian {
public:
    ExpectedHessian() = default;
    ExpectedHessian(ProjectionDerivatives d, VectorXd mean, VectorXd c_theta,
                    std::shared_ptr<const StructuredMatrix> covariance, double factor = 1.0)
        : d_(d), mean_(std::move(mean)), c_theta_(std::move(c_theta)), covariance_(std::move(covariance)),
          factor_(factor) {}

    [[nodiscard]] VectorXd apply(const VectorXd& v) const;
    [[nodiscard]] MatrixXd to_dense() const;
    [[nodiscard]] ExpectedHessian scaled(double by) const;

    [[nodiscard]] const ProjectionDerivatives& derivatives() const { return d_; }
    [[nodiscard]] const VectorXd& mean() const { return mean_; }
    [[nodiscard]] const VectorXd& c_theta() const { return c_theta_; }
    [[nodiscard]] const StructuredMatrix& covariance() const { return *covariance_; }
    [[nodiscard]] double factor() const { return factor_; }

private:
    ProjectionDerivatives d_;
    VectorXd mean_;
    VectorXd c_theta_;
    std::shared_ptr<const StructuredMatrix> covariance_;
    double factor_ = 1.0;
};

enum class EngineVariant { AnalyticQuadratic, AnalyticExponential, Elliptic1D, GaussianClt };

/// Evaluator of E[G(offset + x^T theta)] over the covariate distribution.
class ExpectationEngine {
public:
    /// Gaussian family, zero-mean covariates: E[G] = (offset^2 + theta^T C theta) / 2.
    static ExpectationEngine analytic_quadratic(const CanonicalFamily& family, StructuredMatrix covariance);
    /// Poisson family, zero-mean Gaussian covariates: E[G] = exp(offset + theta^T C theta / 2).
    static ExpectationEngine analytic_exponential(const CanonicalFamily& family, StructuredMatrix covariance);
    /// Analytic engine for the family; DomainError unless the mean is zero.
    static ExpectationEngine analytic(const CanonicalFamily& family, const StimulusMoments& moments);
    static ExpectationEngine elliptic(StructuredMatrix covariance, EllipticTable table);
    /// Gauss-Hermite (order >= 2) over q ~ N(offset + mu^T theta, theta^T C theta).
    static ExpectationEngine gaussian_clt(const CanonicalFamily& family, const StimulusMoments& moments,
                                          int order = 50);

    [[nodiscard]] EngineVariant variant() const { return variant_; }
    [[nodiscard]] const CanonicalFamily& family() const { return family_; }
    [[nodiscard]] const StructuredMatrix& covariance() const { return *moments_.covariance; }
    [[nodiscard]] const std::shared_ptr<const StructuredMatrix>& covariance_ptr() const {
        return moments_.covariance;
    }
    [[nodiscard]] const VectorXd& mean() const { return moments_.mean; }
    [[nodiscard]] bool centered() const { return centered_; }
    [[nodiscard]] Index dim() const { return moments_.mean.size(); }

    /// f(m, v) and partials for projection mean m and variance v.
    [[nodiscard]] ProjectionDerivatives projection(double m, double v) const;

private:
    ExpectationEngine(EngineVariant variant, CanonicalFamily family, StimulusMoments moments);

    EngineVariant variant_;
    CanonicalFamily family_;
    StimulusMoments moments_;
    bool centered_ = true;
    std::shared_ptr<const EllipticTable> table_;
    QuadratureRule rule_;
};

struct ExpectationResult {
    double value = 0.0;
    VectorXd gradient; // (d/d offset, d/d theta)
    ExpectedHessian hessian;
};

[[nodiscard]] ExpectationResult expected_g(const ExpectationEngine& engine, const GlmParams& params);

/// Builds the CLT engine from stimulus moments; DomainError when order < 2.
[[nodiscard]] ExpectationEngine build_clt_engine(const StimulusMoments& moments, const CanonicalFamily& family,
                                                 int order = 50);

struct ElEvaluation {
    double value = 0.0;
    VectorXd gradient;
    ExpectedHessian hessian; // Hessian of the EL itself (negative semidefinite)
};

/**
 * Expected log-likelihood
 *   scale * ( offset * N_s + (X^T r)^T theta - N * exposure * E[G(offset + x^T theta)] ).
 * Cost is independent of N once the sufficient statistics are cached.
 */
[[nodiscard]] ElEvaluation el_loglik(const ExpectationEngine& engine, const SufficientStats& stats,
                                     const GlmParams& params);
[[nodiscard]] inline ElEvaluation el_loglik(const ExpectationEngine& engine, const GlmDataset& data,
                                            const GlmParams& params) {
    return el_loglik(engine, data.stats(), params);
}

} // namespace elglm
