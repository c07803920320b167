#include "elglm/model_selection.hpp"

#include "elglm/error.hpp"

#include <cmath>
#include <string>

namespace elglm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double scalar_beta(const StructuredMatrix& r) {
    if (const auto* s = std::get_if<StructuredMatrix::ScaledIdentity>(&r.kind())) return s->scale;
    return std::numeric_limits<double>::quiet_NaN();
}

double logdet_spd(const MatrixXd& m, const char* what) {
    Eigen::LLT<MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + " is not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

// log det of the negative EL Hessian (joint over offset and theta, or theta only)
// plus the ridge, using the rank-structured form.
double el_neg_hessian_logdet(const ExpectedHessian& h, const StructuredMatrix& ridge, bool joint) {
    const ProjectionDerivatives& d = h.derivatives();
    const double alpha = -h.factor();
    const VectorXd& u = h.c_theta();
    const bool centered = h.mean().size() == 0 || h.mean().cwiseAbs().maxCoeff() == 0.0;
    const double a00 = alpha * d.d_mean_mean;
    const double cov_weight = 2.0 * alpha * d.d_var;
    if (centered && a00 > 0.0) {
        // theta block: cov_weight C + R + 4 a f_vv u u^T; joint adds the offset via a Schur complement
        const double rank_one = joint ? alpha * (4.0 * d.d_var_var - 4.0 * d.d_mean_var * d.d_mean_var / d.d_mean_mean)
                                      : alpha * 4.0 * d.d_var_var;
        double value = logdet_scaled_sum(h.covariance(), cov_weight, &ridge);
        if (rank_one != 0.0 && u.squaredNorm() > 0.0) {
            const VectorXd binv_u = solve_scaled_sum(h.covariance(), cov_weight, &ridge, u);
            const double lemma = 1.0 + rank_one * u.dot(binv_u);
            if (!(lemma > 0.0)) throw NumericalError("EL Hessian is not negative definite at the mode");
            value += std::log(lemma);
        }
        if (joint) value += std::log(a00);
        return value;
    }
    MatrixXd dense = -h.to_dense();
    const Index p = u.size();
    dense.bottomRightCorner(p, p) += ridge.to_dense();
    if (joint) return logdet_spd(dense, "negative EL Hessian");
    return logdet_spd(dense.bottomRightCorner(p, p), "negative EL Hessian");
}

GlmParams intercept_only(const CanonicalFamily& family, const GlmDataset& data) {
    GlmParams out;
    out.theta = VectorXd::Zero(data.cols());
    const double n = static_cast<double>(data.rows());
    const double total = data.stats().response_total;
    switch (family.kind()) {
    case FamilyKind::Gaussian:
        out.offset = total / n;
        break;
    case FamilyKind::Poisson:
        if (!(total > 0.0)) throw DomainError("no events: the offset-only Poisson fit diverges");
        out.offset = std::log(total / (n * family.bin_width()));
        break;
    case FamilyKind::Bernoulli: {
        const double m = total / n;
        if (!(m > 0.0 && m < 1.0)) throw DomainError("all responses equal: the offset-only logistic fit diverges");
        out.offset = std::log(m / (1.0 - m));
        break;
    }
    }
    return out;
}

} // namespace

EvidenceResult gaussian_evidence(const GlmDataset& data, double noise_variance, const StructuredMatrix& ridge,
                                 EvidenceMode mode, const StructuredMatrix* covariance) {
    if (!(noise_variance > 0.0)) throw DomainError("noise variance must be positive");
    const Index p = data.cols();
    if (ridge.size() != p) throw DimensionError("ridge size does not match the design");
    const VectorXd b = data.stats().xtr / noise_variance;
    EvidenceResult out;
    out.q = data.stats().xtr.squaredNorm();
    out.response_total = data.stats().response_total;
    out.beta = scalar_beta(ridge);
    out.dropped_constant = "-r^T r / (2 s2) - N/2 log(2 pi s2)";
    const double half_logdet_r = 0.5 * logdet_shifted(ridge, 0.0);
    if (mode == EvidenceMode::Exact) {
        MatrixXd a = data.design().transpose() * data.design() / noise_variance + ridge.to_dense();
        Eigen::LLT<MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) throw NumericalError("posterior precision is not positive definite");
        const double logdet_a = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        out.log_evidence = half_logdet_r - 0.5 * logdet_a + 0.5 * b.dot(llt.solve(b));
        out.method = "gaussian_exact";
        return out;
    }
    if (!covariance) throw DomainError("EL-mode Gaussian evidence needs the stimulus covariance");
    if (covariance->size() != p) throw DimensionError("covariance size does not match the design");
    const double a = static_cast<double>(data.rows()) / noise_variance;
    const double logdet_a = logdet_scaled_sum(*covariance, a, &ridge);
    const VectorXd sol = solve_scaled_sum(*covariance, a, &ridge, b);
    out.log_evidence = half_logdet_r - 0.5 * logdet_a + 0.5 * b.dot(sol);
    out.method = "gaussian_el";
    return out;
}

EvidenceResult laplace_evidence(const CanonicalFamily& family, const GlmDataset& data, const StructuredMatrix& ridge,
                                const GlmParams& mode_params, EvidenceMode mode, const ExpectationEngine* engine,
                                bool integrate_offset) {
    const Index p = data.cols();
    if (ridge.size() != p || mode_params.theta.size() != p) throw DimensionError("Laplace evidence: size mismatch");
    EvidenceResult out;
    out.q = data.stats().xtr.squaredNorm();
    out.response_total = data.stats().response_total;
    out.beta = scalar_beta(ridge);
    const double prior_quad = 0.5 * mode_params.theta.dot(ridge.matvec(mode_params.theta));
    const double half_logdet_r = 0.5 * logdet_shifted(ridge, 0.0);
    if (mode == EvidenceMode::Exact) {
        const LoglikEvaluation e = exact_loglik(family, data, mode_params);
        MatrixXd neg_h = -e.hessian.to_dense();
        neg_h.bottomRightCorner(p, p) += ridge.to_dense();
        const double logdet = integrate_offset ? logdet_spd(neg_h, "negative Hessian")
                                               : logdet_spd(neg_h.bottomRightCorner(p, p), "negative Hessian");
        out.log_evidence = e.value - prior_quad + half_logdet_r - 0.5 * logdet;
        out.method = "laplace_exact";
    } else {
        if (!engine) throw DomainError("EL-mode Laplace evidence needs an expectation engine");
        const ElEvaluation e = el_loglik(*engine, data.stats(), mode_params);
        out.log_evidence = e.value - prior_quad + half_logdet_r - 0.5 * el_neg_hessian_logdet(e.hessian, ridge, integrate_offset);
        out.method = "laplace_el";
    }
    out.dropped_constant = integrate_offset ? "likelihood data constants; (1/2) log(2 pi) from the flat offset prior"
                                            : "likelihood data constants";
    return out;
}

double el_log_evidence_scalar(double beta, double q, double response_total, Index p, double c) {
    if (!(beta > 0.0)) throw DomainError("beta must be positive");
    if (is_infinite_ridge(beta)) return 0.0;
    const double a = c * response_total;
    const double pp = static_cast<double>(p);
    // log(beta / (a + beta)) written to stay accurate when beta >> a
    return 0.5 * q / (a + beta) - 0.5 * pp * std::log1p(a / beta);
}

double rhat_analytic(double q, double response_total, Index p, double c) {
    if (!(q >= 0.0)) throw DomainError("q must be nonnegative");
    if (!(response_total > 0.0)) throw DomainError("N_s must be positive");
    if (p < 1) throw DomainError("p must be >= 1");
    if (!(c > 0.0)) throw DomainError("covariance scale must be positive");
    const double a = c * response_total;
    const double pp = static_cast<double>(p);
    if (q <= pp * a) return kInf;
    return pp * a * a / (q - pp * a);
}

VectorXd rhat_shared_basis(const VectorXd& projections, const VectorXd& covariance_eigenvalues,
                           double response_total) {
    if (projections.size() != covariance_eigenvalues.size()) throw DimensionError("shared-basis inputs differ in length");
    if (!(response_total > 0.0)) throw DomainError("N_s must be positive");
    VectorXd out(projections.size());
    for (Index j = 0; j < out.size(); ++j) {
        const double dn = covariance_eigenvalues[j] * response_total;
        const double q2 = projections[j] * projections[j];
        out[j] = q2 <= dn ? kInf : dn * dn / (q2 - dn);
    }
    return out;
}

FitResult ridge_map_fit(const CanonicalFamily& family, const GlmDataset& data, double beta, const GlmParams* warm_start) {
    if (!(beta > 0.0)) throw DomainError("ridge weight must be positive");
    if (is_infinite_ridge(beta)) {
        FitResult out;
        out.params = intercept_only(family, data);
        out.converged = true;
        out.solver = "infinite_ridge";
        return out;
    }
    GlmParams init = warm_start ? *warm_start : intercept_only(family, data);
    return fit_exact(family, data, Penalty::ridge_only(StructuredMatrix::scaled_identity(data.cols(), beta)), init);
}

FixedPointResult rhat_fixed_point(const CanonicalFamily& family, const GlmDataset& data, double beta0,
                                  int max_iterations, double tolerance, const GlmParams* warm_start) {
    if (!(beta0 > 0.0) || is_infinite_ridge(beta0)) throw DomainError("fixed point needs a finite positive start");
    const Index p = data.cols();
    FixedPointResult out;
    double beta = beta0;
    GlmParams warm = warm_start ? *warm_start : intercept_only(family, data);
    for (int it = 0;; ++it) {
        FitResult fit = ridge_map_fit(family, data, beta, &warm);
        warm = fit.params;
        out.steps.push_back({beta, fit});
        if (it > 0) {
            const double prev = out.steps[out.steps.size() - 2].beta;
            if (std::abs(beta - prev) <= tolerance * prev) {
                out.converged = true;
                break;
            }
        }
        if (it >= max_iterations) break;
        const double norm2 = fit.params.theta.squaredNorm();
        if (!(norm2 > 0.0)) throw DomainError("MAP filter is zero: the evidence is maximized by an infinite ridge");
        MatrixXd neg_h = -exact_loglik(family, data, fit.params).hessian.to_dense();
        neg_h.bottomRightCorner(p, p).diagonal().array() += beta;
        Eigen::LLT<MatrixXd> llt(neg_h);
        if (llt.info() != Eigen::Success) throw NumericalError("negative Hessian at the MAP is not positive definite");
        const MatrixXd cov = llt.solve(MatrixXd::Identity(p + 1, p + 1));
        const double trace = cov.bottomRightCorner(p, p).trace();
        const double next = (static_cast<double>(p) - beta * trace) / norm2;
        if (!(next > 0.0)) throw NumericalError("fixed-point update produced a nonpositive ridge weight");
        beta = next;
    }
    return out;
}

RidgeSearchResult maximize_laplace_evidence(const CanonicalFamily& family, const GlmDataset& data, double log_lo,
                                            double log_hi, double tolerance) {
    if (!(log_hi > log_lo)) throw DomainError("search interval is empty");
    const Index p = data.cols();
    RidgeSearchResult best;
    GlmParams warm = intercept_only(family, data);
    auto evaluate = [&](double log_beta) {
        const double beta = std::exp(log_beta);
        const FitResult fit = ridge_map_fit(family, data, beta, &warm);
        warm = fit.params;
        const double value = laplace_evidence(family, data, StructuredMatrix::scaled_identity(p, beta), fit.params,
                                              EvidenceMode::Exact)
                                 .log_evidence;
        ++best.evaluations;
        if (best.evaluations == 1 || value > best.log_evidence) {
            best.log_evidence = value;
            best.beta = beta;
            best.map_params = fit.params;
        }
        return value;
    };
    const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = log_lo;
    double b = log_hi;
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = evaluate(c);
    double fd = evaluate(d);
    while (b - a > tolerance) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = evaluate(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = evaluate(d);
        }
    }
    return best;
}

} // namespace elglm
