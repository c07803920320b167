#include "elglm/glm.hpp"

#include "elglm/error.hpp"

#include <cmath>
#include <random>
#include <string>

namespace elglm {

namespace {

constexpr double kLogisticCutoff = 35.0;
constexpr double kMaxPoissonMean = 1e12;

double sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

} // namespace

CanonicalFamily CanonicalFamily::gaussian(double noise_variance) {
    if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) {
        throw DomainError("Gaussian noise variance must be positive");
    }
    return {FamilyKind::Gaussian, noise_variance, 1.0};
}

CanonicalFamily CanonicalFamily::poisson(double bin_width) {
    if (!(bin_width > 0.0) || !std::isfinite(bin_width)) throw DomainError("Poisson bin width must be positive");
    return {FamilyKind::Poisson, 1.0, bin_width};
}

CanonicalFamily CanonicalFamily::bernoulli() { return {FamilyKind::Bernoulli, 1.0, 1.0}; }

std::string_view CanonicalFamily::name() const {
    switch (kind_) {
    case FamilyKind::Gaussian:
        return "gaussian";
    case FamilyKind::Poisson:
        return "poisson";
    case FamilyKind::Bernoulli:
        return "bernoulli";
    }
    return "unknown";
}

NonlinearityValue nonlinearity_eval(const CanonicalFamily& family, double u) {
    switch (family.kind()) {
    case FamilyKind::Gaussian:
        return {0.5 * u * u, u, 1.0};
    case FamilyKind::Poisson: {
        const double e = std::exp(u);
        return {e, e, e};
    }
    case FamilyKind::Bernoulli: {
        if (u > kLogisticCutoff) {
            const double tail = std::exp(-u);
            return {u, 1.0, tail};
        }
        if (u < -kLogisticCutoff) {
            const double e = std::exp(u);
            return {e, e, e};
        }
        const double s = sigmoid(u);
        return {std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))), s, s * (1.0 - s)};
    }
    }
    return {0.0, 0.0, 0.0};
}

std::array<double, 5> nonlinearity_derivatives(const CanonicalFamily& family, double u) {
    switch (family.kind()) {
    case FamilyKind::Gaussian:
        return {0.5 * u * u, u, 1.0, 0.0, 0.0};
    case FamilyKind::Poisson: {
        const double e = std::exp(u);
        return {e, e, e, e, e};
    }
    case FamilyKind::Bernoulli: {
        const auto base = nonlinearity_eval(family, u);
        const double s = base.first;
        const double v = base.second; // s (1 - s), accurate in the tails
        return {base.value, s, v, v * (1.0 - 2.0 * s), v * (1.0 - 6.0 * v)};
    }
    }
    return {};
}

VectorXd GlmParams::stacked() const {
    VectorXd v(theta.size() + 1);
    v[0] = offset;
    v.tail(theta.size()) = theta;
    return v;
}

GlmParams GlmParams::from_stacked(const VectorXd& v) {
    if (v.size() < 1) throw DimensionError("stacked parameter vector is empty");
    return {v.tail(v.size() - 1), v[0]};
}

GlmDataset::GlmDataset(MatrixXd design, VectorXd responses) : responses_(std::move(responses)) {
    if (design.rows() != responses_.size()) {
        throw DimensionError("design has " + std::to_string(design.rows()) + " rows but " +
                             std::to_string(responses_.size()) + " responses were given");
    }
    if (!design.allFinite()) throw DomainError("design matrix contains non-finite entries");
    if (!responses_.allFinite()) throw DomainError("responses contain non-finite entries");
    stats_.xtr = design.transpose() * responses_;
    stats_.response_total = responses_.sum();
    stats_.count = design.rows();
    design_ = std::make_shared<const MatrixXd>(std::move(design));
}

void GlmDataset::validate_for(const CanonicalFamily& family) const {
    for (Index n = 0; n < responses_.size(); ++n) {
        const double r = responses_[n];
        if (family.kind() == FamilyKind::Bernoulli && r != 0.0 && r != 1.0) {
            throw DomainError("Bernoulli response at row " + std::to_string(n) + " is not 0 or 1");
        }
        if (family.kind() == FamilyKind::Poisson && (r < 0.0 || r != std::floor(r))) {
            throw DomainError("Poisson response at row " + std::to_string(n) + " is not a nonnegative integer");
        }
    }
}

GlmDataset GlmDataset::slice(Index begin, Index count) const {
    if (begin < 0 || count < 0 || begin + count > rows()) throw DimensionError("dataset slice out of range");
    return {design_->middleRows(begin, count), responses_.segment(begin, count)};
}

VectorXd HessianAction::apply(const VectorXd& v) const {
    const MatrixXd& x = *design_;
    if (v.size() != x.cols() + 1) throw DimensionError("Hessian action needs a vector of size p + 1");
    const VectorXd t = (weights_.array() * (x * v.tail(x.cols())).array() + weights_.array() * v[0]).matrix();
    VectorXd out(v.size());
    out[0] = -t.sum();
    out.tail(x.cols()) = -(x.transpose() * t);
    return out;
}

MatrixXd HessianAction::to_dense() const {
    const MatrixXd& x = *design_;
    const Index p = x.cols();
    MatrixXd h(p + 1, p + 1);
    const MatrixXd wx = weights_.asDiagonal() * x;
    h(0, 0) = -weights_.sum();
    h.block(1, 0, p, 1) = -(wx.colwise().sum().transpose());
    h.block(0, 1, 1, p) = h.block(1, 0, p, 1).transpose();
    h.block(1, 1, p, p) = -(x.transpose() * wx);
    return h;
}

namespace {

VectorXd linear_predictor(const GlmDataset& data, const GlmParams& params) {
    if (params.theta.size() != data.cols()) {
        throw DimensionError("parameter dimension " + std::to_string(params.theta.size()) +
                             " does not match design with " + std::to_string(data.cols()) + " columns");
    }
    if (!params.theta.allFinite() || !std::isfinite(params.offset)) throw DomainError("parameters must be finite");
    return (data.design() * params.theta).array() + params.offset;
}

} // namespace

LoglikEvaluation exact_loglik(const CanonicalFamily& family, const GlmDataset& data, const GlmParams& params) {
    const VectorXd eta = linear_predictor(data, params);
    const VectorXd& r = data.responses();
    const double scale = family.scale();
    const double exposure = family.exposure();
    const Index n_rows = eta.size();
    VectorXd residual(n_rows);
    VectorXd weights(n_rows);
    double value = 0.0;
    for (Index n = 0; n < n_rows; ++n) {
        const auto g = nonlinearity_eval(family, eta[n]);
        const double term = eta[n] * r[n] - exposure * g.value;
        if (!std::isfinite(term)) {
            throw NumericalError("non-finite log-likelihood term at row " + std::to_string(n));
        }
        value += term;
        residual[n] = scale * (r[n] - exposure * g.first);
        weights[n] = scale * exposure * g.second;
    }
    LoglikEvaluation out;
    out.value = scale * value;
    out.gradient.resize(data.cols() + 1);
    out.gradient[0] = residual.sum();
    out.gradient.tail(data.cols()) = data.design().transpose() * residual;
    out.hessian = HessianAction(data.design_ptr(), std::move(weights));
    return out;
}

double exact_loglik_value(const CanonicalFamily& family, const GlmDataset& data, const GlmParams& params) {
    const VectorXd eta = linear_predictor(data, params);
    const VectorXd& r = data.responses();
    const double exposure = family.exposure();
    double value = 0.0;
    for (Index n = 0; n < eta.size(); ++n) {
        const double term = eta[n] * r[n] - exposure * nonlinearity_eval(family, eta[n]).value;
        if (!std::isfinite(term)) throw NumericalError("non-finite log-likelihood term at row " + std::to_string(n));
        value += term;
    }
    return family.scale() * value;
}

double full_loglik(const CanonicalFamily& family, const GlmDataset& data, const GlmParams& params) {
    double value = exact_loglik_value(family, data, params);
    const VectorXd& r = data.responses();
    switch (family.kind()) {
    case FamilyKind::Gaussian: {
        const double s2 = family.noise_variance();
        value -= r.squaredNorm() / (2.0 * s2) + 0.5 * static_cast<double>(r.size()) * std::log(2.0 * M_PI * s2);
        break;
    }
    case FamilyKind::Poisson: {
        const double log_dt = std::log(family.bin_width());
        for (Index n = 0; n < r.size(); ++n) value += r[n] * log_dt - std::lgamma(r[n] + 1.0);
        break;
    }
    case FamilyKind::Bernoulli:
        break;
    }
    return value;
}

VectorXd simulate_responses(const CanonicalFamily& family, const MatrixXd& design, const GlmParams& params,
                            std::uint64_t seed) {
    if (params.theta.size() != design.cols()) throw DimensionError("parameter dimension does not match design");
    if (!design.allFinite()) throw DomainError("design matrix contains non-finite entries");
    std::mt19937_64 rng(seed);
    const VectorXd eta = (design * params.theta).array() + params.offset;
    VectorXd r(eta.size());
    for (Index n = 0; n < eta.size(); ++n) {
        switch (family.kind()) {
        case FamilyKind::Gaussian: {
            std::normal_distribution<double> noise(eta[n], std::sqrt(family.noise_variance()));
            r[n] = noise(rng);
            break;
        }
        case FamilyKind::Poisson: {
            const double mean = family.bin_width() * std::exp(eta[n]);
            if (!(mean <= kMaxPoissonMean)) {
                throw NumericalError("Poisson mean " + std::to_string(mean) + " at row " + std::to_string(n) +
                                     " exceeds 1e12");
            }
            if (mean <= 0.0) {
                r[n] = 0.0;
                break;
            }
            std::poisson_distribution<long long> draw(mean);
            r[n] = static_cast<double>(draw(rng));
            break;
        }
        case FamilyKind::Bernoulli: {
            std::bernoulli_distribution draw(sigmoid(eta[n]));
            r[n] = draw(rng) ? 1.0 : 0.0;
            break;
        }
        }
    }
    return r;
}

} // namespace elglm
