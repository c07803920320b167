#include "elglm/expected_loglik.hpp"

#include "elglm/error.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace elglm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

VectorXd squared(const VectorXd& radii) { return radii.array().square().matrix(); }

// Integral of G(s y) (or G''(s y)) against a normalized density, split at the
// point where the integrand concentrates.
double integrate_against(const std::function<double(double)>& pdf, const std::function<double(double)>& g,
                         double split) {
    auto integrand = [&](double y) {
        const double d = pdf(y);
        if (d == 0.0) return 0.0;
        return g(y) * d;
    };
    return integrate_adaptive(integrand, -kInf, split) + integrate_adaptive(integrand, split, kInf);
}

struct PreparedLaw {
    std::function<double(double)> pdf; // unit variance, integrates to one
};

PreparedLaw prepare_density(std::function<double(double)> raw) {
    double mass = 0.0;
    double second = 0.0;
    try {
        mass = integrate_adaptive(raw, -kInf, kInf, 1e-10);
        second = integrate_adaptive([&](double y) { return y * y * raw(y); }, -kInf, kInf, 1e-10);
    } catch (const NumericalError&) {
        throw DomainError("radial law is not normalizable or has infinite variance");
    }
    if (!(mass > 0.0) || !std::isfinite(mass)) throw DomainError("radial law is not normalizable");
    const double variance = second / mass;
    if (!(variance > 0.0) || !std::isfinite(variance) || variance > 1e12) {
        throw DomainError("radial law has no finite variance");
    }
    const double sd = std::sqrt(variance);
    // Rescale to unit variance: the whitened coordinate has identity covariance.
    return {[raw = std::move(raw), mass, sd](double y) { return raw(y * sd) * sd / mass; }};
}

} // namespace

StimulusMoments StimulusMoments::centered(StructuredMatrix covariance) {
    const Index p = covariance.size();
    return {VectorXd::Zero(p), std::make_shared<const StructuredMatrix>(std::move(covariance))};
}

StimulusMoments StimulusMoments::from_samples(const MatrixXd& x) {
    if (x.rows() < 2) throw DimensionError("need at least two samples to estimate stimulus moments");
    VectorXd mean = x.colwise().mean().transpose();
    MatrixXd centered = x.rowwise() - mean.transpose();
    MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    return {std::move(mean), std::make_shared<const StructuredMatrix>(StructuredMatrix::dense(std::move(cov)))};
}

EllipticTable::EllipticTable(CanonicalFamily family, VectorXd radii, VectorXd values, VectorXd curvature)
    : family_(family), radii_(std::move(radii)), values_(std::move(values)), curvature_(std::move(curvature)) {
    if (radii_.size() < 2 || values_.size() != radii_.size()) {
        throw DimensionError("elliptic table needs >= 2 radii with matching values");
    }
    if (radii_[0] != 0.0) throw DomainError("elliptic table grid must start at radius 0");
    for (Index i = 1; i < radii_.size(); ++i) {
        if (!(radii_[i] > radii_[i - 1])) throw DomainError("elliptic table radii must be strictly increasing");
    }
    // exp-type tables grow too fast for a cubic in v; interpolate log g instead
    log_scale_ = family_.kind() == FamilyKind::Poisson && (values_.array() > 0.0).all();
    interpolant_ = MonotoneCubic(squared(radii_), log_scale_ ? VectorXd(values_.array().log()) : values_);
    if (curvature_.size() > 0) {
        if (curvature_.size() != radii_.size()) throw DimensionError("curvature column length mismatch");
        curvature_interpolant_ = MonotoneCubic(squared(radii_), curvature_);
    }
    if (family_.kind() == FamilyKind::Bernoulli && curvature_.size() == 0) {
        throw DomainError("logistic elliptic table needs the curvature column");
    }
}

double EllipticTable::clamp_query(double v) const {
    const double top = interpolant_.upper();
    if (v < 0.0) v = 0.0;
    if (v > top) {
        // allow pure rounding noise at the top knot
        if (v <= top * (1.0 + 1e-12)) return top;
        throw DomainError("projection radius " + std::to_string(std::sqrt(v)) + " exceeds elliptic table range " +
                          std::to_string(max_radius()));
    }
    return v;
}

InterpolatedValue EllipticTable::at_squared_radius(double v) const {
    const InterpolatedValue h = interpolant_.eval(clamp_query(v));
    if (!log_scale_) return h;
    const double g = std::exp(h.value);
    return {g, g * h.first, g * (h.second + h.first * h.first)};
}

InterpolatedValue EllipticTable::curvature_at_squared_radius(double v) const {
    if (!has_curvature()) throw DomainError("elliptic table has no curvature column");
    return curvature_interpolant_.eval(clamp_query(v));
}

VectorXd default_elliptic_grid(double r_max, int knots) {
    if (!(r_max > 1e-4) || !std::isfinite(r_max)) throw DomainError("elliptic grid r_max must exceed 1e-4");
    if (knots < 2) throw DomainError("elliptic grid needs at least two knots");
    VectorXd grid(knots + 1);
    grid[0] = 0.0;
    const double lo = std::log(1e-4);
    const double hi = std::log(r_max);
    for (int k = 0; k < knots; ++k) grid[k + 1] = std::exp(lo + (hi - lo) * k / (knots - 1));
    grid[knots] = r_max;
    return grid;
}

EllipticTable build_elliptic_table(const CanonicalFamily& family, const RadialLaw& law, const VectorXd& radii) {
    if (radii.size() < 1) throw DimensionError("elliptic table grid is empty");
    for (Index i = 1; i < radii.size(); ++i) {
        if (!(radii[i] > radii[i - 1])) throw DomainError("elliptic table radii must be strictly increasing");
    }
    if (!(radii[0] >= 0.0)) throw DomainError("elliptic table radii must be nonnegative");
    VectorXd grid = radii;
    if (grid[0] > 0.0) {
        grid.resize(radii.size() + 1);
        grid[0] = 0.0;
        grid.tail(radii.size()) = radii;
    }
    const bool exp_family = family.kind() == FamilyKind::Poisson;
    const bool need_curvature = family.kind() == FamilyKind::Bernoulli;
    auto G = [&](double u) { return nonlinearity_eval(family, u).value; };
    auto G2 = [&](double u) { return nonlinearity_eval(family, u).second; };

    VectorXd values(grid.size());
    VectorXd curvature = need_curvature ? VectorXd(grid.size()) : VectorXd();

    if (const auto* samples = std::get_if<RadialLaw::Samples>(&law.law)) {
        const VectorXd& y = samples->draws;
        if (y.size() == 0) throw DomainError("radial law sample set is empty");
        for (Index i = 0; i < grid.size(); ++i) {
            double acc = 0.0;
            double acc2 = 0.0;
            for (Index k = 0; k < y.size(); ++k) {
                acc += G(grid[i] * y[k]);
                if (need_curvature) acc2 += G2(grid[i] * y[k]);
            }
            values[i] = acc / static_cast<double>(y.size());
            if (need_curvature) curvature[i] = acc2 / static_cast<double>(y.size());
        }
        return {family, std::move(grid), std::move(values), std::move(curvature)};
    }

    PreparedLaw prepared;
    bool gaussian = false;
    if (std::holds_alternative<RadialLaw::Gaussian>(law.law)) {
        gaussian = true;
        prepared.pdf = [](double y) { return std::exp(-0.5 * y * y) / std::sqrt(2.0 * M_PI); };
    } else if (const auto* t = std::get_if<RadialLaw::StudentT>(&law.law)) {
        if (!(t->dof > 2.0)) throw DomainError("Student t radial law needs dof > 2 for a finite covariance");
        const double c = std::sqrt((t->dof - 2.0) / t->dof);
        boost::math::students_t_distribution<double> dist(t->dof);
        prepared.pdf = [dist, c](double y) { return boost::math::pdf(dist, y / c) / c; };
    } else if (const auto* d = std::get_if<RadialLaw::Density>(&law.law)) {
        if (!d->pdf) throw DomainError("radial density is empty");
        prepared = prepare_density(d->pdf);
    }
    if (exp_family && std::holds_alternative<RadialLaw::StudentT>(law.law)) {
        throw DomainError("exponential nonlinearity has no finite expectation under a Student t law");
    }

    for (Index i = 0; i < grid.size(); ++i) {
        const double s = grid[i];
        if (s == 0.0) {
            values[i] = G(0.0);
            if (need_curvature) curvature[i] = G2(0.0);
            continue;
        }
        const double split = (exp_family && gaussian) ? s : 0.0;
        try {
            values[i] = integrate_against(prepared.pdf, [&](double y) { return G(s * y); }, split);
            if (need_curvature) curvature[i] = integrate_against(prepared.pdf, [&](double y) { return G2(s * y); }, 0.0);
        } catch (const NumericalError&) {
            throw DomainError("expectation of the nonlinearity diverges under the radial law at radius " +
                              std::to_string(s));
        }
    }
    return {family, std::move(grid), std::move(values), std::move(curvature)};
}

VectorXd ExpectedHessian::apply(const VectorXd& x) const {
    const Index p = c_theta_.size();
    if (x.size() != p + 1) throw DimensionError("Hessian action: vector length must be p + 1");
    const auto xt = x.tail(p);
    const double a = mean_.dot(xt);
    const double b = c_theta_.dot(xt);
    const double t = x[0] + a;
    const double along_mean = d_.d_mean_mean * t + 2.0 * d_.d_mean_var * b;
    const double along_u = 2.0 * d_.d_mean_var * t + 4.0 * d_.d_var_var * b;
    VectorXd out(p + 1);
    out[0] = along_mean;
    out.tail(p) = along_mean * mean_ + along_u * c_theta_;
    if (d_.d_var != 0.0) out.tail(p) += 2.0 * d_.d_var * covariance_->matvec(xt);
    return factor_ * out;
}

MatrixXd ExpectedHessian::to_dense() const {
    const Index p = c_theta_.size();
    VectorXd z(p + 1);
    VectorXd w(p + 1);
    z << 1.0, mean_;
    w << 0.0, c_theta_;
    MatrixXd h = d_.d_mean_mean * z * z.transpose() + 2.0 * d_.d_mean_var * (z * w.transpose() + w * z.transpose()) +
                 4.0 * d_.d_var_var * w * w.transpose();
    h.bottomRightCorner(p, p) += 2.0 * d_.d_var * covariance_->to_dense();
    return factor_ * h;
}

ExpectedHessian ExpectedHessian::scaled(double by) const {
    ExpectedHessian out = *this;
    out.factor_ *= by;
    return out;
}

ExpectationEngine::ExpectationEngine(EngineVariant variant, CanonicalFamily family, StimulusMoments moments)
    : variant_(variant), family_(family), moments_(std::move(moments)) {
    if (!moments_.covariance) throw DomainError("expectation engine needs a covariance");
    if (moments_.mean.size() != moments_.covariance->size()) {
        throw DimensionError("stimulus mean length does not match covariance size");
    }
    centered_ = moments_.mean.size() == 0 || moments_.mean.cwiseAbs().maxCoeff() == 0.0;
}

ExpectationEngine ExpectationEngine::analytic_quadratic(const CanonicalFamily& family, StructuredMatrix covariance) {
    if (family.kind() != FamilyKind::Gaussian) throw DomainError("quadratic engine requires the Gaussian family");
    return {EngineVariant::AnalyticQuadratic, family, StimulusMoments::centered(std::move(covariance))};
}

ExpectationEngine ExpectationEngine::analytic_exponential(const CanonicalFamily& family, StructuredMatrix covariance) {
    if (family.kind() != FamilyKind::Poisson) throw DomainError("exponential engine requires the Poisson family");
    return {EngineVariant::AnalyticExponential, family, StimulusMoments::centered(std::move(covariance))};
}

ExpectationEngine ExpectationEngine::analytic(const CanonicalFamily& family, const StimulusMoments& moments) {
    if (!moments.covariance) throw DomainError("expectation engine needs a covariance");
    if (moments.mean.size() > 0 && moments.mean.cwiseAbs().maxCoeff() > 1e-12) {
        throw DomainError("analytic engines require zero-mean stimuli; use the CLT engine");
    }
    switch (family.kind()) {
    case FamilyKind::Gaussian:
        return analytic_quadratic(family, *moments.covariance);
    case FamilyKind::Poisson:
        return analytic_exponential(family, *moments.covariance);
    case FamilyKind::Bernoulli:
        break;
    }
    throw DomainError("no analytic engine for the logistic family");
}

ExpectationEngine ExpectationEngine::elliptic(StructuredMatrix covariance, EllipticTable table) {
    CanonicalFamily family = table.family();
    ExpectationEngine engine(EngineVariant::Elliptic1D, family, StimulusMoments::centered(std::move(covariance)));
    engine.table_ = std::make_shared<const EllipticTable>(std::move(table));
    return engine;
}

ExpectationEngine ExpectationEngine::gaussian_clt(const CanonicalFamily& family, const StimulusMoments& moments,
                                                  int order) {
    if (order < 2) throw DomainError("Gauss-Hermite order must be >= 2");
    ExpectationEngine engine(EngineVariant::GaussianClt, family, moments);
    engine.rule_ = gauss_hermite(order);
    return engine;
}

ProjectionDerivatives ExpectationEngine::projection(double m, double v) const {
    v = std::max(v, 0.0);
    ProjectionDerivatives d;
    switch (variant_) {
    case EngineVariant::AnalyticQuadratic:
        d.value = 0.5 * (m * m + v);
        d.d_mean = m;
        d.d_mean_mean = 1.0;
        d.d_var = 0.5;
        return d;
    case EngineVariant::AnalyticExponential: {
        const double e = std::exp(m + 0.5 * v);
        if (!std::isfinite(e)) throw NumericalError("exponential expectation overflowed");
        d.value = d.d_mean = d.d_mean_mean = e;
        d.d_var = d.d_mean_var = 0.5 * e;
        d.d_var_var = 0.25 * e;
        return d;
    }
    case EngineVariant::Elliptic1D: {
        const InterpolatedValue g = table_->at_squared_radius(v);
        switch (family_.kind()) {
        case FamilyKind::Poisson: {
            const double e = std::exp(m);
            d.value = e * g.value;
            d.d_mean = d.d_mean_mean = e * g.value;
            d.d_var = d.d_mean_var = e * g.first;
            d.d_var_var = e * g.second;
            return d;
        }
        case FamilyKind::Gaussian:
            d.value = 0.5 * m * m + g.value;
            d.d_mean = m;
            d.d_mean_mean = 1.0;
            d.d_var = g.first;
            d.d_var_var = g.second;
            return d;
        case FamilyKind::Bernoulli: {
            if (m != 0.0) {
                throw DomainError("elliptic logistic engine only supports a zero offset and zero-mean stimuli");
            }
            // symmetric projection: E[G'(q)] = 1/2 for every radius
            d.value = g.value;
            d.d_mean = 0.5;
            d.d_mean_mean = table_->curvature_at_squared_radius(v).value;
            d.d_var = g.first;
            d.d_var_var = g.second;
            return d;
        }
        }
        break;
    }
    case EngineVariant::GaussianClt: {
        const double sd = std::sqrt(v);
        double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0;
        for (Index k = 0; k < rule_.nodes.size(); ++k) {
            const auto g = nonlinearity_derivatives(family_, m + sd * rule_.nodes[k]);
            const double w = rule_.weights[k];
            s0 += w * g[0];
            s1 += w * g[1];
            s2 += w * g[2];
            s3 += w * g[3];
            s4 += w * g[4];
        }
        if (!std::isfinite(s0)) throw NumericalError("CLT expectation overflowed");
        d.value = s0;
        d.d_mean = s1;
        d.d_mean_mean = s2;
        d.d_var = 0.5 * s2;
        d.d_mean_var = 0.5 * s3;
        d.d_var_var = 0.25 * s4;
        return d;
    }
    }
    throw DomainError("unsupported engine/family combination");
}

ExpectationResult expected_g(const ExpectationEngine& engine, const GlmParams& params) {
    const Index p = engine.dim();
    if (params.theta.size() != p) {
        throw DimensionError("theta has " + std::to_string(params.theta.size()) + " entries, engine expects " +
                             std::to_string(p));
    }
    VectorXd u = engine.covariance().matvec(params.theta);
    const double v = std::max(params.theta.dot(u), 0.0);
    const double m = params.offset + (engine.centered() ? 0.0 : engine.mean().dot(params.theta));
    const ProjectionDerivatives d = engine.projection(m, v);

    ExpectationResult out;
    out.value = d.value;
    out.gradient.resize(p + 1);
    out.gradient[0] = d.d_mean;
    out.gradient.tail(p) = 2.0 * d.d_var * u;
    if (!engine.centered()) out.gradient.tail(p) += d.d_mean * engine.mean();
    out.hessian = ExpectedHessian(d, engine.mean(), std::move(u), engine.covariance_ptr());
    return out;
}

ExpectationEngine build_clt_engine(const StimulusMoments& moments, const CanonicalFamily& family, int order) {
    return ExpectationEngine::gaussian_clt(family, moments, order);
}

ElEvaluation el_loglik(const ExpectationEngine& engine, const SufficientStats& stats, const GlmParams& params) {
    if (stats.xtr.size() != engine.dim()) throw DimensionError("sufficient statistics do not match engine size");
    const CanonicalFamily& family = engine.family();
    const double scale = family.scale();
    const double alpha = scale * static_cast<double>(stats.count) * family.exposure();
    ExpectationResult e = expected_g(engine, params);

    ElEvaluation out;
    out.value = scale * (params.offset * stats.response_total + stats.xtr.dot(params.theta)) - alpha * e.value;
    out.gradient = -alpha * e.gradient;
    out.gradient[0] += scale * stats.response_total;
    out.gradient.tail(stats.xtr.size()) += scale * stats.xtr;
    out.hessian = e.hessian.scaled(-alpha);
    return out;
}

} // namespace elglm
