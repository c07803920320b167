#include "elglm/risk.hpp"

#include "elglm/error.hpp"
#include "elglm/quadrature.hpp"

#include <boost/math/constants/constants.hpp>

#include <cmath>
#include <random>
#include <string>

namespace elglm {

namespace {

constexpr double kPi = boost::math::constants::pi<double>();

double golden_minimize(const std::function<double(double)>& f, double lo, double hi, double tol, double& fmin) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    const double x = 0.5 * (a + b);
    fmin = f(x);
    // the bracket ends can win when the minimum sits on the boundary
    for (double edge : {lo, hi}) {
        const double fe = f(edge);
        if (fe < fmin) {
            fmin = fe;
            return edge;
        }
    }
    return x;
}

} // namespace

std::string_view estimator_name(EstimatorKind kind) {
    switch (kind) {
    case EstimatorKind::Mele: return "mele";
    case EstimatorKind::Mle: return "mle";
    case EstimatorKind::Mpele: return "mpele";
    case EstimatorKind::Map: return "map";
    }
    return "unknown";
}

EstimatorKind estimator_from_name(std::string_view name) {
    if (name == "mele") return EstimatorKind::Mele;
    if (name == "mle") return EstimatorKind::Mle;
    if (name == "mpele") return EstimatorKind::Mpele;
    if (name == "map") return EstimatorKind::Map;
    throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

void RiskSpec::validate() const {
    if (samples < 1 || dim < 1) throw DomainError("risk spec needs N >= 1 and p >= 1");
    if (!(ridge_c >= 0.0)) throw DomainError("ridge weight c must be nonnegative");
    if (!(snr >= 0.0)) throw DomainError("SNR must be nonnegative");
}

double mse_closed_form(const RiskSpec& spec) {
    spec.validate();
    const auto n = static_cast<double>(spec.samples);
    const auto p = static_cast<double>(spec.dim);
    const double s = spec.snr;
    switch (spec.kind) {
    case EstimatorKind::Mele: return (s + p * (s + 1.0)) / n;
    case EstimatorKind::Mle:
        if (!(n > p + 1.0)) throw DomainError("MLE risk needs N > p + 1");
        return p / (n - p - 1.0);
    case EstimatorKind::Mpele: {
        const double d = n + spec.ridge_c * p;
        const double shrink = n / d - 1.0;
        return shrink * shrink * s + (n * p * (1.0 + s) + n * s) / (d * d);
    }
    case EstimatorKind::Map:
        throw DomainError("MAP risk has no finite-sample closed form; use mc_mse");
    }
    return 0.0;
}

MarchenkoPastur::MarchenkoPastur(double ratio) : ratio_(ratio) {
    if (!(ratio > 0.0) || !std::isfinite(ratio)) throw DomainError("Marchenko-Pastur ratio must be positive");
    const double r = std::sqrt(ratio);
    lower_ = (1.0 - r) * (1.0 - r);
    upper_ = (1.0 + r) * (1.0 + r);
}

double MarchenkoPastur::density(double l) const {
    if (l <= lower_ || l >= upper_ || l <= 0.0) return 0.0;
    return std::sqrt((upper_ - l) * (l - lower_)) / (2.0 * kPi * l * ratio_);
}

double MarchenkoPastur::integrate_continuous(const std::function<double(double)>& g) const {
    const double w = upper_ - lower_;
    auto integrand = [&](double t) {
        const double s = std::sin(t), c = std::cos(t);
        const double l = lower_ + w * s * s;
        if (l <= 0.0) {
            // ratio == 1 at t == 0: the l in the denominator cancels sin^2
            return g(0.0) * w * c * c / (kPi * ratio_);
        }
        return g(l) * w * w * s * s * c * c / (kPi * l * ratio_);
    };
    return integrate_adaptive(integrand, 0.0, 0.5 * kPi, 1e-13);
}

double MarchenkoPastur::expectation(const std::function<double(double)>& g) const {
    double out = integrate_continuous(g);
    if (zero_mass() > 0.0) out += zero_mass() * g(0.0);
    return out;
}

double mse_asymptotic(EstimatorKind kind, double ratio, double snr, double ridge_c) {
    if (!(ratio > 0.0)) throw DomainError("ratio p/N must be positive");
    if (!(snr >= 0.0)) throw DomainError("SNR must be nonnegative");
    if (!(ridge_c >= 0.0)) throw DomainError("ridge weight c must be nonnegative");
    switch (kind) {
    case EstimatorKind::Mele: return ratio * (snr + 1.0);
    case EstimatorKind::Mle:
        if (!(ratio < 1.0)) throw DomainError("MLE is not unique for p/N >= 1");
        return ratio / (1.0 - ratio);
    case EstimatorKind::Mpele: {
        const double d = 1.0 + ridge_c * ratio;
        return (ratio + snr * (ridge_c * ridge_c * ratio * ratio + ratio)) / (d * d);
    }
    case EstimatorKind::Map: {
        if (ratio >= 1.0 && !(ridge_c > 0.0)) throw DomainError("MAP limit needs c > 0 when p/N >= 1");
        const MarchenkoPastur mp(ratio);
        const double shift = ridge_c * ratio;
        const double variance = mp.expectation([shift](double l) {
            const double d = l + shift;
            return d > 0.0 ? l / (d * d) : 0.0;
        });
        const double bias = mp.expectation([shift](double l) {
            const double d = l + shift;
            const double t = d > 0.0 ? l / d - 1.0 : -1.0;
            return t * t;
        });
        return ratio * variance + snr * bias;
    }
    }
    return 0.0;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<McEstimate> mc_mse_many(const std::vector<EstimatorKind>& kinds, Index samples, const VectorXd& theta,
                                    int trials, std::uint64_t seed, double ridge_c) {
    if (trials < 2) throw DomainError("Monte Carlo risk needs at least two trials");
    if (kinds.empty()) throw DomainError("no estimators requested");
    const Index p = theta.size();
    if (samples < 1 || p < 1) throw DomainError("Monte Carlo risk needs N >= 1 and p >= 1");
    if (!(ridge_c >= 0.0)) throw DomainError("ridge weight c must be nonnegative");
    bool need_gram = false;
    for (EstimatorKind k : kinds) {
        if (k == EstimatorKind::Mle) {
            if (p >= samples - 1) throw DomainError("MLE risk needs p < N - 1");
            need_gram = true;
        }
        if (k == EstimatorKind::Map) need_gram = true;
    }
    const auto n = static_cast<double>(samples);
    const double cp = ridge_c * static_cast<double>(p);

    std::vector<double> sum(kinds.size(), 0.0), sum_sq(kinds.size(), 0.0);
    Eigen::MatrixXd x(samples, p);
    VectorXd r(samples);
    Eigen::MatrixXd gram(p, p);
    for (int t = 0; t < trials; ++t) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        std::normal_distribution<double> z(0.0, 1.0);
        for (Index j = 0; j < p; ++j) {
            for (Index i = 0; i < samples; ++i) x(i, j) = z(rng);
        }
        r.noalias() = x * theta;
        for (Index i = 0; i < samples; ++i) r[i] += z(rng);
        const VectorXd xtr = x.transpose() * r;
        if (need_gram) {
            gram.setZero();
            gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
        }
        for (std::size_t k = 0; k < kinds.size(); ++k) {
            VectorXd est;
            switch (kinds[k]) {
            case EstimatorKind::Mele: est = xtr / n; break;
            case EstimatorKind::Mpele: est = xtr / (n + cp); break;
            case EstimatorKind::Mle: {
                Eigen::LLT<Eigen::MatrixXd> llt(gram);
                if (llt.info() != Eigen::Success) throw NumericalError("MLE: X^T X is singular");
                est = llt.solve(xtr);
                break;
            }
            case EstimatorKind::Map: {
                Eigen::MatrixXd a = gram;
                a.diagonal().array() += cp;
                Eigen::LLT<Eigen::MatrixXd> llt(a);
                if (llt.info() != Eigen::Success) throw NumericalError("MAP: X^T X + c p I is singular");
                est = llt.solve(xtr);
                break;
            }
            }
            const double err = (est - theta).squaredNorm();
            sum[k] += err;
            sum_sq[k] += err * err;
        }
    }
    std::vector<McEstimate> out(kinds.size());
    for (std::size_t k = 0; k < kinds.size(); ++k) {
        const double mean = sum[k] / trials;
        const double var = std::max(0.0, (sum_sq[k] - trials * mean * mean) / (trials - 1));
        out[k] = {mean, std::sqrt(var / trials)};
    }
    return out;
}

McEstimate mc_mse(EstimatorKind kind, Index samples, const VectorXd& theta, int trials, std::uint64_t seed,
                  double ridge_c) {
    return mc_mse_many({kind}, samples, theta, trials, seed, ridge_c).front();
}

double crossover_rho(double snr) {
    if (!(snr >= 0.0)) throw DomainError("SNR must be nonnegative");
    return snr / (1.0 + snr);
}

OptimalRidge optimal_ridge(EstimatorKind kind, double ratio, double snr, double log_lo, double log_hi,
                           double tolerance) {
    if (kind != EstimatorKind::Mpele && kind != EstimatorKind::Map) {
        throw DomainError("optimal ridge only applies to penalized estimators");
    }
    if (!(log_hi > log_lo)) throw DomainError("empty search interval for log c");
    auto f = [&](double log_c) { return mse_asymptotic(kind, ratio, snr, std::exp(log_c)); };
    double best = 0.0;
    const double at = golden_minimize(f, log_lo, log_hi, tolerance, best);
    return {std::exp(at), best};
}

} // namespace elglm
