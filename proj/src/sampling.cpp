#include "elglm/sampling.hpp"

#include "elglm/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace elglm {

namespace {

struct Trajectory {
    VectorXd position;
    VectorXd momentum;
    PotentialEval end;
    bool finite = true;
};

Trajectory leapfrog(const Potential& potential, VectorXd x, VectorXd m, const PotentialEval& start, double step,
                    int steps) {
    Trajectory t;
    VectorXd grad = start.gradient;
    m -= 0.5 * step * grad;
    PotentialEval cur;
    for (int l = 0; l < steps; ++l) {
        x += step * m;
        try {
            cur = potential(x);
        } catch (const NumericalError&) {
            t.finite = false;
            return t;
        } catch (const DomainError&) {
            t.finite = false;
            return t;
        }
        if (!std::isfinite(cur.value) || !cur.gradient.allFinite()) {
            t.finite = false;
            return t;
        }
        const double scale = (l + 1 == steps) ? 0.5 : 1.0;
        m -= scale * step * cur.gradient;
    }
    t.position = std::move(x);
    t.momentum = std::move(m);
    t.end = std::move(cur);
    return t;
}

double kinetic(const VectorXd& m) { return 0.5 * m.squaredNorm(); }

Chain run_hmc(const Potential& dynamics, const Potential* exact, const VectorXd& init, const HmcOptions& options,
              const std::string& target) {
    if (options.draws < 1) throw DomainError("HMC needs at least one draw");
    if (!(options.step > 0.0) || options.leapfrog < 1) throw DomainError("HMC step and leapfrog count must be positive");
    const Index dim = init.size();
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    VectorXd x = init;
    PotentialEval dyn = dynamics(x);
    double u_exact = exact ? (*exact)(x).value : dyn.value;
    if (!std::isfinite(dyn.value) || !std::isfinite(u_exact)) throw NumericalError("HMC: non-finite energy at init");

    const int burn = options.effective_burn_in();
    const int total = burn + options.draws;
    Chain chain;
    chain.samples.resize(options.draws, dim);
    chain.energies.reserve(options.draws);
    chain.seed = options.seed;
    chain.target = target;
    int accepted = 0;
    for (int it = 0; it < total; ++it) {
        VectorXd m(dim);
        for (Index j = 0; j < dim; ++j) m[j] = z(rng);
        const double h0 = u_exact + kinetic(m);
        Trajectory t = leapfrog(dynamics, x, m, dyn, options.step, options.leapfrog);
        bool accept = false;
        double u_new_exact = 0.0;
        if (t.finite) {
            u_new_exact = t.end.value;
            if (exact) {
                try {
                    u_new_exact = (*exact)(t.position).value;
                } catch (const NumericalError&) {
                    u_new_exact = std::numeric_limits<double>::infinity();
                }
            }
            const double h1 = u_new_exact + kinetic(t.momentum);
            const double log_ratio = h0 - h1;
            accept = std::isfinite(h1) && (log_ratio >= 0.0 || unit(rng) < std::exp(log_ratio));
        }
        if (accept) {
            x = std::move(t.position);
            dyn = std::move(t.end);
            u_exact = u_new_exact;
        }
        if (it >= burn) {
            if (accept) ++accepted;
            chain.samples.row(it - burn) = x.transpose();
            chain.energies.push_back(u_exact + kinetic(accept ? t.momentum : m));
        }
    }
    chain.acceptance_rate = static_cast<double>(accepted) / options.draws;
    return chain;
}

} // namespace

Potential exact_potential(const CanonicalFamily& family, const GlmDataset& data, const StructuredMatrix* ridge) {
    return [&family, &data, ridge](const VectorXd& x) {
        const GlmParams params = GlmParams::from_stacked(x);
        const LoglikEvaluation e = exact_loglik(family, data, params);
        PotentialEval out{-e.value, -e.gradient};
        if (ridge) {
            const VectorXd rt = ridge->matvec(params.theta);
            out.value += 0.5 * params.theta.dot(rt);
            out.gradient.tail(rt.size()) += rt;
        }
        return out;
    };
}

Potential el_potential(const ExpectationEngine& engine, const SufficientStats& stats, const StructuredMatrix* ridge) {
    return [&engine, &stats, ridge](const VectorXd& x) {
        const GlmParams params = GlmParams::from_stacked(x);
        const ElEvaluation e = el_loglik(engine, stats, params);
        PotentialEval out{-e.value, -e.gradient};
        if (ridge) {
            const VectorXd rt = ridge->matvec(params.theta);
            out.value += 0.5 * params.theta.dot(rt);
            out.gradient.tail(rt.size()) += rt;
        }
        return out;
    };
}

Chain hmc_chain(const Potential& potential, const VectorXd& init, const HmcOptions& options, const std::string& target) {
    return run_hmc(potential, nullptr, init, options, target);
}

Chain surrogate_hmc_chain(const Potential& surrogate, const Potential& exact, const VectorXd& init,
                          const HmcOptions& options) {
    return run_hmc(surrogate, &exact, init, options, "surrogate");
}

Chain gaussian_draws(const VectorXd& mean, const MatrixXd& covariance, int draws, std::uint64_t seed,
                     const std::string& target) {
    if (draws < 1) throw DomainError("need at least one draw");
    if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
        throw DimensionError("Gaussian draws: covariance size mismatch");
    }
    Eigen::LLT<MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success) throw NumericalError("Gaussian draws: covariance is not positive definite");
    const MatrixXd l = llt.matrixL();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Chain chain;
    chain.samples.resize(draws, mean.size());
    VectorXd e(mean.size());
    for (int d = 0; d < draws; ++d) {
        for (Index j = 0; j < e.size(); ++j) e[j] = z(rng);
        chain.samples.row(d) = (mean + l * e).transpose();
    }
    chain.acceptance_rate = 1.0;
    chain.seed = seed;
    chain.target = target;
    return chain;
}

double leapfrog_energy_error(const Potential& potential, const VectorXd& position, const VectorXd& momentum,
                             double step, int leapfrog_steps) {
    const PotentialEval start = potential(position);
    const Trajectory t = leapfrog(potential, position, momentum, start, step, leapfrog_steps);
    if (!t.finite) return std::numeric_limits<double>::infinity();
    return (t.end.value + kinetic(t.momentum)) - (start.value + kinetic(momentum));
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
    if (sorted.empty()) throw DomainError("quantile of an empty sample");
    if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("quantile probability must lie in [0, 1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

QuantileSummary chain_summary(const Chain& chain, const std::vector<Index>& coordinates) {
    if (chain.samples.rows() == 0) throw DomainError("chain is empty");
    QuantileSummary out;
    out.coordinates = coordinates;
    if (out.coordinates.empty()) {
        for (Index j = 0; j < chain.samples.cols(); ++j) out.coordinates.push_back(j);
    }
    const auto k = static_cast<Index>(out.coordinates.size());
    out.median.resize(k);
    out.lower.resize(k);
    out.upper.resize(k);
    std::vector<double> column(chain.samples.rows());
    for (Index c = 0; c < k; ++c) {
        const Index j = out.coordinates[c];
        if (j < 0 || j >= chain.samples.cols()) throw DimensionError("chain coordinate out of range");
        for (Index n = 0; n < chain.samples.rows(); ++n) column[n] = chain.samples(n, j);
        std::sort(column.begin(), column.end());
        out.median[c] = quantile_sorted(column, 0.5);
        out.lower[c] = quantile_sorted(column, 0.025);
        out.upper[c] = quantile_sorted(column, 0.975);
    }
    return out;
}

QuantileSummary gaussian_summary(const VectorXd& mean, const VectorXd& variances) {
    if (mean.size() != variances.size()) throw DimensionError("mean and variances differ in length");
    const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 0.975);
    QuantileSummary out;
    for (Index j = 0; j < mean.size(); ++j) out.coordinates.push_back(j);
    out.median = mean;
    const VectorXd sd = variances.cwiseMax(0.0).cwiseSqrt();
    out.lower = mean - z * sd;
    out.upper = mean + z * sd;
    return out;
}

} // namespace elglm
