#include "elglm/estimators.hpp"

#include "elglm/error.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace elglm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;
constexpr int kMaxHalvings = 60;

double ridge_quadratic(const Penalty& penalty, const VectorXd& theta) {
    const StructuredMatrix* r = penalty.ridge_ptr();
    return r ? 0.5 * theta.dot(r->matvec(theta)) : 0.0;
}

double weighted_l1(const VectorXd& theta, const VectorXd& w) { return (theta.cwiseAbs().array() * w.array()).sum(); }

struct SmoothEval {
    double value = 0.0;
    VectorXd gradient;
    MatrixXd hessian;
};

// Penalized exact objective (smooth part only: log-likelihood minus ridge).
double exact_smooth_value(const CanonicalFamily& family, const GlmDataset& data, const Penalty& penalty,
                          const VectorXd& x) {
    try {
        const GlmParams params = GlmParams::from_stacked(x);
        const double v = exact_loglik_value(family, data, params) - ridge_quadratic(penalty, params.theta);
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    } catch (const NumericalError&) {
        return -std::numeric_limits<double>::infinity();
    }
}

SmoothEval exact_smooth_eval(const CanonicalFamily& family, const GlmDataset& data, const Penalty& penalty,
                             const MatrixXd& ridge_dense, const VectorXd& x, bool with_hessian) {
    const GlmParams params = GlmParams::from_stacked(x);
    LoglikEvaluation e = exact_loglik(family, data, params);
    SmoothEval out;
    out.value = e.value - ridge_quadratic(penalty, params.theta);
    out.gradient = std::move(e.gradient);
    const Index p = params.theta.size();
    if (penalty.has_ridge()) out.gradient.tail(p) -= penalty.ridge->matvec(params.theta);
    if (with_hessian) {
        out.hessian = e.hessian.to_dense();
        if (penalty.has_ridge()) out.hessian.bottomRightCorner(p, p) -= ridge_dense;
    }
    return out;
}

double gradient_norm(const VectorXd& g, bool fit_offset) {
    return fit_offset ? g.cwiseAbs().maxCoeff() : g.tail(g.size() - 1).cwiseAbs().maxCoeff();
}

// Damped Newton ascent on a smooth concave objective over the stacked vector.
FitResult newton_ascent(const std::function<SmoothEval(const VectorXd&)>& eval,
                        const std::function<double(const VectorXd&)>& value_only, VectorXd x,
                        const FitOptions& options, const std::string& solver) {
    const auto start = Clock::now();
    FitResult out;
    out.solver = solver;
    SmoothEval cur = eval(x);
    if (!std::isfinite(cur.value)) throw NumericalError(solver + ": objective is not finite at the initial point");
    out.objective_trace.push_back(cur.value);
    const Index first = options.fit_offset ? 0 : 1;
    const Index free = x.size() - first;
    for (int it = 0;; ++it) {
        if (gradient_norm(cur.gradient, options.fit_offset) <= options.gradient_tolerance * std::max(1.0, std::abs(cur.value))) {
            out.converged = true;
            break;
        }
        if (it >= options.max_iterations) break;
        Eigen::LLT<MatrixXd> llt(-cur.hessian.bottomRightCorner(free, free));
        if (llt.info() != Eigen::Success) throw NumericalError(solver + ": Hessian is numerically singular");
        VectorXd step = VectorXd::Zero(x.size());
        step.tail(free) = llt.solve(cur.gradient.tail(free));
        if (!step.allFinite()) throw NumericalError(solver + ": Hessian is numerically singular");
        const double slope = cur.gradient.dot(step);
        double t = 1.0;
        double next_value = value_only(x + step);
        int halvings = 0;
        // near the optimum predicted gains fall below the objective's roundoff
        const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(cur.value));
        while (!(next_value >= cur.value + kArmijo * t * slope - slack)) {
            if (++halvings > kMaxHalvings) throw NumericalError(solver + ": line search failed to increase the objective");
            t *= kShrink;
            next_value = value_only(x + t * step);
        }
        x += t * step;
        cur = eval(x);
        out.objective_trace.push_back(cur.value);
        out.iterations = it + 1;
    }
    out.params = GlmParams::from_stacked(x);
    out.wall_seconds = seconds_since(start);
    return out;
}

void require_events(const SufficientStats& stats) {
    if (!(stats.response_total > 0.0)) throw DomainError("no events: the response total N_s is zero");
}

double lnp_offset(const SufficientStats& stats, const StructuredMatrix& c, const VectorXd& theta, double bin_width) {
    return std::log(stats.response_total / (static_cast<double>(stats.count) * bin_width)) -
           0.5 * theta.dot(c.matvec(theta));
}

double quadratic_count(const SufficientStats& stats, QuadraticScale scale) {
    if (scale == QuadraticScale::Events) {
        require_events(stats);
        return stats.response_total;
    }
    if (stats.count < 1) throw DomainError("dataset is empty");
    return static_cast<double>(stats.count);
}

double quadratic_offset(const SufficientStats& stats, QuadraticScale scale, const StructuredMatrix& c,
                        const VectorXd& theta, double bin_width) {
    if (scale == QuadraticScale::Events) return lnp_offset(stats, c, theta, bin_width);
    return stats.response_total / static_cast<double>(stats.count);
}

void validate_lambdas(const std::vector<double>& lambdas) {
    if (lambdas.empty()) throw DomainError("lambda path is empty");
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        if (!(lambdas[k] >= 0.0) || !std::isfinite(lambdas[k])) throw DomainError("lambda values must be finite and >= 0");
        if (k > 0 && !(lambdas[k] < lambdas[k - 1])) throw DomainError("lambda path must be strictly decreasing");
    }
}

} // namespace

Penalty Penalty::ridge_only(StructuredMatrix r) {
    Penalty out;
    out.kind = Kind::Ridge;
    out.ridge = std::make_shared<const StructuredMatrix>(std::move(r));
    return out;
}

Penalty Penalty::l1(double lambda, VectorXd weights) { return l1_path({lambda}, std::move(weights)); }

Penalty Penalty::l1_path(std::vector<double> lambdas, VectorXd weights) {
    Penalty out;
    out.kind = Kind::L1;
    out.lambdas = std::move(lambdas);
    out.l1_weights = std::move(weights);
    validate_lambdas(out.lambdas);
    return out;
}

Penalty Penalty::ridge_plus_l1(StructuredMatrix r, double lambda, VectorXd weights) {
    Penalty out = l1(lambda, std::move(weights));
    out.kind = Kind::RidgePlusL1;
    out.ridge = std::make_shared<const StructuredMatrix>(std::move(r));
    return out;
}

VectorXd Penalty::weights(Index p) const {
    if (l1_weights.size() == 0) return VectorXd::Ones(p);
    if (l1_weights.size() != p) throw DimensionError("L1 weight vector length does not match parameter count");
    return l1_weights;
}

void Penalty::validate(Index p) const {
    if (has_ridge()) {
        if (!ridge) throw DomainError("ridge penalty has no matrix");
        if (ridge->size() != p) throw DimensionError("ridge matrix size does not match parameter count");
    }
    if (has_l1()) {
        validate_lambdas(lambdas);
        const VectorXd w = weights(p);
        if ((w.array() < 0.0).any()) throw DomainError("L1 weights must be nonnegative");
    }
}

double Penalty::cost(const VectorXd& theta) const {
    double c = ridge_quadratic(*this, theta);
    if (has_l1()) c += lambda() * weighted_l1(theta, weights(theta.size()));
    return c;
}

std::vector<double> default_lambda_path(const VectorXd& xtr, int count, double ratio) {
    if (count < 1) throw DomainError("lambda path needs at least one value");
    if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("lambda path ratio must lie in (0, 1)");
    const double top = xtr.size() ? xtr.cwiseAbs().maxCoeff() : 0.0;
    if (!(top > 0.0)) throw DomainError("X^T r is zero; every lambda gives the zero solution");
    std::vector<double> path(count);
    for (int k = 0; k < count; ++k) {
        path[k] = count == 1 ? top : top * std::pow(ratio, static_cast<double>(k) / (count - 1));
    }
    return path;
}

FitResult mele_gaussian(const SufficientStats& stats, const StructuredMatrix& covariance, const StructuredMatrix* ridge) {
    const auto start = Clock::now();
    if (stats.xtr.size() != covariance.size()) throw DimensionError("X^T r does not match covariance size");
    if (stats.count < 1) throw DomainError("dataset is empty");
    FitResult out;
    out.solver = "mele_gaussian";
    out.params.theta = solve_scaled_sum(covariance, static_cast<double>(stats.count), ridge, stats.xtr);
    out.params.offset = stats.response_total / static_cast<double>(stats.count);
    out.converged = true;
    out.wall_seconds = seconds_since(start);
    return out;
}

FitResult mpele_lnp(const SufficientStats& stats, const StructuredMatrix& covariance, const StructuredMatrix* ridge,
                    double bin_width) {
    const auto start = Clock::now();
    if (stats.xtr.size() != covariance.size()) throw DimensionError("X^T r does not match covariance size");
    require_events(stats);
    if (!(bin_width > 0.0)) throw DomainError("bin width must be positive");
    FitResult out;
    out.solver = "mpele_lnp";
    out.params.theta = solve_scaled_sum(covariance, stats.response_total, ridge, stats.xtr);
    out.params.offset = lnp_offset(stats, covariance, out.params.theta, bin_width);
    out.converged = true;
    out.wall_seconds = seconds_since(start);
    return out;
}

std::vector<FitResult> mpele_l1_path_diagonal(const SufficientStats& stats, const StructuredMatrix& covariance,
                                              const std::vector<double>& lambdas, QuadraticScale scale,
                                              double bin_width) {
    if (!covariance.is_diagonal()) throw DomainError("diagonal L1 path requires a diagonal covariance");
    if (stats.xtr.size() != covariance.size()) throw DimensionError("X^T r does not match covariance size");
    validate_lambdas(lambdas);
    const VectorXd diag = covariance.diagonal_values();
    for (Index j = 0; j < diag.size(); ++j) {
        if (!(diag[j] > 0.0)) throw DomainError("diagonal covariance entry " + std::to_string(j) + " is not positive");
    }
    const double n = quadratic_count(stats, scale);
    const VectorXd curvature = n * diag;
    std::vector<FitResult> path;
    path.reserve(lambdas.size());
    for (double lambda : lambdas) {
        const auto start = Clock::now();
        FitResult r;
        r.solver = "mpele_l1_path_diagonal";
        r.lambda = lambda;
        r.params.theta.resize(diag.size());
        for (Index j = 0; j < diag.size(); ++j) r.params.theta[j] = soft_threshold(stats.xtr[j], lambda) / curvature[j];
        r.params.offset = quadratic_offset(stats, scale, covariance, r.params.theta, bin_width);
        r.kkt_residual = l1_kkt_residual(stats.xtr - curvature.cwiseProduct(r.params.theta), r.params.theta, lambda,
                                         VectorXd::Ones(diag.size()));
        r.converged = true;
        r.wall_seconds = seconds_since(start);
        path.push_back(std::move(r));
    }
    return path;
}

FitResult mpele_l1_general(const SufficientStats& stats, const StructuredMatrix& covariance, double lambda,
                           QuadraticScale scale, const VectorXd& warm_start, const CoordinateDescentOptions& options,
                           double bin_width) {
    const auto start = Clock::now();
    if (stats.xtr.size() != covariance.size()) throw DimensionError("X^T r does not match covariance size");
    if (!(lambda >= 0.0)) throw DomainError("lambda must be nonnegative");
    const double n = quadratic_count(stats, scale);
    const MatrixXd a = n * covariance.to_dense();
    CoordinateDescentResult cd =
        solve_quadratic_l1(a, stats.xtr, lambda, VectorXd::Ones(stats.xtr.size()), warm_start, options);
    FitResult out;
    out.solver = "mpele_l1_general";
    out.lambda = lambda;
    out.iterations = cd.sweeps;
    out.kkt_residual = cd.kkt_residual;
    out.params.theta = std::move(cd.solution);
    out.params.offset = quadratic_offset(stats, scale, covariance, out.params.theta, bin_width);
    out.converged = true;
    out.wall_seconds = seconds_since(start);
    return out;
}

std::vector<FitResult> mpele_l1_general_path(const SufficientStats& stats, const StructuredMatrix& covariance,
                                             const std::vector<double>& lambdas, QuadraticScale scale,
                                             const CoordinateDescentOptions& options, double bin_width) {
    validate_lambdas(lambdas);
    std::vector<FitResult> path;
    VectorXd warm;
    for (double lambda : lambdas) {
        path.push_back(mpele_l1_general(stats, covariance, lambda, scale, warm, options, bin_width));
        warm = path.back().params.theta;
    }
    return path;
}

namespace {

FitResult fit_exact_l1(const CanonicalFamily& family, const GlmDataset& data, const Penalty& penalty,
                       const GlmParams& init, const FitOptions& options) {
    const auto start = Clock::now();
    const Index p = data.cols();
    const double lambda = penalty.lambda();
    VectorXd w(p + 1);
    w[0] = 0.0;
    w.tail(p) = penalty.weights(p);
    const MatrixXd ridge_dense = penalty.has_ridge() ? penalty.ridge->to_dense() : MatrixXd();

    auto composite = [&](const VectorXd& x) {
        const double smooth = exact_smooth_value(family, data, penalty, x);
        return -smooth + lambda * weighted_l1(x, w);
    };

    FitResult out;
    out.solver = "proximal_newton_l1";
    out.lambda = lambda;
    VectorXd x = init.stacked();
    SmoothEval cur = exact_smooth_eval(family, data, penalty, ridge_dense, x, true);
    if (!std::isfinite(cur.value)) throw NumericalError("L1 fit: objective is not finite at the initial point");
    double f = -cur.value + lambda * weighted_l1(x, w);
    out.objective_trace.push_back(-f);

    auto residual = [&](const SmoothEval& e, const VectorXd& at) {
        VectorXd g = e.gradient;
        if (!options.fit_offset) g[0] = 0.0;
        return l1_kkt_residual(g, at, lambda, w);
    };

    double kkt = residual(cur, x);
    for (int it = 0;; ++it) {
        if (kkt <= options.kkt_tolerance) {
            out.converged = true;
            break;
        }
        if (it >= options.max_iterations) break;
        MatrixXd a = -cur.hessian;
        VectorXd b = a * x + cur.gradient;
        if (!options.fit_offset) {
            // pin the offset: decouple it and give it its current value
            a.row(0).setZero();
            a.col(0).setZero();
            a(0, 0) = 1.0;
            b = a * x + cur.gradient;
            b[0] = x[0];
        }
        CoordinateDescentOptions inner = options.inner;
        inner.tolerance = std::max(options.inner.tolerance, std::min(1e-3 * kkt, 0.1 * options.kkt_tolerance));
        const CoordinateDescentResult cd = solve_quadratic_l1(a, b, lambda, w, x, inner);
        VectorXd step = cd.solution - x;
        if (!options.fit_offset) step[0] = 0.0;
        if (step.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, x.cwiseAbs().maxCoeff())) break;
        const double decrease = -cur.gradient.dot(step) + lambda * (weighted_l1(x + step, w) - weighted_l1(x, w));
        double t = 1.0;
        double next = composite(x + step);
        int halvings = 0;
        const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
        while (!(next <= f + kArmijo * t * std::min(decrease, 0.0) + slack)) {
            if (++halvings > kMaxHalvings) throw NumericalError("L1 fit: line search failed (KKT residual " + std::to_string(kkt) + ")");
            t *= kShrink;
            next = composite(x + t * step);
        }
        x += t * step;
        f = next;
        cur = exact_smooth_eval(family, data, penalty, ridge_dense, x, true);
        kkt = residual(cur, x);
        out.objective_trace.push_back(-f);
        out.iterations = it + 1;
    }
    out.kkt_residual = kkt;
    out.params = GlmParams::from_stacked(x);
    out.wall_seconds = seconds_since(start);
    return out;
}

void check_unique_mle(const CanonicalFamily& family, const GlmDataset& data, const Penalty& penalty) {
    if (family.kind() == FamilyKind::Gaussian && !penalty.has_ridge() && !penalty.has_l1() && data.cols() >= data.rows()) {
        throw DomainError("non-unique MLE: p = " + std::to_string(data.cols()) + " >= N = " +
                          std::to_string(data.rows()) + " without a penalty");
    }
}

// Nonlinear preconditioned CG ascent shared by fit_exact(CG) and pcg_refine.
FitResult nonlinear_pcg(const CanonicalFamily& family, const GlmDataset& data, const Penalty& penalty, VectorXd x,
                        int budget, double tolerance, const std::function<VectorXd(const VectorXd&)>& precondition,
                        const std::string& solver) {
    const auto start = Clock::now();
    const Index p = data.cols();
    FitResult out;
    out.solver = solver;
    auto eval = [&](const VectorXd& at) {
        const GlmParams params = GlmParams::from_stacked(at);
        LoglikEvaluation e = exact_loglik(family, data, params);
        if (penalty.has_ridge()) {
            e.value -= ridge_quadratic(penalty, params.theta);
            e.gradient.tail(p) -= penalty.ridge->matvec(params.theta);
        }
        return e;
    };
    auto curvature_along = [&](const LoglikEvaluation& e, const VectorXd& d) {
        double c = d.dot(e.hessian.apply(d));
        if (penalty.has_ridge()) c -= d.tail(p).dot(penalty.ridge->matvec(d.tail(p)));
        return c; // <= 0
    };

    LoglikEvaluation cur = eval(x);
    out.objective_trace.push_back(cur.value);
    VectorXd y = precondition(cur.gradient);
    VectorXd dir = y;
    double gy = cur.gradient.dot(y);
    for (int it = 0;; ++it) {
        if (cur.gradient.cwiseAbs().maxCoeff() <= tolerance * std::max(1.0, std::abs(cur.value))) {
            out.converged = true;
            break;
        }
        if (it >= budget) break;
        double slope = cur.gradient.dot(dir);
        if (!(slope > 0.0)) {
            dir = y;
            slope = gy;
        }
        if (!(slope > 0.0)) break; // preconditioned gradient vanished
        // safeguarded 1-D Newton along dir
        double t = 0.0;
        double deriv = slope;
        double curv = curvature_along(cur, dir);
        LoglikEvaluation trial = cur;
        for (int ls = 0; ls < 8; ++ls) {
            if (!(curv < 0.0)) break;
            double next_t = t - deriv / curv;
            LoglikEvaluation cand;
            bool ok = false;
            for (int h = 0; h < kMaxHalvings; ++h) {
                try {
                    cand = eval(x + next_t * dir);
                    ok = std::isfinite(cand.value) && cand.value >= trial.value - 1e-12 * std::abs(trial.value);
                } catch (const NumericalError&) {
                    ok = false;
                }
                if (ok) break;
                next_t = t + 0.5 * (next_t - t);
            }
            if (!ok) break;
            t = next_t;
            trial = std::move(cand);
            deriv = trial.gradient.dot(dir);
            curv = curvature_along(trial, dir);
            if (std::abs(deriv) <= 1e-10 * slope) break;
        }
        if (t == 0.0) break; // no progress possible along this direction
        x += t * dir;
        const VectorXd g_old = cur.gradient;
        const VectorXd y_old = y;
        cur = std::move(trial);
        y = precondition(cur.gradient);
        const double gy_new = cur.gradient.dot(y);
        const double beta = std::max(0.0, cur.gradient.dot(y - y_old) / gy);
        gy = gy_new;
        dir = y + beta * dir;
        out.objective_trace.push_back(cur.value);
        out.iterations = it + 1;
    }
    out.params = GlmParams::from_stacked(x);
    out.wall_seconds = seconds_since(start);
    return out;
}

FitResult fit_exact_smooth(const CanonicalFamily& family, const GlmDataset& data, const Penalty& penalty,
                           const GlmParams& init, FitMethod method, const FitOptions& options) {
    if (method == FitMethod::ConjugateGradient) {
        if (!options.fit_offset) throw DomainError("conjugate gradient fit always estimates the offset");
        return nonlinear_pcg(family, data, penalty, init.stacked(), options.max_iterations, options.gradient_tolerance,
                             [](const VectorXd& g) { return g; }, "exact_cg");
    }
    const MatrixXd ridge_dense = penalty.has_ridge() ? penalty.ridge->to_dense() : MatrixXd();
    return newton_ascent([&](const VectorXd& x) { return exact_smooth_eval(family, data, penalty, ridge_dense, x, true); },
                         [&](const VectorXd& x) { return exact_smooth_value(family, data, penalty, x); },
                         init.stacked(), options, "exact_newton");
}

} // namespace

FitResult fit_exact(const CanonicalFamily& family, const GlmDataset& data, const Penalty& penalty,
                    const GlmParams& init, FitMethod method, const FitOptions& options) {
    if (init.theta.size() != data.cols()) throw DimensionError("initial parameters do not match the design");
    penalty.validate(data.cols());
    data.validate_for(family);
    check_unique_mle(family, data, penalty);
    if (penalty.has_l1()) {
        if (penalty.lambdas.size() != 1) throw DomainError("fit_exact takes a single lambda; use fit_exact_l1_path");
        return fit_exact_l1(family, data, penalty, init, options);
    }
    return fit_exact_smooth(family, data, penalty, init, method, options);
}

std::vector<FitResult> fit_exact_l1_path(const CanonicalFamily& family, const GlmDataset& data, const Penalty& penalty,
                                         const GlmParams& init, const FitOptions& options) {
    if (!penalty.has_l1()) throw DomainError("L1 path requires an L1 penalty");
    penalty.validate(data.cols());
    data.validate_for(family);
    std::vector<FitResult> path;
    GlmParams warm = init;
    for (double lambda : penalty.lambdas) {
        Penalty single = penalty;
        single.lambdas = {lambda};
        path.push_back(fit_exact_l1(family, data, single, warm, options));
        warm = path.back().params;
    }
    return path;
}

FitResult fit_el(const ExpectationEngine& engine, const SufficientStats& stats, const Penalty& penalty,
                 const GlmParams& init, const FitOptions& options) {
    if (penalty.has_l1()) throw DomainError("fit_el handles smooth penalties only");
    penalty.validate(engine.dim());
    const Index p = engine.dim();
    const MatrixXd ridge_dense = penalty.has_ridge() ? penalty.ridge->to_dense() : MatrixXd();
    auto eval = [&](const VectorXd& x) {
        const GlmParams params = GlmParams::from_stacked(x);
        ElEvaluation e = el_loglik(engine, stats, params);
        SmoothEval out;
        out.value = e.value - ridge_quadratic(penalty, params.theta);
        out.gradient = std::move(e.gradient);
        out.hessian = e.hessian.to_dense();
        if (penalty.has_ridge()) {
            out.gradient.tail(p) -= penalty.ridge->matvec(params.theta);
            out.hessian.bottomRightCorner(p, p) -= ridge_dense;
        }
        return out;
    };
    auto value = [&](const VectorXd& x) {
        try {
            const GlmParams params = GlmParams::from_stacked(x);
            const double v = el_loglik(engine, stats, params).value - ridge_quadratic(penalty, params.theta);
            return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
        } catch (const NumericalError&) {
            return -std::numeric_limits<double>::infinity();
        } catch (const DomainError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    return newton_ascent(eval, value, init.stacked(), options, "el_newton");
}

ElPreconditioner::ElPreconditioner(const ExpectationEngine& engine, const SufficientStats& stats,
                                   const Penalty& penalty, const GlmParams& at)
    : covariance_(engine.covariance_ptr()), ridge_(penalty.has_ridge() ? penalty.ridge : nullptr) {
    if (penalty.has_l1()) throw DomainError("the EL preconditioner supports ridge penalties only");
    penalty.validate(engine.dim());
    const Index p = engine.dim();
    const ElEvaluation el = el_loglik(engine, stats, at);
    const ProjectionDerivatives& d = el.hessian.derivatives();
    const double alpha = -el.hessian.factor();
    offset_curv_ = alpha * d.d_mean_mean;
    cross_ = 2.0 * alpha * d.d_mean_var;
    cov_weight_ = 2.0 * alpha * d.d_var;
    u_ = el.hessian.c_theta();

    bool structured = engine.centered() && offset_curv_ > 0.0 && (cov_weight_ > 0.0 || ridge_);
    if (structured) {
        rank_one_ = alpha * (4.0 * d.d_var_var - 4.0 * d.d_mean_var * d.d_mean_var / d.d_mean_mean);
        try {
            b_inv_u_ = solve_scaled_sum(*covariance_, cov_weight_, ridge_.get(), u_);
            sm_denominator_ = 1.0 + rank_one_ * u_.dot(b_inv_u_);
            structured = sm_denominator_ > 1e-12;
        } catch (const NumericalError&) {
            structured = false;
        }
    }
    if (!structured) {
        dense_ = true;
        MatrixXd h = -el.hessian.to_dense();
        if (ridge_) h.bottomRightCorner(p, p) += ridge_->to_dense();
        dense_factor_.compute(h);
        if (dense_factor_.info() != Eigen::Success) throw NumericalError("EL Hessian is not negative definite at init");
    }
}

VectorXd ElPreconditioner::apply(const VectorXd& g) const {
    if (dense_) return dense_factor_.solve(g);
    const Index p = u_.size();
    if (g.size() != p + 1) throw DimensionError("preconditioner input must have p + 1 entries");
    const VectorXd rhs = g.tail(p) - (cross_ * g[0] / offset_curv_) * u_;
    VectorXd xt = solve_scaled_sum(*covariance_, cov_weight_, ridge_.get(), rhs);
    if (rank_one_ != 0.0) xt -= (rank_one_ * u_.dot(xt) / sm_denominator_) * b_inv_u_;
    VectorXd out(p + 1);
    out[0] = (g[0] - cross_ * u_.dot(xt)) / offset_curv_;
    out.tail(p) = xt;
    return out;
}

FitResult pcg_refine(const CanonicalFamily& family, const GlmDataset& data, const Penalty& penalty,
                     const GlmParams& init, int budget, const ElPreconditioner& preconditioner) {
    if (budget < 0) throw DomainError("PCG budget must be >= 0");
    if (penalty.has_l1()) throw DomainError("PCG refinement supports ridge penalties only");
    if (init.theta.size() != data.cols()) throw DimensionError("initial parameters do not match the design");
    penalty.validate(data.cols());
    FitOptions defaults;
    return nonlinear_pcg(family, data, penalty, init.stacked(), budget, defaults.gradient_tolerance,
                         [&](const VectorXd& g) { return preconditioner.apply(g); }, "pcg_refine");
}

} // namespace elglm
