// Acceptance gate: one PASS/FAIL line per criterion.

#include "elglm/error.hpp"
#include "elglm/estimators.hpp"
#include "elglm/model_selection.hpp"
#include "elglm/protocols.hpp"
#include "elglm/risk.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace elglm;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    if (!pass) ++failures;
    std::printf("[%s] criterion %d %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MatrixXd random_matrix(Index r, Index c, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> z(0.0, sd);
    MatrixXd m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = z(rng);
    return m;
}

MatrixXd random_spd(Index p, std::mt19937_64& rng) {
    const MatrixXd a = random_matrix(p, p, rng);
    return a * a.transpose() / static_cast<double>(p) + 0.5 * MatrixXd::Identity(p, p);
}

VectorXd theta_with_snr(Index p, double snr) {
    const VectorXd t = VectorXd::LinSpaced(p, -1.0, 2.0);
    return t * std::sqrt(snr) / t.norm();
}

// ---- 1 ---------------------------------------------------------------------------

void risk_vs_monte_carlo() {
    const auto t0 = Clock::now();
    const Index n = 1000, p = 50;
    bool ok = true;
    std::ostringstream d;
    for (double snr : {0.2, 1.0, 5.0}) {
        const auto est = mc_mse_many({EstimatorKind::Mele, EstimatorKind::Mle}, n, theta_with_snr(p, snr), 2000, 1001);
        const double mele = mse_closed_form({n, p, snr, 0.0, EstimatorKind::Mele});
        const double mle = mse_closed_form({n, p, snr, 0.0, EstimatorKind::Mle});
        const double z1 = std::abs(est[0].mse - mele) / est[0].stderr_;
        const double z2 = std::abs(est[1].mse - mle) / est[1].stderr_;
        ok = ok && z1 <= 3.0 && z2 <= 3.0;
        d << "snr " << snr << " z(mele)=" << fmt("%.2f", z1) << " z(mle)=" << fmt("%.2f", z2) << "; ";
    }
    const double secs = since(t0);
    d << fmt("%.1fs (limit 120s)", secs);
    report(1, "risk formulas vs Monte Carlo", ok && secs <= 120.0, d.str());
}

// ---- 2 ---------------------------------------------------------------------------

void asymptotic_limits() {
    bool ok = true;
    std::ostringstream d;
    double worst = 0.0;
    for (double rho : {0.1, 0.5, 0.9}) {
        for (double snr : {0.2, 1.0, 5.0}) {
            const Index n = 100;
            const auto p = static_cast<Index>(std::llround(rho * n));
            const double finite = mse_closed_form({n, p, snr, 0.0, EstimatorKind::Mele});
            const double limit = mse_asymptotic(EstimatorKind::Mele, rho, snr);
            const double rel = std::abs(finite - limit) / limit;
            worst = std::max(worst, rel);
            if (rel > 0.01 + 1e-12) { // roundoff slack: rho 0.5, snr 1 sits exactly at 1%
                ok = false;
                d << "rho " << rho << " snr " << snr << fmt(" rel %.4f; ", rel);
            }
        }
    }
    d << fmt("worst relative gap %.4f (limit 0.01) over rho {0.1,0.5,0.9} x snr {0.2,1,5}", worst);
    report(2, "MELE finite-N vs limit at N=100", ok, d.str());
}

// ---- 3 ---------------------------------------------------------------------------

void crossover_location() {
    const auto t0 = Clock::now();
    const Index n = 2000;
    bool ok = true;
    std::ostringstream d;
    for (double snr : {0.2, 1.0, 5.0}) {
        const double predicted = crossover_rho(snr);
        std::vector<double> rhos;
        for (double off : {-0.1, -0.05, -0.025, 0.0, 0.025, 0.05, 0.1}) {
            const double r = predicted + off;
            if (r >= 0.02 && r <= 0.95) rhos.push_back(r);
        }
        std::vector<double> diff;
        for (std::size_t k = 0; k < rhos.size(); ++k) {
            const auto p = static_cast<Index>(std::llround(rhos[k] * n));
            const auto est = mc_mse_many({EstimatorKind::Mele, EstimatorKind::Mle}, n, theta_with_snr(p, snr), 20,
                                         derive_seed(3000, k + static_cast<std::uint64_t>(snr * 100)));
            diff.push_back(est[0].mse - est[1].mse);
        }
        double cross = std::nan("");
        for (std::size_t k = 1; k < rhos.size(); ++k) {
            if (diff[k - 1] > 0.0 && diff[k] <= 0.0) {
                cross = rhos[k - 1] + (rhos[k] - rhos[k - 1]) * diff[k - 1] / (diff[k - 1] - diff[k]);
                break;
            }
        }
        const bool good = std::isfinite(cross) && std::abs(cross - predicted) <= 0.05;
        ok = ok && good;
        d << "snr " << snr << fmt(" predicted %.4f", predicted) << fmt(" empirical %.4f; ", cross);
    }
    d << fmt("%.1fs", since(t0));
    report(3, "MELE/MLE crossover", ok, d.str());
}

// ---- 4 ---------------------------------------------------------------------------

// Newton on the EL with dense linear algebra, independent of the closed forms.
GlmParams newton_el(const ExpectationEngine& engine, const SufficientStats& stats, const MatrixXd& ridge, Index p) {
    VectorXd z = VectorXd::Zero(p + 1);
    for (int it = 0; it < 200; ++it) {
        const auto e = el_loglik(engine, stats, GlmParams::from_stacked(z));
        VectorXd g = e.gradient;
        MatrixXd h = e.hessian.to_dense();
        g.tail(p) -= ridge * z.tail(p);
        h.bottomRightCorner(p, p) -= ridge;
        VectorXd step = (-h).ldlt().solve(g);
        // damped while far from the optimum
        const double big = step.cwiseAbs().maxCoeff();
        if (big > 1.0) step /= big;
        z += step;
        if (big < 1e-15) break;
    }
    return GlmParams::from_stacked(z);
}

void closed_form_estimators() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(4004);
    std::uniform_int_distribution<int> dim(1, 50);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const Index p = dim(rng);
        const auto cov = StructuredMatrix::dense(random_spd(p, rng));
        const bool use_ridge = t % 2 == 1;
        const auto ridge = StructuredMatrix::scaled_identity(p, use_ridge ? 5.0 * u(rng) : 0.0);
        const Index count = 200 + static_cast<Index>(800 * u(rng));
        const MatrixXd x = random_matrix(count, p, rng);
        const GlmParams truth{random_matrix(p, 1, rng, 0.3 / std::sqrt(static_cast<double>(p))).col(0), -0.5};
        if (t < 50) {
            const GlmDataset d(x, simulate_responses(CanonicalFamily::gaussian(), x, truth, rng()));
            const auto engine = ExpectationEngine::analytic_quadratic(CanonicalFamily::gaussian(), cov);
            const auto closed = mele_gaussian(d.stats(), cov, use_ridge ? &ridge : nullptr);
            const GlmParams num = newton_el(engine, d.stats(), ridge.to_dense(), p);
            worst = std::max(worst, (closed.params.stacked() - num.stacked()).cwiseAbs().maxCoeff());
        } else {
            const auto fam = CanonicalFamily::poisson();
            const GlmDataset d(x, simulate_responses(fam, x, truth, rng()));
            const auto engine = ExpectationEngine::analytic_exponential(fam, cov);
            const auto closed = mpele_lnp(d.stats(), cov, use_ridge ? &ridge : nullptr);
            const GlmParams num = newton_el(engine, d.stats(), ridge.to_dense(), p);
            worst = std::max(worst, (closed.params.stacked() - num.stacked()).cwiseAbs().maxCoeff());
        }
    }
    const double secs = since(t0);
    report(4, "closed-form MELE/MPELE vs numeric EL maximization", worst <= 1e-7 && secs <= 60.0,
           fmt("100 instances (50 Gaussian, 50 Poisson, p<=50), worst inf-norm %.3e (limit 1e-7)", worst) +
               fmt(", %.1fs", secs));
}

// ---- 5 ---------------------------------------------------------------------------

VectorXd sign_enumeration(const MatrixXd& a, const VectorXd& b, double lambda) {
    const Index p = b.size();
    int patterns = 1;
    for (Index j = 0; j < p; ++j) patterns *= 3;
    VectorXd best = VectorXd::Zero(p);
    double best_value = 0.0;
    for (int code = 0; code < patterns; ++code) {
        std::vector<Index> support;
        std::vector<double> signs;
        int c = code;
        for (Index j = 0; j < p; ++j) {
            const int s = c % 3 - 1;
            c /= 3;
            if (s != 0) {
                support.push_back(j);
                signs.push_back(s);
            }
        }
        if (support.empty()) continue;
        const auto k = static_cast<Index>(support.size());
        MatrixXd as(k, k);
        VectorXd rhs(k);
        for (Index i = 0; i < k; ++i) {
            rhs[i] = b[support[i]] - lambda * signs[i];
            for (Index j = 0; j < k; ++j) as(i, j) = a(support[i], support[j]);
        }
        const VectorXd xs = as.llt().solve(rhs);
        bool feasible = true;
        for (Index i = 0; i < k; ++i) feasible = feasible && xs[i] * signs[i] > 0.0;
        if (!feasible) continue;
        VectorXd x = VectorXd::Zero(p);
        for (Index i = 0; i < k; ++i) x[support[i]] = xs[i];
        const double value = 0.5 * x.dot(a * x) - b.dot(x) + lambda * x.cwiseAbs().sum();
        if (value < best_value) {
            best_value = value;
            best = x;
        }
    }
    return best;
}

void l1_correctness() {
    std::mt19937_64 rng(5005);
    std::uniform_real_distribution<double> u(0.3, 2.0);
    // diagonal C: subgradient conditions along full paths
    double worst_sub = 0.0;
    bool zero_ok = true;
    for (int t = 0; t < 20; ++t) {
        const Index p = 30, n = 150;
        const MatrixXd x = random_matrix(n, p, rng);
        const GlmDataset d(x, simulate_responses(CanonicalFamily::gaussian(), x,
                                                 {random_matrix(p, 1, rng, 0.3).col(0), 0.0}, rng()));
        VectorXd diag(p);
        for (Index j = 0; j < p; ++j) diag[j] = u(rng);
        const auto lambdas = default_lambda_path(d.stats().xtr, 25, 1e-3);
        const auto fits = mpele_l1_path_diagonal(d.stats(), StructuredMatrix::diagonal(diag), lambdas);
        const double scale = d.stats().xtr.cwiseAbs().maxCoeff();
        for (std::size_t q = 0; q < fits.size(); ++q) {
            for (Index j = 0; j < p; ++j) {
                const double th = fits[q].params.theta[j];
                const double g = d.stats().xtr[j] - static_cast<double>(n) * diag[j] * th;
                if (th == 0.0) {
                    zero_ok = zero_ok && std::abs(g) <= lambdas[q];
                } else {
                    worst_sub = std::max(worst_sub, std::abs(g - lambdas[q] * (th > 0 ? 1.0 : -1.0)) / scale);
                }
            }
        }
    }
    // general C at p = 8 against sign-pattern enumeration
    double worst_cd = 0.0;
    for (int t = 0; t < 20; ++t) {
        const Index p = 8, n = 40;
        const MatrixXd x = random_matrix(n, p, rng);
        const GlmDataset d(x, simulate_responses(CanonicalFamily::gaussian(), x,
                                                 {random_matrix(p, 1, rng, 0.5).col(0), 0.0}, rng()));
        const MatrixXd c = random_spd(p, rng);
        const double lam = d.stats().xtr.cwiseAbs().maxCoeff() * (0.05 + 0.15 * (t % 5));
        const auto fit = mpele_l1_general(d.stats(), StructuredMatrix::dense(c), lam, QuadraticScale::Samples, VectorXd(),
                                          {100000, 1e-13});
        const VectorXd brute = sign_enumeration(static_cast<double>(n) * c, d.stats().xtr, lam);
        worst_cd = std::max(worst_cd, (fit.params.theta - brute).cwiseAbs().maxCoeff());
    }
    const bool ok = zero_ok && worst_sub <= 1e-12 && worst_cd <= 1e-8;
    report(5, "L1 subgradient conditions and brute force", ok,
           std::string("diagonal paths: zero-coordinate bounds ") + (zero_ok ? "hold" : "violated") +
               fmt(", active residual %.2e (relative, limit 1e-12)", worst_sub) +
               fmt("; p=8 general C worst inf-norm %.2e (limit 1e-8)", worst_cd));
}

// ---- 6 ---------------------------------------------------------------------------

void evidence_and_rhat() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(6006);
    std::uniform_int_distribution<int> dim(1, 400);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int points = 10000;
    const double lo = std::log(1e-4), hi = std::log(1e9);
    const double step = (hi - lo) / (points - 1);
    int agree = 0, infinite = 0;
    for (int t = 0; t < 50; ++t) {
        const Index p = dim(rng);
        const double ns = std::exp(std::log(5.0) + u(rng) * std::log(2e4));
        const double q = static_cast<double>(p) * ns * std::exp(-1.5 + 3.0 * u(rng));
        const double beta = rhat_analytic(q, ns, p);
        double best = -std::numeric_limits<double>::infinity();
        int arg = 0;
        std::vector<double> values(points);
        for (int k = 0; k < points; ++k) {
            values[k] = el_log_evidence_scalar(std::exp(lo + step * k), q, ns, p);
            if (values[k] > best) {
                best = values[k];
                arg = k;
            }
        }
        if (is_infinite_ridge(beta)) {
            ++infinite;
            bool rising = true;
            for (int k = points / 2 + 1; k < points; ++k) rising = rising && values[k] >= values[k - 1];
            if (rising && arg >= points / 2) ++agree;
        } else {
            const double at = el_log_evidence_scalar(beta, q, ns, p);
            if (std::abs(lo + step * arg - std::log(beta)) <= step && best <= at + 1e-12 * std::max(1.0, std::abs(at))) {
                ++agree;
            }
        }
    }
    const RidgeSelectionConfig cfg; // p=250, norm 10, 30 replicates
    const auto reps = run_ridge_selection(cfg);
    std::vector<double> zero, one;
    for (const auto& r : reps) {
        zero.push_back(std::abs(std::log(r.beta_el / r.beta_exact)));
        one.push_back(std::abs(std::log(r.beta_onestep / r.beta_exact)));
    }
    const double m0 = median(zero), m1 = median(one);
    const double secs = since(t0);
    const bool ok = agree == 50 && infinite > 0 && m1 < m0 && secs <= 600.0;
    report(6, "evidence maximizer and one-step correction", ok,
           "grid argmax agrees on " + std::to_string(agree) + "/50 (" + std::to_string(infinite) +
               " in the infinite regime); median |log(beta/beta_exact)| " + fmt("%.4f", m0) + " -> " +
               fmt("%.4f", m1) + " after one step over 30 replicates; " + fmt("%.1fs (limit 600s)", secs));
}

// ---- 7 ---------------------------------------------------------------------------

void pcg_refinement() {
    bool ok = true;
    std::ostringstream d;
    for (bool correlated : {false, true}) {
        PcgExperimentConfig cfg;
        cfg.correlated = correlated;
        const auto r = run_pcg_experiment(cfg);
        int first = -1;
        for (std::size_t k = 0; k < r.heldout_by_iteration.size(); ++k) {
            if (std::abs(r.heldout_by_iteration[k] - r.heldout_map) <= 0.01 * std::abs(r.heldout_map)) {
                first = static_cast<int>(k);
                break;
            }
        }
        ok = ok && first >= 0 && r.relative_gap <= 0.01;
        d << (correlated ? "correlated" : "white") << ": gap at start "
          << fmt("%.4f", std::abs(r.heldout_by_iteration.front() - r.heldout_map) / std::abs(r.heldout_map))
          << ", after " << cfg.budget << " iterations " << fmt("%.2e", r.relative_gap) << ", within 1% from iteration "
          << first << "; ";
    }
    report(7, "EL-preconditioned PCG held-out likelihood", ok, d.str());
}

// ---- 8 ---------------------------------------------------------------------------

void sampling_comparison() {
    const auto t0 = Clock::now();
    const PosteriorComparisonConfig cfg;
    const auto r = run_posterior_comparison(cfg);
    const double secs = since(t0);
    const bool ok = r.interval_overlap >= 0.9 && r.profile_match >= 0.9 &&
                    r.surrogate_acceptance < r.exact_reference_acceptance && secs <= 1200.0;
    report(8, "posterior sampling", ok,
           fmt("interval overlap %.2f (>= 0.90)", r.interval_overlap) +
               fmt(", EL median inside exact interval %.2f", r.median_inside) +
               fmt(", profile-Gaussian vs EL-HMC within 3 se %.2f (>= 0.90)", r.profile_match) +
               fmt(", acceptance surrogate %.3f", r.surrogate_acceptance) +
               fmt(" < exact %.3f", r.exact_reference_acceptance) + fmt("; %.1fs (limit 1200s)", secs));
}

// ---- 9 ---------------------------------------------------------------------------

void population_pipeline() {
    PopulationExperimentConfig cfg;
    cfg.population.neurons = 20;
    const auto r = run_population_experiment(cfg);
    const double rel = std::abs(r.staged_test_loglik - r.full_test_loglik) / std::abs(r.full_test_loglik);

    PopulationExperimentConfig big = cfg;
    big.population.neurons = 40;
    big.run_full_map = false;
    PopulationExperimentConfig small = cfg;
    small.run_full_map = false;
    // best of two timings each, to damp scheduler noise
    double t20 = r.stage12_seconds, t40 = std::numeric_limits<double>::infinity();
    t20 = std::min(t20, run_population_experiment(small).stage12_seconds);
    for (int k = 0; k < 2; ++k) t40 = std::min(t40, run_population_experiment(big).stage12_seconds);
    const double ratio = t40 / t20;
    const bool ok = r.auc_best >= 0.9 && rel <= 0.02 && ratio <= 2.5;
    report(9, "staged population fit", ok,
           fmt("best path ROC-AUC %.3f (>= 0.9)", r.auc_best) + fmt(", entry-order AUC %.3f", r.auc_entry) +
               fmt("; test log-likelihood staged %.2f", r.staged_test_loglik) +
               fmt(" vs full MAP %.2f", r.full_test_loglik) + fmt(", relative %.4f (<= 0.02)", rel) +
               fmt("; stage 1-2 time M=20 %.3fs", t20) + fmt(", M=40 %.3fs", t40) + fmt(", ratio %.2f (<= 2.5)", ratio));
}

// ---- 10 --------------------------------------------------------------------------

void evaluation_cost() {
    const auto pts = time_loglik({1000, 1000000}, 20, 7, 10010);
    const double el_ratio = pts[1].el_seconds / pts[0].el_seconds;
    const double exact_ratio = pts[1].exact_seconds / pts[0].exact_seconds;
    report(10, "EL evaluation cost independent of N", el_ratio <= 1.2 && exact_ratio >= 100.0,
           fmt("el ratio %.3f (<= 1.2)", el_ratio) + fmt(", exact ratio %.1f (>= 100)", exact_ratio) +
               fmt("; per call el %.2e s", pts[1].el_seconds) + fmt(", exact %.2e s at N=1e6", pts[1].exact_seconds));
}

// ---- informational ---------------------------------------------------------------

void optimized_ridge_gap() {
    double worst = 0.0;
    std::ostringstream d;
    int within = 0, total = 0;
    for (double snr : {0.2, 1.0, 5.0}) {
        for (double rho = 0.1; rho <= 3.0 + 1e-9; rho += 0.1) {
            const auto map = optimal_ridge(EstimatorKind::Map, rho, snr);
            const auto mpele = optimal_ridge(EstimatorKind::Mpele, rho, snr);
            const double gap = (mpele.mse - map.mse) / map.mse;
            worst = std::max(worst, gap);
            ++total;
            if (gap <= 0.10) ++within;
        }
    }
    std::printf("[INFO] optimized MAP vs MPELE asymptotic MSE: gap <= 10%% at %d/%d grid points, worst %.3f\n", within,
                total, worst);
}

void run(int id, const std::function<void()>& f, const char* name) {
    try {
        f();
    } catch (const std::exception& e) {
        report(id, name, false, std::string("threw: ") + e.what());
    }
}

} // namespace

int main() {
    const auto t0 = Clock::now();
    run(1, risk_vs_monte_carlo, "risk formulas vs Monte Carlo");
    run(2, asymptotic_limits, "MELE finite-N vs limit at N=100");
    run(3, crossover_location, "MELE/MLE crossover");
    run(4, closed_form_estimators, "closed-form MELE/MPELE vs numeric EL maximization");
    run(5, l1_correctness, "L1 subgradient conditions and brute force");
    run(6, evidence_and_rhat, "evidence maximizer and one-step correction");
    run(7, pcg_refinement, "EL-preconditioned PCG held-out likelihood");
    run(8, sampling_comparison, "posterior sampling");
    run(9, population_pipeline, "staged population fit");
    run(10, evaluation_cost, "EL evaluation cost independent of N");
    std::printf("[N/A] criterion 11 recorded real-data values: no recordings available; pipelines run on simulated "
                "data under criteria 7-9\n");
    optimized_ridge_gap();
    std::printf("acceptance run complete: %d failing criteria, %.1fs\n", failures, since(t0));
    return 0;
}
