#include "helpers.hpp"

#include "elglm/error.hpp"
#include "elglm/model_selection.hpp"
#include "elglm/protocols.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace elglm;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// probabilists' Gauss-Hermite nodes/weights via the Jacobi matrix
void hermite_rule(int n, VectorXd& nodes, VectorXd& weights) {
    MatrixXd j = MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(static_cast<double>(k));
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(j);
    nodes = eig.eigenvalues();
    weights = eig.eigenvectors().row(0).array().square();
}

std::vector<double> log_grid(double lo, double hi, int count) {
    std::vector<double> out(count);
    for (int k = 0; k < count; ++k) out[k] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * k / (count - 1));
    return out;
}

GlmDataset gaussian_data(Index n, Index p, double theta_sd, std::mt19937_64& rng) {
    MatrixXd x = testutil::random_matrix(n, p, rng);
    VectorXd r = simulate_responses(CanonicalFamily::gaussian(), x, {testutil::random_vector(p, rng, theta_sd), 0.0}, rng());
    return {std::move(x), std::move(r)};
}

} // namespace

TEST_CASE("rhat examples") {
    CHECK(is_infinite_ridge(rhat_analytic(500.0, 100.0, 10)));
    CHECK(rhat_analytic(5000.0, 100.0, 10) == doctest::Approx(25.0).epsilon(1e-14));
    // argmax by grid over [1e-3, 1e6]
    const auto grid = log_grid(1e-3, 1e6, 20001);
    double best = -kInf, arg = 0.0;
    for (double b : grid) {
        const double v = el_log_evidence_scalar(b, 5000.0, 100.0, 10);
        if (v > best) {
            best = v;
            arg = b;
        }
    }
    const double step = std::log(1e9) / 20000;
    CHECK(std::abs(std::log(arg / 25.0)) <= step);
    CHECK(el_log_evidence_scalar(kInf, 5000.0, 100.0, 10) == 0.0);
    CHECK_THROWS_AS((void)rhat_analytic(-1.0, 100.0, 10), DomainError);
}

TEST_CASE("shared-basis rhat") {
    const VectorXd d = Eigen::Vector3d(1.0, 2.0, 0.5);
    const double ns = 36.0;
    VectorXd proj(3);
    proj << 6.0, 30.0, 1.0; // first: q^2 == d N_s exactly
    const VectorXd r = rhat_shared_basis(proj, d, ns);
    CHECK(is_infinite_ridge(r[0]));
    CHECK(r[1] == doctest::Approx(72.0 * 72.0 / (900.0 - 72.0)));
    CHECK(is_infinite_ridge(r[2]));
    // equal eigenvalues: the scalar rule applied per direction
    CHECK(rhat_shared_basis(VectorXd::Constant(1, 30.0), VectorXd::Ones(1), ns)[0] ==
          doctest::Approx(rhat_analytic(900.0, ns, 1)));
}

TEST_CASE("rhat maximizes log F against a 10^4-point grid") {
    std::mt19937_64 rng(51);
    std::uniform_int_distribution<int> dim(1, 300);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto grid = log_grid(1e-4, 1e8, 10000);
    const double step = std::log(1e12) / 9999;
    int infinite = 0;
    for (int t = 0; t < 60; ++t) {
        const Index p = dim(rng);
        const double ns = std::exp(std::log(10.0) + u(rng) * std::log(1e4));
        // q / N_s spread around p so both regimes appear
        const double q = p * ns * std::exp(-1.0 + 3.0 * u(rng));
        const double beta = rhat_analytic(q, ns, p);
        std::vector<double> values(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k) values[k] = el_log_evidence_scalar(grid[k], q, ns, p);
        if (is_infinite_ridge(beta)) {
            ++infinite;
            for (std::size_t k = grid.size() / 2 + 1; k < grid.size(); ++k) CHECK(values[k] >= values[k - 1]);
            continue;
        }
        const double at = el_log_evidence_scalar(beta, q, ns, p);
        const std::size_t top = std::max_element(values.begin(), values.end()) - values.begin();
        CHECK(values[top] <= at + 1e-12 * std::max(1.0, std::abs(at)));
        if (beta > grid.front() && beta < grid.back()) CHECK(std::abs(std::log(grid[top] / beta)) <= step);
    }
    CHECK(infinite > 0);
    CHECK(infinite < 60);
}

TEST_CASE("Gaussian evidence") {
    SUBCASE("2x2 by hand") {
        const GlmDataset d(MatrixXd::Identity(2, 2), Eigen::Vector2d(1.0, 2.0));
        const auto e = gaussian_evidence(d, 1.0, StructuredMatrix::identity(2), EvidenceMode::Exact);
        // A = 2 I, b = r: -1/2 log 4 + r^T r / 4
        CHECK(e.log_evidence == doctest::Approx(-std::log(2.0) + 1.25).epsilon(1e-12));
        CHECK(e.q == 5.0);
    }
    SUBCASE("exact equals EL when X^T X = N C") {
        std::mt19937_64 rng(52);
        const GlmDataset d = gaussian_data(50, 6, 0.5, rng);
        const auto c = StructuredMatrix::dense(d.design().transpose() * d.design() / 50.0);
        const auto ridge = StructuredMatrix::scaled_identity(6, 2.0);
        const double a = gaussian_evidence(d, 0.7, ridge, EvidenceMode::Exact).log_evidence;
        const double b = gaussian_evidence(d, 0.7, ridge, EvidenceMode::El, &c).log_evidence;
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
    SUBCASE("law of large numbers") {
        // single draws scatter around 1%; the median over instances is the stable quantity
        std::mt19937_64 rng(53);
        const auto eye = StructuredMatrix::identity(10);
        std::vector<double> rel;
        for (int t = 0; t < 21; ++t) {
            const GlmDataset d = gaussian_data(10000, 10, 0.5, rng);
            const double a = gaussian_evidence(d, 1.0, eye, EvidenceMode::Exact).log_evidence;
            const double b = gaussian_evidence(d, 1.0, eye, EvidenceMode::El, &eye).log_evidence;
            rel.push_back(std::abs(a - b) / std::abs(a));
        }
        std::nth_element(rel.begin(), rel.begin() + 10, rel.end());
        CHECK(rel[10] <= 0.02);
    }
    const GlmDataset d(MatrixXd::Identity(2, 2), Eigen::Vector2d(1.0, 2.0));
    CHECK_THROWS_AS((void)gaussian_evidence(d, 1.0, StructuredMatrix::identity(2), EvidenceMode::El), DomainError);
    CHECK_THROWS_AS((void)gaussian_evidence(d, 0.0, StructuredMatrix::identity(2), EvidenceMode::Exact), DomainError);
}

TEST_CASE("Laplace evidence is exact for the Gaussian family") {
    std::mt19937_64 rng(54);
    const GlmDataset d = gaussian_data(80, 7, 0.5, rng);
    const auto fam = CanonicalFamily::gaussian(1.5);
    for (double beta : {0.1, 3.0, 50.0}) {
        const auto ridge = StructuredMatrix::scaled_identity(7, beta);
        FitOptions opt;
        opt.fit_offset = false;
        const auto fit = fit_exact(fam, d, Penalty::ridge_only(ridge), {VectorXd::Zero(7), 0.0}, FitMethod::Newton, opt);
        const double lap = laplace_evidence(fam, d, ridge, fit.params, EvidenceMode::Exact, nullptr, false).log_evidence;
        const double gauss = gaussian_evidence(d, 1.5, ridge, EvidenceMode::Exact).log_evidence;
        CHECK(lap == doctest::Approx(gauss).epsilon(1e-10));
    }
}

TEST_CASE("EL-mode Laplace reduces to the closed-form scalar evidence") {
    std::mt19937_64 rng(55);
    const Index p = 20, n = 3000;
    MatrixXd x = testutil::random_matrix(n, p, rng);
    VectorXd r = simulate_responses(CanonicalFamily::poisson(), x, {testutil::random_vector(p, rng, 0.2), -1.0}, rng());
    const GlmDataset d(std::move(x), std::move(r));
    const auto fam = CanonicalFamily::poisson();
    const auto eye = StructuredMatrix::identity(p);
    const auto engine = ExpectationEngine::analytic_exponential(fam, eye);
    const double q = d.stats().xtr.squaredNorm();
    const double ns = d.stats().response_total;
    std::vector<double> diffs;
    for (double beta : {0.01, 1.0, 30.0, 800.0, 1e5}) {
        const auto ridge = StructuredMatrix::scaled_identity(p, beta);
        const auto mode = mpele_lnp(d.stats(), eye, &ridge);
        const double lap = laplace_evidence(fam, d, ridge, mode.params, EvidenceMode::El, &engine).log_evidence;
        diffs.push_back(lap - el_log_evidence_scalar(beta, q, ns, p));
    }
    // constant part: N_s log(N_s / N) - N_s - 1/2 log N_s
    const double constant = ns * std::log(ns / n) - ns - 0.5 * std::log(ns);
    for (double v : diffs) CHECK(v == doctest::Approx(constant).epsilon(1e-12).scale(1.0));
}

TEST_CASE("Poisson Laplace evidence against tensor Gauss-Hermite quadrature") {
    std::mt19937_64 rng(56);
    const Index p = 5, n = 150;
    const auto fam = CanonicalFamily::poisson();
    MatrixXd x = testutil::random_matrix(n, p, rng);
    VectorXd r = simulate_responses(fam, x, {testutil::random_vector(p, rng, 0.3), 0.0}, rng());
    const GlmDataset d(std::move(x), std::move(r));
    const auto ridge = StructuredMatrix::scaled_identity(p, 2.0);
    FitOptions opt;
    opt.fit_offset = false;
    const auto fit = fit_exact(fam, d, Penalty::ridge_only(ridge), {VectorXd::Zero(p), 0.0}, FitMethod::Newton, opt);
    const double lap = laplace_evidence(fam, d, ridge, fit.params, EvidenceMode::Exact, nullptr, false).log_evidence;

    // integrand exp(L(theta) - theta^T R theta / 2) |R|^{1/2} (2 pi)^{-p/2}, in whitened coordinates
    MatrixXd neg_h = -exact_loglik(fam, d, fit.params).hessian.to_dense().bottomRightCorner(p, p);
    neg_h.diagonal().array() += 2.0;
    const MatrixXd s = Eigen::LLT<MatrixXd>(neg_h).matrixU().solve(MatrixXd::Identity(p, p));
    const double log_det_s = s.diagonal().array().abs().log().sum();
    VectorXd nodes, weights;
    const int order = 12;
    hermite_rule(order, nodes, weights);
    std::vector<double> logs;
    std::vector<int> idx(p, 0);
    while (true) {
        VectorXd y(p);
        double log_w = 0.0;
        for (Index j = 0; j < p; ++j) {
            y[j] = nodes[idx[j]];
            log_w += std::log(weights[idx[j]]);
        }
        GlmParams at = fit.params;
        at.theta += s * y;
        const double g = exact_loglik_value(fam, d, at) - at.theta.squaredNorm();
        logs.push_back(log_w + g + 0.5 * y.squaredNorm());
        Index j = 0;
        while (j < p && ++idx[j] == order) idx[j++] = 0;
        if (j == p) break;
    }
    const double top = *std::max_element(logs.begin(), logs.end());
    double sum = 0.0;
    for (double v : logs) sum += std::exp(v - top);
    // + 1/2 log|R| - p/2 log(2 pi) + log|S| + p/2 log(2 pi)
    const double oracle = top + std::log(sum) + 0.5 * p * std::log(2.0) + log_det_s;
    CHECK(std::abs(lap - oracle) <= 0.5);
}

TEST_CASE("fixed point") {
    std::mt19937_64 rng(57);
    const auto fam = CanonicalFamily::gaussian();
    const GlmDataset d = gaussian_data(300, 10, 0.4, rng);
    SUBCASE("started at its own limit it stops at once") {
        const auto run = rhat_fixed_point(fam, d, 1.0, 500, 1e-12);
        REQUIRE(run.converged);
        const double star = run.steps.back().beta;
        const auto again = rhat_fixed_point(fam, d, star, 50, 1e-4);
        CHECK(again.converged);
        CHECK(again.steps.size() == 2);
    }
    SUBCASE("from 1e8 it decreases toward the evidence optimum") {
        const auto run = rhat_fixed_point(fam, d, 1e8, 500, 1e-6);
        REQUIRE(run.converged);
        for (std::size_t k = 1; k < run.steps.size(); ++k) CHECK(run.steps[k].beta <= run.steps[k - 1].beta);
        double best = -kInf, arg = 0.0;
        GlmParams warm{VectorXd::Zero(10), 0.0};
        for (double b : log_grid(1e-3, 1e4, 1401)) {
            const auto fit = ridge_map_fit(fam, d, b, &warm);
            warm = fit.params;
            const double v = laplace_evidence(fam, d, StructuredMatrix::scaled_identity(10, b), fit.params,
                                              EvidenceMode::Exact)
                                 .log_evidence;
            if (v > best) {
                best = v;
                arg = b;
            }
        }
        CHECK(std::abs(run.steps.back().beta / arg - 1.0) <= 0.05);
        const auto golden = maximize_laplace_evidence(fam, d, std::log(1e-3), std::log(1e4), 1e-5);
        CHECK(std::abs(golden.beta / arg - 1.0) <= 0.05);
    }
    SUBCASE("zero MAP filter means an infinite ridge") {
        const GlmDataset zero(d.design(), VectorXd::Zero(300));
        CHECK_THROWS_AS((void)rhat_fixed_point(fam, zero, 1.0, 5), DomainError);
        const auto inf = ridge_map_fit(fam, d, kInf);
        CHECK(inf.params.theta.isZero());
        CHECK(inf.params.offset == doctest::Approx(d.responses().mean()));
    }
}

TEST_CASE("evidence is invariant to row order") {
    std::mt19937_64 rng(58);
    const Index n = 200, p = 6;
    const auto fam = CanonicalFamily::poisson();
    MatrixXd x = testutil::random_matrix(n, p, rng);
    VectorXd r = simulate_responses(fam, x, {testutil::random_vector(p, rng, 0.3), -0.5}, rng());
    std::vector<Index> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    MatrixXd xp(n, p);
    VectorXd rp(n);
    for (Index k = 0; k < n; ++k) {
        xp.row(k) = x.row(perm[k]);
        rp[k] = r[perm[k]];
    }
    const GlmDataset a(x, r), b(xp, rp);
    const auto ridge = StructuredMatrix::scaled_identity(p, 1.5);
    const auto fa = ridge_map_fit(fam, a, 1.5);
    const auto fb = ridge_map_fit(fam, b, 1.5);
    const double la = laplace_evidence(fam, a, ridge, fa.params, EvidenceMode::Exact).log_evidence;
    const double lb = laplace_evidence(fam, b, ridge, fb.params, EvidenceMode::Exact).log_evidence;
    CHECK(la == doctest::Approx(lb).epsilon(1e-10));
    const double ga = gaussian_evidence(a, 1.0, ridge, EvidenceMode::Exact).log_evidence;
    const double gb = gaussian_evidence(b, 1.0, ridge, EvidenceMode::Exact).log_evidence;
    CHECK(ga == doctest::Approx(gb).epsilon(1e-10));
}

TEST_CASE("ridge selection protocol: EL bias and one-step correction") {
    RidgeSelectionConfig cfg;
    cfg.dim = 100;
    cfg.samples = 400;
    cfg.replicates = 30;
    cfg.seed = 59;
    const auto reps = run_ridge_selection(cfg);
    REQUIRE(reps.size() == 30);
    int below = 0;
    std::vector<double> zero_step, one_step;
    for (const auto& r : reps) {
        CHECK(r.exact_converged);
        if (r.beta_el < r.beta_exact) ++below;
        zero_step.push_back(std::abs(std::log(r.beta_el / r.beta_exact)));
        one_step.push_back(std::abs(std::log(r.beta_onestep / r.beta_exact)));
    }
    // one-sided sign test at 5%: at least 20 of 30
    CHECK(below >= 20);
    std::nth_element(zero_step.begin(), zero_step.begin() + 15, zero_step.end());
    std::nth_element(one_step.begin(), one_step.begin() + 15, one_step.end());
    CHECK(one_step[15] < zero_step[15]);
}
