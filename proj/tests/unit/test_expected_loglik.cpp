#include "helpers.hpp"

#include "elglm/error.hpp"
#include "elglm/expected_loglik.hpp"
#include "elglm/simulate.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <doctest.h>

#include <cmath>

using namespace elglm;

namespace {

GlmParams params(VectorXd theta, double offset = 0.0) { return {std::move(theta), offset}; }

// central differences of el_loglik over the stacked parameters
void check_el_gradient(const ExpectationEngine& engine, const SufficientStats& stats, const GlmParams& at) {
    const auto eval = el_loglik(engine, stats, at);
    const VectorXd z = at.stacked();
    for (Index k = 0; k < z.size(); ++k) {
        VectorXd zp = z, zm = z;
        const double h = 1e-5;
        zp[k] += h;
        zm[k] -= h;
        const double fd = (el_loglik(engine, stats, GlmParams::from_stacked(zp)).value -
                           el_loglik(engine, stats, GlmParams::from_stacked(zm)).value) /
                          (2 * h);
        CHECK(eval.gradient[k] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
    // Hessian columns by differencing the gradient
    const MatrixXd h = eval.hessian.to_dense();
    for (Index k = 0; k < z.size(); ++k) {
        VectorXd zp = z, zm = z;
        zp[k] += 1e-5;
        zm[k] -= 1e-5;
        const VectorXd col = (el_loglik(engine, stats, GlmParams::from_stacked(zp)).gradient -
                              el_loglik(engine, stats, GlmParams::from_stacked(zm)).gradient) /
                             2e-5;
        CHECK(testutil::max_abs_diff(col, h.col(k)) <= 1e-5 * std::max(1.0, h.cwiseAbs().maxCoeff()));
    }
    const VectorXd v = VectorXd::LinSpaced(z.size(), -1.0, 1.0);
    CHECK(testutil::max_abs_diff(eval.hessian.apply(v), h * v) < 1e-9 * std::max(1.0, h.cwiseAbs().maxCoeff()));
}

SufficientStats fake_stats(Index p, std::mt19937_64& rng, double total = 40.0, Index count = 200) {
    return {testutil::random_vector(p, rng, 3.0), total, count};
}

} // namespace

TEST_CASE("expected_g examples") {
    const auto fam = CanonicalFamily::poisson();
    const auto exp_engine = ExpectationEngine::analytic_exponential(fam, StructuredMatrix::identity(3));
    CHECK(expected_g(exp_engine, params(VectorXd::Zero(3))).value == 1.0);
    const auto quad = ExpectationEngine::analytic_quadratic(CanonicalFamily::gaussian(), StructuredMatrix::identity(2));
    CHECK(expected_g(quad, params(Eigen::Vector2d(2, 0))).value == doctest::Approx(2.0));
    // offset enters the quadratic engine as offset^2 / 2
    CHECK(expected_g(quad, params(Eigen::Vector2d(2, 0), 1.0)).value == doctest::Approx(2.5));
}

TEST_CASE("CLT engine reproduces the lognormal mean") {
    const auto fam = CanonicalFamily::poisson();
    const auto clt = build_clt_engine(StimulusMoments::centered(StructuredMatrix::identity(1)), fam, 50);
    const double value = expected_g(clt, params(VectorXd::Ones(1))).value;
    // Monte Carlo oracle of E[exp(q)], q ~ N(0, 1)
    std::mt19937_64 rng(21);
    std::normal_distribution<double> z;
    const int draws = 4000000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double e = std::exp(z(rng));
        s += e;
        s2 += e * e;
    }
    const double mean = s / draws;
    const double se = std::sqrt((s2 / draws - mean * mean) / draws);
    CHECK(std::abs(value - mean) <= 4.0 * se);
    CHECK(value == doctest::Approx(std::exp(0.5)).epsilon(1e-10));
    CHECK_THROWS_AS((void)build_clt_engine(StimulusMoments::centered(StructuredMatrix::identity(1)), fam, 1),
                    DomainError);
}

TEST_CASE("CLT engine equals the analytic engine on Gaussian stimuli") {
    std::mt19937_64 rng(22);
    const auto cov = StructuredMatrix::dense(testutil::random_spd(6, rng));
    const auto fam = CanonicalFamily::poisson(0.5);
    const auto exact = ExpectationEngine::analytic_exponential(fam, cov);
    const auto clt = build_clt_engine(StimulusMoments::centered(cov), fam, 50);
    for (int t = 0; t < 10; ++t) {
        const GlmParams at = params(testutil::random_vector(6, rng, 0.4), -0.3);
        const auto a = expected_g(exact, at), b = expected_g(clt, at);
        CHECK(std::abs(a.value - b.value) <= 1e-8 * a.value);
        CHECK(testutil::max_abs_diff(a.gradient, b.gradient) <= 1e-8 * a.value);
    }
}

TEST_CASE("CLT is accurate for binary stimuli with smooth filters") {
    const Index p = 600, rows = 20000;
    const auto spec = StimulusSpec::binary_iid(rows, p, 0.36);
    const GeneratedStimuli stim = gen_stimuli(spec, 23);
    const auto fam = CanonicalFamily::poisson();
    const auto clt = build_clt_engine(spec.moments(), fam, 50);
    std::mt19937_64 rng(24);
    const int filters = 200;
    MatrixXd thetas(p, filters);
    for (int k = 0; k < filters; ++k) thetas.col(k) = random_bump_filter(p, rng, 0.5);
    const MatrixXd q = stim.design * thetas;
    int good = 0;
    for (int k = 0; k < filters; ++k) {
        const double brute = q.col(k).array().exp().mean();
        const double approx = expected_g(clt, params(thetas.col(k))).value;
        if (std::abs(approx - brute) <= 0.05 * brute) ++good;
    }
    CHECK(good >= 190);
}

TEST_CASE("analytic engines depend on theta only through theta^T C theta") {
    std::mt19937_64 rng(25);
    const MatrixXd c = testutil::random_spd(5, rng);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(c);
    const MatrixXd half = eig.operatorSqrt();
    const MatrixXd half_inv = eig.operatorInverseSqrt();
    const Eigen::HouseholderQR<MatrixXd> qr(testutil::random_matrix(5, 5, rng));
    const MatrixXd o = qr.householderQ();
    const auto cov = StructuredMatrix::dense(c);
    const auto e1 = ExpectationEngine::analytic_exponential(CanonicalFamily::poisson(), cov);
    const auto e2 = ExpectationEngine::analytic_quadratic(CanonicalFamily::gaussian(), cov);
    for (int t = 0; t < 5; ++t) {
        const VectorXd theta = testutil::random_vector(5, rng, 0.5);
        const VectorXd rotated = half_inv * o * half * theta;
        CHECK(theta.dot(c * theta) == doctest::Approx(rotated.dot(c * rotated)).epsilon(1e-12));
        CHECK(expected_g(e1, params(theta)).value == doctest::Approx(expected_g(e1, params(rotated)).value).epsilon(1e-12));
        CHECK(expected_g(e2, params(theta)).value == doctest::Approx(expected_g(e2, params(rotated)).value).epsilon(1e-12));
    }
}

TEST_CASE("el_loglik examples") {
    const SufficientStats stats{VectorXd::Zero(3), 12.0, 100};
    const auto e = ExpectationEngine::analytic_exponential(CanonicalFamily::poisson(1.0), StructuredMatrix::identity(3));
    CHECK(el_loglik(e, stats, params(VectorXd::Zero(3))).value == doctest::Approx(-100.0));

    std::mt19937_64 rng(26);
    const MatrixXd c = testutil::random_spd(4, rng);
    const auto q = ExpectationEngine::analytic_quadratic(CanonicalFamily::gaussian(), StructuredMatrix::dense(c));
    const SufficientStats s2 = fake_stats(4, rng, 3.0, 50);
    for (int t = 0; t < 3; ++t) {
        const MatrixXd h = el_loglik(q, s2, params(testutil::random_vector(4, rng), 0.7)).hessian.to_dense();
        CHECK(testutil::max_abs_diff(h.bottomRightCorner(4, 4), -50.0 * c) < 1e-10);
        CHECK(h(0, 0) == doctest::Approx(-50.0));
        CHECK(h.col(0).tail(4).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("el_loglik tracks the exact log-likelihood by the law of large numbers") {
    const Index n = 100000, p = 100;
    std::mt19937_64 rng(27);
    const MatrixXd x = testutil::random_matrix(n, p, rng);
    VectorXd theta = testutil::random_vector(p, rng);
    theta.normalize();
    const auto fam = CanonicalFamily::poisson();
    const GlmParams at = params(theta, -1.0);
    const GlmDataset data(x, simulate_responses(fam, x, at, 28));
    const auto engine = ExpectationEngine::analytic_exponential(fam, StructuredMatrix::identity(p));
    const double el = el_loglik(engine, data, at).value;
    const double ex = exact_loglik_value(fam, data, at);
    const VectorXd g = (x * theta).array() - 1.0;
    const VectorXd gv = g.array().exp();
    const double sd = std::sqrt((gv.array() - gv.mean()).square().sum() / (n - 1));
    const double stderr_ = sd / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(el - ex) / n <= 3.0 * stderr_);
}

TEST_CASE("el_loglik derivatives match finite differences for every engine") {
    std::mt19937_64 rng(29);
    const Index p = 5;
    const auto cov = StructuredMatrix::dense(testutil::random_spd(p, rng));
    const auto stats = fake_stats(p, rng);
    const GlmParams at = params(testutil::random_vector(p, rng, 0.3), -0.2);
    SUBCASE("quadratic") {
        check_el_gradient(ExpectationEngine::analytic_quadratic(CanonicalFamily::gaussian(2.0), cov), stats, at);
    }
    SUBCASE("exponential") {
        check_el_gradient(ExpectationEngine::analytic_exponential(CanonicalFamily::poisson(0.5), cov), stats, at);
    }
    SUBCASE("clt with a mean") {
        StimulusMoments m{testutil::random_vector(p, rng, 0.2), std::make_shared<StructuredMatrix>(cov)};
        check_el_gradient(build_clt_engine(m, CanonicalFamily::bernoulli(), 40), stats, at);
        check_el_gradient(build_clt_engine(m, CanonicalFamily::poisson(), 40), stats, at);
    }
    SUBCASE("elliptic") {
        const auto grid = default_elliptic_grid(8.0);
        check_el_gradient(ExpectationEngine::elliptic(
                              cov, build_elliptic_table(CanonicalFamily::gaussian(), RadialLaw::student_t(7.0), grid)),
                          stats, at);
        check_el_gradient(ExpectationEngine::elliptic(
                              cov, build_elliptic_table(CanonicalFamily::poisson(), RadialLaw::gaussian(), grid)),
                          stats, at);
        GlmParams zero_offset = at;
        zero_offset.offset = 0.0;
        const auto logistic = ExpectationEngine::elliptic(
            cov, build_elliptic_table(CanonicalFamily::bernoulli(), RadialLaw::gaussian(), grid));
        const auto eval = el_loglik(logistic, stats, zero_offset);
        for (Index k = 1; k <= p; ++k) {
            VectorXd zp = zero_offset.stacked(), zm = zp;
            zp[k] += 1e-5;
            zm[k] -= 1e-5;
            const double fd = (el_loglik(logistic, stats, GlmParams::from_stacked(zp)).value -
                               el_loglik(logistic, stats, GlmParams::from_stacked(zm)).value) /
                              2e-5;
            CHECK(eval.gradient[k] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
        }
    }
}

TEST_CASE("elliptic table values") {
    const auto grid = default_elliptic_grid(6.0);
    const auto pois = build_elliptic_table(CanonicalFamily::poisson(), RadialLaw::gaussian(), grid);
    for (double v : {0.0, 1e-6, 0.01, 0.3, 1.0, 4.0, 20.0, 35.0}) {
        CHECK(pois.at_squared_radius(v).value == doctest::Approx(std::exp(v / 2)).epsilon(1e-6));
    }
    for (const auto& fam : {CanonicalFamily::gaussian(), CanonicalFamily::poisson(), CanonicalFamily::bernoulli()}) {
        const auto law = fam.kind() == FamilyKind::Poisson ? RadialLaw::gaussian() : RadialLaw::student_t(5.0);
        const auto t = build_elliptic_table(fam, law, grid);
        CHECK(t.at_squared_radius(0.0).value == doctest::Approx(nonlinearity_eval(fam, 0.0).value).epsilon(1e-12));
    }
    CHECK_THROWS_AS((void)pois.at_squared_radius(37.0), DomainError);
    CHECK_THROWS_AS((void)build_elliptic_table(CanonicalFamily::gaussian(), RadialLaw::student_t(1.5), grid),
                    DomainError);
    // exp has no finite mean under heavy tails
    CHECK_THROWS_AS((void)build_elliptic_table(CanonicalFamily::poisson(), RadialLaw::student_t(5.0), grid),
                    DomainError);
}

TEST_CASE("Student-t elliptic table against Monte Carlo") {
    // unit-variance t(5): y = t * sqrt(3/5)
    const auto grid = default_elliptic_grid(3.0);
    const auto t5 = build_elliptic_table(CanonicalFamily::gaussian(), RadialLaw::student_t(5.0), grid);
    std::mt19937_64 rng(30);
    std::student_t_distribution<double> td(5.0);
    const int draws = 1000000;
    std::vector<double> y(draws);
    for (auto& v : y) v = td(rng) * std::sqrt(3.0 / 5.0);
    for (double s : {0.5, 1.0, 2.5}) {
        double m = 0.0, m2 = 0.0;
        for (double v : y) {
            const double g = 0.5 * (s * v) * (s * v);
            m += g;
            m2 += g * g;
        }
        m /= draws;
        const double se = std::sqrt((m2 / draws - m * m) / draws);
        const double table = t5.at_squared_radius(s * s).value;
        CHECK(std::abs(table - m) <= 4.0 * se);
        CHECK(table == doctest::Approx(0.5 * s * s).epsilon(1e-6));
    }
    // Poisson G with a density-given law equals the closed Gaussian MGF
    const auto dens = build_elliptic_table(
        CanonicalFamily::poisson(), RadialLaw::density([](double u) { return std::exp(-0.5 * u * u) / std::sqrt(2 * M_PI); }),
        grid);
    CHECK(dens.at_squared_radius(4.0).value == doctest::Approx(std::exp(2.0)).epsilon(1e-6));
}

TEST_CASE("analytic engines reject mean-shifted stimuli") {
    StimulusMoments m{VectorXd::Ones(3), std::make_shared<StructuredMatrix>(StructuredMatrix::identity(3))};
    CHECK_THROWS_AS((void)ExpectationEngine::analytic(CanonicalFamily::poisson(), m), DomainError);
    m.mean.setZero();
    CHECK(ExpectationEngine::analytic(CanonicalFamily::poisson(), m).variant() == EngineVariant::AnalyticExponential);
    CHECK(ExpectationEngine::analytic(CanonicalFamily::gaussian(), m).variant() == EngineVariant::AnalyticQuadratic);
}
