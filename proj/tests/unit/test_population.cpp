#include "helpers.hpp"

#include "elglm/error.hpp"
#include "elglm/population.hpp"
#include "elglm/simulate.hpp"

#include <doctest.h>

#include <cmath>

using namespace elglm;

namespace {

PopulationDataset random_population(Index bins, Index neurons, Index p, std::mt19937_64& rng, double rate = 0.3) {
    PopulationDataset d;
    d.stimulus = testutil::random_matrix(bins, p, rng);
    d.spikes.resize(bins, neurons);
    std::poisson_distribution<int> pois(rate);
    for (Index n = 0; n < bins; ++n)
        for (Index m = 0; m < neurons; ++m) d.spikes(n, m) = pois(rng);
    return d;
}

CoupledFilterSet random_filters(Index m, Index p, int k, std::mt19937_64& rng) {
    CoupledFilterSet f;
    f.offsets = testutil::random_vector(m, rng, 0.2).array() - 1.5;
    f.stimulus = testutil::random_matrix(p, m, rng, 0.2);
    f.gains = VectorXd::Constant(m, 1.0) + testutil::random_vector(m, rng, 0.1);
    f.self_history = testutil::random_matrix(k, m, rng, 0.3);
    f.coupling.resize(m, m);
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < m; ++j)
            if (i != j && (i + j) % 3 == 0) f.coupling.insert(i, j) = 0.2 * ((i + 2 * j) % 2 ? 1.0 : -1.0);
    f.coupling.makeCompressed();
    return f;
}

} // namespace

TEST_CASE("history basis shapes") {
    HistoryBasis b;
    const MatrixXd s = b.self_basis();
    CHECK(s.rows() == b.max_lag);
    CHECK(s.cols() == 5);
    CHECK(s(0, 0) == -1.0);
    CHECK(s.col(0).tail(b.max_lag - 1).isZero());
    CHECK(s(0, 1) == doctest::Approx(1.0));
    CHECK(b.coupling_kernel()[0] == doctest::Approx(std::exp(-0.5)));
    HistoryBasis bad;
    bad.coupling_decay = 0.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("design examples") {
    std::mt19937_64 rng(41);
    PopulationDataset d = random_population(30, 1, 2, rng, 1.0);
    HistoryBasis lag1;
    lag1.cosine_count = 0;
    lag1.max_lag = 3;
    const GlmDataset g = build_population_design(d, lag1, 0);
    REQUIRE(g.cols() == 3);
    CHECK(g.design()(0, 2) == 0.0);
    for (Index n = 1; n < 30; ++n) CHECK(g.design()(n, 2) == -d.spikes(n - 1, 0));

    PopulationDataset quiet = random_population(20, 3, 2, rng);
    quiet.spikes.setZero();
    const GlmDataset q = build_population_design(quiet, HistoryBasis{}, 1);
    CHECK(q.design().rightCols(q.cols() - 2).isZero());

    HistoryBasis long_lag;
    long_lag.max_lag = 40;
    CHECK_THROWS_AS((void)build_population_design(quiet, long_lag, 0), DomainError);
}

TEST_CASE("design times parameters reproduces the direct sum") {
    std::mt19937_64 rng(42);
    const Index m = 4, p = 3, n = 60;
    const HistoryBasis basis;
    const PopulationDataset d = random_population(n, m, p, rng, 0.8);
    const CoupledFilterSet f = random_filters(m, p, basis.self_count(), rng);
    const MatrixXd self = basis.self_basis();
    const VectorXd kern = basis.coupling_kernel();
    for (Index target = 0; target < m; ++target) {
        const GlmDataset g = build_population_design(d, basis, target);
        const GlmParams par = neuron_params(f, target);
        const VectorXd eta = g.design() * par.theta;
        for (Index t = 0; t < n; ++t) {
            double direct = f.gains[target] * d.stimulus.row(t).dot(f.stimulus.col(target));
            for (Index lag = 1; lag <= basis.max_lag && lag <= t; ++lag) {
                direct += d.spikes(t - lag, target) * self.row(lag - 1).dot(f.self_history.col(target));
                for (Index j = 0; j < m; ++j) {
                    if (j != target) direct += d.spikes(t - lag, j) * kern[lag - 1] * f.coupling.coeff(target, j);
                }
            }
            CHECK(eta[t] == doctest::Approx(direct).epsilon(1e-12).scale(1.0));
        }
    }
}

TEST_CASE("history columns are causal") {
    std::mt19937_64 rng(43);
    PopulationDataset d = random_population(50, 3, 2, rng, 0.8);
    const HistoryBasis basis;
    const MatrixXd before = build_population_design(d, basis, 0).design();
    for (Index n : {0, 17, 49}) {
        PopulationDataset e = d;
        e.spikes(n, 0) += 3;
        e.spikes(n, 2) += 1;
        const MatrixXd after = build_population_design(e, basis, 0).design();
        CHECK(testutil::max_abs_diff(before.topRows(n + 1), after.topRows(n + 1)) == 0.0);
    }
    const VectorXd h = filter_history(Eigen::Vector4d(1, 0, 2, 0), Eigen::Vector2d(1.0, 0.5));
    CHECK(testutil::max_abs_diff(h, Eigen::Vector4d(0, 1, 0.5, 2)) == 0.0);
}

TEST_CASE("history variance") {
    const MatrixXd eye = MatrixXd::Identity(4, 4);
    CHECK(testutil::max_abs_diff(history_variance(eye, -eye), VectorXd::Ones(4)) < 1e-15);
    std::mt19937_64 rng(44);
    const MatrixXd b = testutil::random_matrix(10, 4, rng);
    const MatrixXd h = -testutil::random_spd(4, rng);
    const VectorXd v = history_variance(b, h);
    CHECK(testutil::max_abs_diff(history_variance(2.0 * b, h), 4.0 * v) < 1e-12);
    const MatrixXd oracle = b * (-h).inverse() * b.transpose();
    CHECK(testutil::max_abs_diff(v, oracle.diagonal()) < 1e-10);
}

TEST_CASE("bits per second") {
    const auto fam = CanonicalFamily::poisson(0.5);
    MatrixXd x(10, 1);
    x << -1, 0.5, 2, -0.3, 1.2, 0, -2, 0.7, 1.5, -0.8;
    VectorXd r(10);
    r << 0, 1, 3, 0, 2, 1, 0, 1, 2, 0;
    const GlmDataset d(x, r);
    const GlmParams model{VectorXd::Constant(1, 0.9), std::log(2.0)};
    double lm = 0.0, lh = 0.0;
    const double rate = r.sum() / (10 * 0.5);
    for (Index n = 0; n < 10; ++n) {
        const double mu = 0.5 * std::exp(std::log(2.0) + 0.9 * x(n, 0));
        lm += r[n] * std::log(mu) - mu - std::lgamma(r[n] + 1);
        lh += r[n] * std::log(0.5 * rate) - 0.5 * rate - std::lgamma(r[n] + 1);
    }
    const double expected = (lm - lh) / (5.0 * std::log(2.0));
    CHECK(bits_per_second(fam, d, model, 5.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected > 0.0);
    const GlmParams homog{VectorXd::Zero(1), std::log(rate)};
    CHECK(std::abs(bits_per_second(fam, d, homog, 5.0)) < 1e-12);
}

TEST_CASE("ROC AUC") {
    CHECK(roc_auc({0.1, 0.4, 0.35, 0.8}, {false, false, true, true}) == doctest::Approx(0.75));
    CHECK(roc_auc({1, 1, 1}, {true, false, false}) == doctest::Approx(0.5));
    CHECK(roc_auc({3, 2, 1}, {true, true, false}) == 1.0);
}

TEST_CASE("log-likelihood sums over neurons") {
    std::mt19937_64 rng(45);
    const HistoryBasis basis;
    const PopulationDataset d = random_population(80, 3, 2, rng);
    const CoupledFilterSet f = random_filters(3, 2, basis.self_count(), rng);
    double total = 0.0;
    for (Index i = 0; i < 3; ++i) total += neuron_loglik(d, basis, f, i);
    CHECK(population_loglik(d, basis, f) == doctest::Approx(total).epsilon(1e-13));
}

TEST_CASE("stagewise fit") {
    HistoryBasis basis;
    basis.cosine_count = 2;
    basis.max_lag = 6;
    const Index p = 4, bins = 20000;
    CoupledFilterSet truth;
    truth.offsets = VectorXd::Constant(2, std::log(0.1));
    std::mt19937_64 rng(46);
    truth.stimulus = testutil::random_matrix(p, 2, rng, 0.3);
    truth.gains = VectorXd::Ones(2);
    truth.self_history = MatrixXd::Zero(basis.self_count(), 2);
    truth.self_history.row(0).setConstant(2.0);
    truth.coupling.resize(2, 2);
    truth.coupling.insert(1, 0) = 1.5; // neuron 0 drives neuron 1
    truth.coupling.makeCompressed();
    const PopulationDataset data =
        gen_coupled_population(StimulusSpec::gaussian_iid(bins, p, 1.0), truth, basis, 1.0, 47);
    const auto cov = StructuredMatrix::identity(p);

    SUBCASE("known coupling is recovered mid-path") {
        StagewiseOptions opt;
        opt.path_length = 12;
        opt.path_ratio = 1e-3;
        const StagewiseResult r = stagewise_population_fit(data, basis, cov, opt);
        // upper middle of the path; weak spurious couplings only appear near its end
        const std::size_t mid = r.lambdas.size() / 3;
        CHECK(r.path[mid].coupling.coeff(1, 0) > 0.0);
        CHECK(r.path[mid].coupling.coeff(0, 1) == 0.0);
        for (double k : r.kkt_residuals) CHECK(k <= 1e-6);
        // lambda_max itself: zero up to the inner solver tolerance
        for (Eigen::Index k = 0; k < r.path.front().coupling.nonZeros(); ++k) {
            CHECK(std::abs(r.path.front().coupling.valuePtr()[k]) < 1e-8);
        }
        // a coupled fit improves on the uncoupled stage-2 model
        CHECK(population_loglik(data, basis, r.path.back()) > population_loglik(data, basis, r.stage2));
    }
    SUBCASE("huge lambda leaves the stage-2 model") {
        StagewiseOptions opt;
        opt.lambdas = {1e12};
        const StagewiseResult r = stagewise_population_fit(data, basis, cov, opt);
        CHECK(r.path[0].coupling.nonZeros() == 0);
        CHECK(testutil::max_abs_diff(r.path[0].offsets, r.stage2.offsets) < 1e-6);
        CHECK(testutil::max_abs_diff(r.path[0].self_history, r.stage2.self_history) < 1e-6);
        CHECK(testutil::max_abs_diff(r.path[0].gains, r.stage2.gains) < 1e-6);
    }
    SUBCASE("history uncertainty is positive") {
        StagewiseOptions opt;
        opt.lambdas = {1e12};
        const StagewiseResult r = stagewise_population_fit(data, basis, cov, opt);
        const VectorXd v = history_uncertainty(data, basis, r.stage2, 0);
        CHECK(v.size() == basis.max_lag);
        // the basis covers lags 1..4 (two bumps, spacing 2); beyond that the function is pinned at 0
        CHECK((v.head(4).array() > 0.0).all());
        CHECK(v.tail(2).isZero());
    }
    SUBCASE("entry scores rank the true coupling first") {
        StagewiseOptions opt;
        opt.path_length = 12;
        const StagewiseResult r = stagewise_population_fit(data, basis, cov, opt);
        const CouplingScores s = coupling_entry_scores(r.lambdas, r.path, truth.coupling);
        CHECK(roc_auc(s.scores, s.labels) == 1.0);
    }
}

TEST_CASE("silent neuron is rejected") {
    std::mt19937_64 rng(48);
    PopulationDataset d = random_population(100, 2, 2, rng);
    d.spikes.col(1).setZero();
    CHECK_THROWS_AS((void)stagewise_population_fit(d, HistoryBasis{}, StructuredMatrix::identity(2)), DomainError);
}
