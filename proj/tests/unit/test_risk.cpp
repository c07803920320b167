#include "helpers.hpp"

#include "elglm/error.hpp"
#include "elglm/risk.hpp"

#include <doctest.h>

#include <cmath>

using namespace elglm;
using Eigen::MatrixXd;

namespace {

VectorXd filter_with_snr(Index p, double snr) {
    VectorXd t = VectorXd::LinSpaced(p, -1.0, 2.0);
    if (snr == 0.0) return VectorXd::Zero(p);
    return t * std::sqrt(snr) / t.norm();
}

} // namespace

TEST_CASE("closed-form MSE examples") {
    CHECK(mse_closed_form({22, 10, 3.0, 0.0, EstimatorKind::Mle}) == doctest::Approx(10.0 / 11.0).epsilon(1e-14));
    CHECK(mse_closed_form({40, 7, 0.0, 0.0, EstimatorKind::Mele}) == doctest::Approx(7.0 / 40.0).epsilon(1e-14));
    // (s + p (s + 1)) / N by hand
    CHECK(mse_closed_form({100, 10, 2.0, 0.0, EstimatorKind::Mele}) == doctest::Approx(0.32).epsilon(1e-14));
    for (Index n : {30, 200, 5000}) {
        for (double s : {0.0, 0.7, 5.0}) {
            const RiskSpec mele{n, 13, s, 0.0, EstimatorKind::Mele};
            const RiskSpec mpele{n, 13, s, 0.0, EstimatorKind::Mpele};
            CHECK(mse_closed_form(mpele) == doctest::Approx(mse_closed_form(mele)).epsilon(1e-14));
        }
    }
    CHECK_THROWS_AS((void)mse_closed_form({100, 10, 1.0, 1.0, EstimatorKind::Map}), DomainError);
    CHECK_THROWS_AS((void)mse_closed_form({11, 10, 1.0, 0.0, EstimatorKind::Mle}), DomainError);
    CHECK_THROWS_AS((void)mse_closed_form({100, 10, 1.0, -1.0, EstimatorKind::Mpele}), DomainError);
}

TEST_CASE("asymptotic MSE examples") {
    CHECK(mse_asymptotic(EstimatorKind::Mle, 0.5, 3.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(mse_asymptotic(EstimatorKind::Mele, 0.5, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(mse_asymptotic(EstimatorKind::Map, 0.5, 1.0, 1e-6) - 1.0) <= 1e-3);
    for (double rho : {0.05, 0.3, 1.0, 2.5}) {
        for (double s : {0.0, 0.2, 1.0, 5.0}) {
            CHECK(mse_asymptotic(EstimatorKind::Mpele, rho, s, 0.0) ==
                  doctest::Approx(mse_asymptotic(EstimatorKind::Mele, rho, s)).epsilon(1e-14));
        }
    }
    CHECK_THROWS_AS((void)mse_asymptotic(EstimatorKind::Mle, 1.2, 1.0), DomainError);
    CHECK_THROWS_AS((void)mse_asymptotic(EstimatorKind::Map, 1.5, 1.0, 0.0), DomainError);
    CHECK_NOTHROW((void)mse_asymptotic(EstimatorKind::Map, 1.5, 1.0, 0.5));
}

TEST_CASE("finite-sample MELE approaches its limit") {
    // closed form minus limit is exactly snr / N
    for (double rho : {0.1, 0.5, 0.9}) {
        for (double s : {0.2, 1.0, 5.0}) {
            double prev = std::numeric_limits<double>::infinity();
            for (Index n : {100, 1000, 10000}) {
                const auto p = static_cast<Index>(std::llround(rho * n));
                const double finite = mse_closed_form({n, p, s, 0.0, EstimatorKind::Mele});
                const double limit = mse_asymptotic(EstimatorKind::Mele, rho, s);
                CHECK(finite - limit == doctest::Approx(s / n).epsilon(1e-10));
                const double rel = std::abs(finite - limit) / limit;
                CHECK(rel < prev);
                prev = rel;
            }
        }
    }
}

TEST_CASE("Marchenko-Pastur law") {
    const MarchenkoPastur one(1.0);
    CHECK(one.lower() == 0.0);
    CHECK(one.upper() == doctest::Approx(4.0));
    for (double rho : {0.1, 0.5, 1.0}) {
        const MarchenkoPastur mp(rho);
        CHECK(std::abs(mp.integrate_continuous([](double) { return 1.0; }) - 1.0) <= 1e-8);
        CHECK(std::abs(mp.integrate_continuous([](double l) { return l; }) - 1.0) <= 1e-8);
        CHECK(mp.density(mp.lower() - 1e-3) == 0.0);
        CHECK(mp.density(mp.upper() + 1e-3) == 0.0);
    }
    const MarchenkoPastur wide(2.5);
    CHECK(wide.zero_mass() == doctest::Approx(0.6));
    CHECK(wide.integrate_continuous([](double) { return 1.0; }) == doctest::Approx(0.4).epsilon(1e-8));
    CHECK(wide.expectation([](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(wide.expectation([](double l) { return l; }) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK_THROWS_AS(MarchenkoPastur(0.0), DomainError);
}

TEST_CASE("Marchenko-Pastur moments against empirical eigenvalues") {
    std::mt19937_64 rng(81);
    const Index p = 500;
    for (double rho : {0.25, 0.5, 1.0}) {
        const auto n = static_cast<Index>(std::llround(p / rho));
        const MarchenkoPastur mp(rho);
        double m1 = 0.0, m2 = 0.0;
        const int reps = 20;
        for (int t = 0; t < reps; ++t) {
            const MatrixXd x = testutil::random_matrix(n, p, rng);
            const MatrixXd s = x.transpose() * x / static_cast<double>(n);
            m1 += s.trace() / p;
            m2 += s.squaredNorm() / p;
        }
        m1 /= reps;
        m2 /= reps;
        CHECK(std::abs(m1 - mp.integrate_continuous([](double l) { return l; })) <= 5e-3);
        // second moment 1 + rho, up to 1/N finite-size terms
        CHECK(std::abs(m2 - mp.integrate_continuous([](double l) { return l * l; })) <= 0.02);
        CHECK(mp.integrate_continuous([](double l) { return l * l; }) == doctest::Approx(1.0 + rho).epsilon(1e-8));
    }
}

TEST_CASE("Monte Carlo MSE agrees with the closed forms") {
    const Index n = 200, p = 20;
    for (double s : {0.0, 1.0, 5.0}) {
        const VectorXd theta = filter_with_snr(p, s);
        const auto est = mc_mse_many({EstimatorKind::Mele, EstimatorKind::Mle, EstimatorKind::Mpele}, n, theta, 2000,
                                     82, 0.5);
        CHECK(std::abs(est[0].mse - mse_closed_form({n, p, s, 0.0, EstimatorKind::Mele})) <= 3.0 * est[0].stderr_);
        CHECK(std::abs(est[1].mse - mse_closed_form({n, p, s, 0.0, EstimatorKind::Mle})) <= 3.0 * est[1].stderr_);
        CHECK(std::abs(est[2].mse - mse_closed_form({n, p, s, 0.5, EstimatorKind::Mpele})) <= 3.0 * est[2].stderr_);
    }
    const auto zero = mc_mse(EstimatorKind::Mele, n, VectorXd::Zero(p), 2000, 83);
    CHECK(std::abs(zero.mse - static_cast<double>(p) / n) <= 3.0 * zero.stderr_);
    const auto again = mc_mse(EstimatorKind::Mele, n, VectorXd::Zero(p), 2000, 83);
    CHECK(again.mse == zero.mse);
    CHECK(again.stderr_ == zero.stderr_);
    CHECK_THROWS_AS((void)mc_mse(EstimatorKind::Mle, 20, VectorXd::Zero(19), 10, 1), DomainError);
    CHECK_THROWS_AS((void)mc_mse(EstimatorKind::Mele, 20, VectorXd::Zero(5), 1, 1), DomainError);
}

TEST_CASE("MAP asymptotic MSE against Monte Carlo at N = 2000") {
    const Index n = 2000;
    for (double rho : {0.05, 0.1}) {
        const auto p = static_cast<Index>(std::llround(rho * n));
        for (double c : {0.5, 3.0}) {
            const VectorXd theta = filter_with_snr(p, 1.0);
            const auto mc = mc_mse(EstimatorKind::Map, n, theta, 300, 84, c);
            CHECK(std::abs(mc.mse - mse_asymptotic(EstimatorKind::Map, rho, 1.0, c)) <= 3.0 * mc.stderr_);
        }
    }
}

TEST_CASE("crossover") {
    CHECK(crossover_rho(1.0) == 0.5);
    CHECK(crossover_rho(0.0) == 0.0);
    // bisection on the difference of the two limits
    double lo = 0.01, hi = 0.99;
    auto diff = [](double rho) {
        return mse_asymptotic(EstimatorKind::Mele, rho, 3.0) - mse_asymptotic(EstimatorKind::Mle, rho, 3.0);
    };
    REQUIRE(diff(lo) > 0.0);
    REQUIRE(diff(hi) < 0.0);
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (diff(mid) > 0.0 ? lo : hi) = mid;
    }
    CHECK(crossover_rho(3.0) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(std::abs(lo - crossover_rho(3.0)) <= 1e-12);
    CHECK_THROWS_AS((void)crossover_rho(-1.0), DomainError);
}

TEST_CASE("optimized ridge: MAP never loses to MPELE") {
    for (double s : {0.2, 1.0, 5.0}) {
        for (double rho : {0.1, 0.3, 0.5, 1.0, 2.0, 3.0}) {
            const auto map = optimal_ridge(EstimatorKind::Map, rho, s);
            const auto mpele = optimal_ridge(EstimatorKind::Mpele, rho, s);
            CHECK(map.mse <= mpele.mse * (1.0 + 1e-9));
            CHECK(map.mse <= mse_asymptotic(EstimatorKind::Map, rho, s, map.ridge_c * 1.1) + 1e-12);
            CHECK(map.mse <= mse_asymptotic(EstimatorKind::Map, rho, s, map.ridge_c / 1.1) + 1e-12);
            if (s == 0.2) CHECK((mpele.mse - map.mse) / map.mse <= 0.10);
        }
    }
    // stationary point of the MPELE limit in c: c* = (1 + snr) / snr
    const auto m = optimal_ridge(EstimatorKind::Mpele, 0.4, 2.0);
    CHECK(m.ridge_c == doctest::Approx(1.5).epsilon(1e-4));
}

TEST_CASE("estimator names and seeds") {
    for (auto k : {EstimatorKind::Mele, EstimatorKind::Mle, EstimatorKind::Mpele, EstimatorKind::Map}) {
        CHECK(estimator_from_name(estimator_name(k)) == k);
    }
    CHECK_THROWS_AS((void)estimator_from_name("ols"), ConfigError);
    CHECK(derive_seed(1, 2) == derive_seed(1, 2));
    CHECK(derive_seed(1, 2) != derive_seed(1, 3));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}
