#pragma once

#include "elglm/expected_loglik.hpp"
#include "elglm/glm.hpp"
#include "elglm/structured_matrix.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace elglm {

/// Potential energy U = -log posterior (up to a constant) and its gradient.
struct PotentialEval {
    double value = 0.0;
    VectorXd gradient;
};
using Potential = std::function<PotentialEval(const VectorXd&)>;

/// Negative exact log posterior over the stacked (offset, theta), flat prior
/// on the offset and N(0, R^{-1}) on theta (ridge may be null: flat).
[[nodiscard]] Potential exact_potential(const CanonicalFamily& family, const GlmDataset& data,
                                        const StructuredMatrix* ridge = nullptr);

/// Same with the expected log-likelihood in place of the likelihood.
[[nodiscard]] Potential el_potential(const ExpectationEngine& engine, const SufficientStats& stats,
                                     const StructuredMatrix* ridge = nullptr);

struct HmcOptions {
    double step = 0.01;
    int leapfrog = 20;
    int draws = 1000;
    int burn_in = -1; // negative: 10% of draws
    std::uint64_t seed = 1;

    [[nodiscard]] int effective_burn_in() const { return burn_in >= 0 ? burn_in : draws / 10; }
};

struct Chain {
    MatrixXd samples; // draws x dim
    double acceptance_rate = 0.0;
    std::vector<double> energies; // total Hamiltonian after each kept transition
    std::uint64_t seed = 0;
    std::string target;
};

/**
 * Hamiltonian Monte Carlo with unit mass and leapfrog integration; Metropolis
 * accept on the total energy. Deterministic given the seed. NumericalError if
 * the initial energy is not finite.
 */
[[nodiscard]] Chain hmc_chain(const Potential& potential, const VectorXd& init, const HmcOptions& options,
                              const std::string& target = "exact");

/**
 * Trajectories follow the surrogate potential; the proposal is accepted with
 * probability min(1, exp(H(x, m) - H(x', m'))) where H uses the exact
 * potential. Leapfrog under any smooth potential is volume preserving and
 * reversible, so the chain targets the exact posterior.
 */
[[nodiscard]] Chain surrogate_hmc_chain(const Potential& surrogate, const Potential& exact, const VectorXd& init,
                                        const HmcOptions& options);

/// i.i.d. draws from N(mean, covariance) laid out like a chain.
[[nodiscard]] Chain gaussian_draws(const VectorXd& mean, const MatrixXd& covariance, int draws, std::uint64_t seed,
                                   const std::string& target = "laplace-gaussian");

/// Total leapfrog energy change of one trajectory (integrator diagnostic).
[[nodiscard]] double leapfrog_energy_error(const Potential& potential, const VectorXd& position,
                                           const VectorXd& momentum, double step, int leapfrog);

struct QuantileSummary {
    std::vector<Index> coordinates;
    VectorXd median;
    VectorXd lower; // 2.5%
    VectorXd upper; // 97.5%
};

/// Per-coordinate median and central 95% interval (type-7 quantiles).
/// Empty `coordinates` selects all. DomainError on an empty chain.
[[nodiscard]] QuantileSummary chain_summary(const Chain& chain, const std::vector<Index>& coordinates = {});

/// Linear-interpolation (type 7) quantile of sorted data.
[[nodiscard]] double quantile_sorted(const std::vector<double>& sorted, double prob);

/// Analytic median and 95% interval of independent Gaussian marginals.
[[nodiscard]] QuantileSummary gaussian_summary(const VectorXd& mean, const VectorXd& variances);

} // namespace elglm
