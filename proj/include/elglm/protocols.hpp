#pragma once

#include "elglm/estimators.hpp"
#include "elglm/population.hpp"
#include "elglm/sampling.hpp"
#include "elglm/simulate.hpp"

#include <cstdint>
#include <vector>

// Simulation experiments shared by the command-line runner and the acceptance
// checks. Each is deterministic in its seed apart from the timing fields.

namespace elglm {

/// LNP data x ~ N(0, sd^2 I), true filter of the given norm, offset log(base_rate).
struct LnpSimulation {
    GlmDataset data;
    GlmParams truth;
    double stimulus_variance = 1.0;
};

[[nodiscard]] LnpSimulation simulate_lnp_white(Index samples, Index dim, double filter_norm, double stimulus_sd,
                                               double base_rate, std::uint64_t seed);

// ---- ridge selection by marginal likelihood ---------------------------------

struct RidgeSelectionConfig {
    Index dim = 250;
    Index samples = 1000;
    double filter_norm = 10.0;
    double stimulus_sd = 0.1;
    double base_rate = 0.2;
    int replicates = 30;
    int max_fixed_point = 200;
    double fixed_point_tolerance = 1e-6;
    std::uint64_t seed = 5;
};

struct RidgeSelectionReplicate {
    double beta_el = 0.0;      // closed-form EL maximizer
    double beta_exact = 0.0;   // limit of the Laplace fixed point
    double beta_onestep = 0.0; // one fixed-point step from beta_el
    bool exact_converged = false;
    double mse_exact = 0.0;    // ||theta_MAP(beta) - theta||^2
    double mse_onestep = 0.0;
    double seconds_exact = 0.0;
    double seconds_onestep = 0.0;
};

[[nodiscard]] std::vector<RidgeSelectionReplicate> run_ridge_selection(const RidgeSelectionConfig& config);

// ---- posterior sampling comparison -------------------------------------------

struct PosteriorComparisonConfig {
    Index samples = 4000;
    Index dim = 100;
    double filter_norm = 1.0;
    double base_rate = 0.1;
    HmcOptions hmc{0.01, 20, 4000, -1, 11};
    int surrogate_draws = 1000;
    int batches = 20; // batch means for quantile standard errors
    std::uint64_t seed = 6;
};

struct PosteriorComparisonResult {
    QuantileSummary exact;     // exact-likelihood HMC, theta coordinates
    QuantileSummary el;        // EL HMC
    QuantileSummary profile;   // analytic profile-EL Gaussian
    QuantileSummary laplace;   // Gaussian at the exact MAP
    VectorXd el_lower_stderr;  // batch-means standard errors of EL quantiles
    VectorXd el_upper_stderr;
    VectorXd el_median_stderr;
    double exact_acceptance = 0.0;
    double el_acceptance = 0.0;
    double surrogate_acceptance = 0.0;
    double exact_reference_acceptance = 0.0; // exact HMC over the surrogate's draw count
    double interval_overlap = 0.0;           // fraction of coordinates with EL/exact intervals overlapping
    double median_inside = 0.0;              // fraction with the EL median inside the exact interval
    double profile_match = 0.0;              // fraction with profile endpoints within 3 stderr of EL-HMC
    Chain exact_chain;
    Chain el_chain;
};

[[nodiscard]] PosteriorComparisonResult run_posterior_comparison(const PosteriorComparisonConfig& config);

// ---- EL-preconditioned refinement ----------------------------------------------

struct PcgExperimentConfig {
    Index samples = 12000;
    Index holdout = 4000;
    bool correlated = false; // white noise or 5x5 1/F spatial x 10-lag AR(1)
    double filter_norm = 1.0;
    double base_rate = 0.1;
    double ridge = 1.0;      // R = ridge * I
    int budget = 10;
    std::uint64_t seed = 7;
};

struct PcgExperimentResult {
    std::vector<double> heldout_by_iteration; // index k: after k PCG iterations (0 = EL start)
    double heldout_map = 0.0;
    double relative_gap = 0.0;                // |L_pcg - L_map| / |L_map| at the budget
    double seconds_pcg = 0.0;
    double seconds_map = 0.0;
    int map_iterations = 0;
};

[[nodiscard]] PcgExperimentResult run_pcg_experiment(const PcgExperimentConfig& config);

// ---- coupled population ------------------------------------------------------------

struct PopulationExperimentConfig {
    PopulationSpec population;
    HistoryBasis basis;
    double train_fraction = 0.6;
    double validation_fraction = 0.2;
    int path_length = 30;
    double path_ratio = 1e-3;
    bool run_full_map = true;
    std::uint64_t seed = 9;
};

struct PopulationExperimentResult {
    double auc_best = 0.0;       // best ROC-AUC over path points
    double auc_entry = 0.0;      // AUC of entry-lambda scores
    std::vector<double> auc_path;
    std::vector<double> lambdas;
    double staged_test_bits = 0.0;
    double full_test_bits = 0.0;
    double staged_test_loglik = 0.0;
    double full_test_loglik = 0.0;
    double staged_lambda = 0.0;
    double full_lambda = 0.0;
    double stage12_seconds = 0.0;
    double stage3_seconds = 0.0;
    double full_seconds = 0.0;
    StagewiseResult staged;
    CoupledFilterSet truth;
};

[[nodiscard]] PopulationExperimentResult run_population_experiment(const PopulationExperimentConfig& config);

/// Summed test-set information gain in bits per unit time over neurons.
[[nodiscard]] double population_bits(const PopulationDataset& data, const HistoryBasis& basis,
                                     const CoupledFilterSet& filters);

// ---- evaluation cost -------------------------------------------------------------

struct TimingPoint {
    Index samples = 0;
    double el_seconds = 0.0;    // one el_loglik evaluation from cached statistics
    double exact_seconds = 0.0; // one exact_loglik evaluation
};

/// Best-of-`repeats` evaluation times for each N at dimension p.
[[nodiscard]] std::vector<TimingPoint> time_loglik(const std::vector<Index>& sizes, Index dim, int repeats,
                                                   std::uint64_t seed);

} // namespace elglm
