#pragma once

#include "elglm/expected_loglik.hpp"
#include "elglm/population.hpp"
#include "elglm/structured_matrix.hpp"

#include <cstdint>
#include <memory>
#include <random>

namespace elglm {

struct StimulusSpec {
    enum class Kind { GaussianIid, GaussianStructured, BinaryIid, WeibullIid };

    Kind kind = Kind::GaussianIid;
    Index rows = 0;
    Index cols = 0;
    double sigma = 1.0;                                   // GaussianIid
    std::shared_ptr<const StructuredMatrix> covariance;  // GaussianStructured
    double binary_mean = 0.36;                           // BinaryIid: values mean +- 1
    double weibull_scale = 0.15;
    double weibull_shape = 0.5;

    static StimulusSpec gaussian_iid(Index rows, Index cols, double sigma = 1.0);
    static StimulusSpec gaussian_structured(Index rows, StructuredMatrix covariance);
    static StimulusSpec binary_iid(Index rows, Index cols, double mean = 0.36);
    static StimulusSpec weibull_iid(Index rows, Index cols, double scale = 0.15, double shape = 0.5);

    void validate() const;
    /// Exact population mean and covariance of one stimulus row.
    [[nodiscard]] StimulusMoments moments() const;
};

struct GeneratedStimuli {
    MatrixXd design;
    StimulusMoments moments;
};

/// Draws rows i.i.d. from the spec; deterministic in the seed.
[[nodiscard]] GeneratedStimuli gen_stimuli(const StimulusSpec& spec, std::uint64_t seed);

/**
 * Stationary spatial covariance on a rows x cols pixel grid whose spectrum in
 * the 2-D Fourier basis falls off as 1 / |frequency| (DC clamped to the
 * lowest nonzero mode), normalized to unit pixel variance.
 */
[[nodiscard]] StructuredMatrix one_over_f_spatial(Index rows, Index cols);

/// AR(1) covariance phi^|i-j| over `lags` time steps (dense Toeplitz).
[[nodiscard]] StructuredMatrix ar1_temporal(Index lags, double phi = 0.9);

/// Spatiotemporal covariance: spatial (x) temporal Kronecker product.
[[nodiscard]] StructuredMatrix spatiotemporal_covariance(Index rows, Index cols, Index lags, double phi = 0.9);

/// Gaussian bump exp(-(j - center)^2 / (2 width^2)) scaled to the given norm.
[[nodiscard]] VectorXd gaussian_bump_filter(Index p, double center, double width, double norm);

/// Random bump: integer center uniform on [0, p), width |N(0, 2)| (variance 2),
/// norm uniform on [0, max_norm].
[[nodiscard]] VectorXd random_bump_filter(Index p, std::mt19937_64& rng, double max_norm = 0.5);

/// Unit-direction filter scaled to the given norm, drawn isotropically.
[[nodiscard]] VectorXd random_filter_with_norm(Index p, double norm, std::mt19937_64& rng);

struct PopulationSpec {
    Index neurons = 20;
    Index bins = 20000;
    Index stimulus_dim = 20;
    double bin_width = 1.0;
    double base_rate = 0.05;         // spikes per bin before modulation
    double filter_norm = 0.5;
    double coupling_density = 0.1;   // fraction of nonzero off-diagonal couplings
    double coupling_scale = 1.0;     // magnitude of nonzero couplings
    double rate_cap = 1e6;           // per bin
};

/// Random ground-truth filters: stimulus filters of the given norm, a
/// refractory self history, sparse couplings of random sign.
[[nodiscard]] CoupledFilterSet random_coupled_filters(const PopulationSpec& spec, const HistoryBasis& basis,
                                                      std::uint64_t seed);

/**
 * Simulates Poisson counts bin by bin (history terms are causal); the
 * stimulus comes from `stimulus`. NumericalError when a rate exceeds the cap.
 */
[[nodiscard]] PopulationDataset gen_coupled_population(const StimulusSpec& stimulus, const CoupledFilterSet& truth,
                                                       const HistoryBasis& basis, double bin_width, std::uint64_t seed,
                                                       double rate_cap = 1e6);

} // namespace elglm
