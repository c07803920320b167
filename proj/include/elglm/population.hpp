#pragma once

#include "elglm/estimators.hpp"
#include "elglm/glm.hpp"
#include "elglm/structured_matrix.hpp"

#include <Eigen/SparseCore>

#include <vector>

namespace elglm {

using SparseMatrixXd = Eigen::SparseMatrix<double>;

/// Spike counts of M neurons over N bins plus the shared stimulus.
struct PopulationDataset {
    MatrixXd stimulus; // N x p
    MatrixXd spikes;   // N x M
    double bin_width = 1.0;

    [[nodiscard]] Index bins() const { return stimulus.rows(); }
    [[nodiscard]] Index neurons() const { return spikes.cols(); }
    [[nodiscard]] Index stimulus_dim() const { return stimulus.cols(); }
    /// Equal lengths, nonnegative integer counts, finite stimulus.
    void validate() const;
    /// Bins [begin, begin + count).
    [[nodiscard]] PopulationDataset slice(Index begin, Index count) const;
};

/**
 * Spike-history bases. Self history: a refractory element (-1 at lag 1) and
 * `cosine_count` raised-cosine bumps centered at lags 1, 1 + spacing, ...
 * each spanning +-spacing lags. Coupling: one kernel exp(-decay * lag) per
 * source neuron. Every element has support within lags 1..max_lag.
 */
struct HistoryBasis {
    int cosine_count = 4;
    double cosine_spacing = 2.0;
    bool refractory = true;
    double coupling_decay = 0.5; // 1 / bins
    int max_lag = 10;

    void validate() const;
    [[nodiscard]] int self_count() const { return cosine_count + (refractory ? 1 : 0); }
    /// max_lag x self_count matrix; row k is lag k + 1.
    [[nodiscard]] MatrixXd self_basis() const;
    /// exp(-decay * lag) for lag = 1..max_lag.
    [[nodiscard]] VectorXd coupling_kernel() const;
};

/// Per-neuron offset, stimulus filter, gain, self-history and couplings.
struct CoupledFilterSet {
    VectorXd offsets;       // M
    MatrixXd stimulus;      // p x M, column i is neuron i's filter
    VectorXd gains;         // M
    MatrixXd self_history;  // self_count x M
    SparseMatrixXd coupling; // M x M, (target, source), zero diagonal

    [[nodiscard]] Index neurons() const { return offsets.size(); }
    void validate(Index stimulus_dim, int self_count) const;
};

/// Basis-filtered spike history, causal: row n uses counts from bins < n only.
[[nodiscard]] VectorXd filter_history(const VectorXd& counts, const VectorXd& kernel);

/**
 * Design for one target neuron: [stimulus (p) | self history (K) | coupling
 * trace of each other neuron (M - 1, in source order)].
 * DomainError when max_lag >= N.
 */
[[nodiscard]] GlmDataset build_population_design(const PopulationDataset& data, const HistoryBasis& basis,
                                                 Index target);

/// Stage-2 style design: [X^s filter | self history].
[[nodiscard]] GlmDataset build_history_design(const PopulationDataset& data, const HistoryBasis& basis, Index target,
                                              const VectorXd& stimulus_filter);

/// Stage-3 design: [X^s filter | self history | coupling traces].
[[nodiscard]] GlmDataset build_coupled_design(const PopulationDataset& data, const HistoryBasis& basis, Index target,
                                              const VectorXd& stimulus_filter);

struct StagewiseOptions {
    std::vector<double> lambdas;   // empty: path from the largest stage-3 gradient
    int path_length = 30;
    double path_ratio = 1e-3;
    int pcg_budget = 0;            // extra PCG iterations after stage 1
    const StructuredMatrix* stimulus_ridge = nullptr;
    FitOptions fit = {};
};

struct StagewiseResult {
    std::vector<double> lambdas;
    std::vector<CoupledFilterSet> path; // one filter set per lambda
    CoupledFilterSet stage2;            // couplings zero
    std::vector<double> kkt_residuals;  // worst over neurons, per lambda
    double stage12_seconds = 0.0;
    double stage3_seconds = 0.0;
};

/**
 * Three stages per neuron: (1) stimulus filter by MPELE, (2) Newton over
 * (offset, gain, self history) with couplings off, (3) L1 coordinate descent
 * on the exact likelihood over couplings with the stimulus filter fixed up
 * to the gain. N_s = 0 for a neuron raises DomainError.
 */
[[nodiscard]] StagewiseResult stagewise_population_fit(const PopulationDataset& data, const HistoryBasis& basis,
                                                       const StructuredMatrix& covariance,
                                                       const StagewiseOptions& options = {});

struct FullMapResult {
    std::vector<double> lambdas;
    std::vector<CoupledFilterSet> path;
    std::vector<double> kkt_residuals;
};

/// Every parameter free, L1 on couplings only, on the full population design.
[[nodiscard]] FullMapResult full_map_population_fit(const PopulationDataset& data, const HistoryBasis& basis,
                                                    const std::vector<double>& lambdas, const FitOptions& fit = {});

/// Linear predictor parameters of one neuron under the full design layout.
[[nodiscard]] GlmParams neuron_params(const CoupledFilterSet& filters, Index target);

/// Sum over neurons of the Poisson log-likelihood (with data constants).
[[nodiscard]] double population_loglik(const PopulationDataset& data, const HistoryBasis& basis,
                                       const CoupledFilterSet& filters);
[[nodiscard]] double neuron_loglik(const PopulationDataset& data, const HistoryBasis& basis,
                                   const CoupledFilterSet& filters, Index target);

/// diag(B (-H)^{-1} B^T) for a basis B (lags x K) and a negative definite
/// K x K Hessian block.
[[nodiscard]] VectorXd history_variance(const MatrixXd& basis, const MatrixXd& hessian);

/// Per-lag variance of the self-history function of `target`, using the
/// no-coupling log-likelihood Hessian at the fitted parameters.
[[nodiscard]] VectorXd history_uncertainty(const PopulationDataset& data, const HistoryBasis& basis,
                                           const CoupledFilterSet& filters, Index target);

/// (L_model - L_homogeneous) / (T log 2), homogeneous rate N_s / (N dt).
[[nodiscard]] double bits_per_second(const CanonicalFamily& family, const GlmDataset& data, const GlmParams& params,
                                     double total_time);

/// Area under the ROC curve of scores against binary labels (ties count 1/2).
[[nodiscard]] double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels);

/// Largest lambda at which each off-diagonal coupling is nonzero (0 if never);
/// returned with labels from the true coupling support.
struct CouplingScores {
    std::vector<double> scores;
    std::vector<bool> labels;
};
[[nodiscard]] CouplingScores coupling_entry_scores(const std::vector<double>& lambdas,
                                                   const std::vector<CoupledFilterSet>& path,
                                                   const SparseMatrixXd& truth);

} // namespace elglm
