#include "elglm/population.hpp"

#include "elglm/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace elglm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

CanonicalFamily family_of(const PopulationDataset& data) { return CanonicalFamily::poisson(data.bin_width); }

void check_target(const PopulationDataset& data, Index target) {
    if (target < 0 || target >= data.neurons()) {
        throw DimensionError("neuron index " + std::to_string(target) + " out of range");
    }
}

void check_lags(const PopulationDataset& data, const HistoryBasis& basis) {
    basis.validate();
    if (basis.max_lag >= data.bins()) {
        throw DomainError("history length " + std::to_string(basis.max_lag) + " must be below the number of bins " +
                          std::to_string(data.bins()));
    }
}

MatrixXd self_history_columns(const PopulationDataset& data, const HistoryBasis& basis, Index target) {
    const MatrixXd b = basis.self_basis();
    MatrixXd out(data.bins(), b.cols());
    const VectorXd counts = data.spikes.col(target);
    for (Index k = 0; k < b.cols(); ++k) out.col(k) = filter_history(counts, b.col(k));
    return out;
}

MatrixXd coupling_traces(const PopulationDataset& data, const HistoryBasis& basis) {
    const VectorXd kernel = basis.coupling_kernel();
    MatrixXd out(data.bins(), data.neurons());
    for (Index j = 0; j < data.neurons(); ++j) out.col(j) = filter_history(data.spikes.col(j), kernel);
    return out;
}

// Columns of the coupling block for `target`, sources in increasing order, skipping itself.
MatrixXd coupling_block(const MatrixXd& traces, Index target) {
    const Index m = traces.cols();
    MatrixXd out(traces.rows(), std::max<Index>(m - 1, 0));
    Index c = 0;
    for (Index j = 0; j < m; ++j) {
        if (j == target) continue;
        out.col(c++) = traces.col(j);
    }
    return out;
}

CoupledFilterSet empty_filters(Index m, Index p, int k) {
    CoupledFilterSet f;
    f.offsets = VectorXd::Zero(m);
    f.stimulus = MatrixXd::Zero(p, m);
    f.gains = VectorXd::Ones(m);
    f.self_history = MatrixXd::Zero(k, m);
    f.coupling = SparseMatrixXd(m, m);
    return f;
}

void set_couplings(std::vector<Eigen::Triplet<double>>& triplets, Index target, Index m, const VectorXd& values) {
    Index c = 0;
    for (Index j = 0; j < m; ++j) {
        if (j == target) continue;
        if (values[c] != 0.0) triplets.emplace_back(target, j, values[c]);
        ++c;
    }
}

} // namespace

void PopulationDataset::validate() const {
    if (stimulus.rows() != spikes.rows()) throw DimensionError("stimulus and spike trains have different lengths");
    if (spikes.cols() < 1) throw DimensionError("population has no neurons");
    if (!(bin_width > 0.0)) throw DomainError("bin width must be positive");
    if (!stimulus.allFinite()) throw DomainError("stimulus contains non-finite entries");
    for (Index j = 0; j < spikes.cols(); ++j) {
        for (Index n = 0; n < spikes.rows(); ++n) {
            const double r = spikes(n, j);
            if (!(r >= 0.0) || r != std::floor(r)) {
                throw DomainError("spike count of neuron " + std::to_string(j) + " at bin " + std::to_string(n) +
                                  " is not a nonnegative integer");
            }
        }
    }
}

PopulationDataset PopulationDataset::slice(Index begin, Index count) const {
    if (begin < 0 || count < 0 || begin + count > bins()) throw DimensionError("population slice out of range");
    return {stimulus.middleRows(begin, count), spikes.middleRows(begin, count), bin_width};
}

void HistoryBasis::validate() const {
    if (cosine_count < 0) throw DomainError("cosine bump count must be >= 0");
    if (!(cosine_spacing > 0.0)) throw DomainError("cosine bump spacing must be positive");
    if (!(coupling_decay > 0.0)) throw DomainError("coupling decay must be positive");
    if (max_lag < 1) throw DomainError("max_lag must be >= 1");
    if (self_count() < 1) throw DomainError("self-history basis is empty");
    if (cosine_count > 0 && 1.0 + (cosine_count - 1) * cosine_spacing > max_lag) {
        throw DomainError("cosine bumps extend past max_lag");
    }
}

MatrixXd HistoryBasis::self_basis() const {
    validate();
    MatrixXd b = MatrixXd::Zero(max_lag, self_count());
    int col = 0;
    if (refractory) b(0, col++) = -1.0;
    for (int k = 0; k < cosine_count; ++k, ++col) {
        const double center = 1.0 + k * cosine_spacing;
        for (int lag = 1; lag <= max_lag; ++lag) {
            const double d = (lag - center) / cosine_spacing;
            if (std::abs(d) < 1.0) b(lag - 1, col) = 0.5 * (1.0 + std::cos(M_PI * d));
        }
    }
    return b;
}

VectorXd HistoryBasis::coupling_kernel() const {
    validate();
    VectorXd k(max_lag);
    for (int lag = 1; lag <= max_lag; ++lag) k[lag - 1] = std::exp(-coupling_decay * lag);
    return k;
}

void CoupledFilterSet::validate(Index stimulus_dim, int self_count) const {
    const Index m = offsets.size();
    if (stimulus.rows() != stimulus_dim || stimulus.cols() != m || gains.size() != m ||
        self_history.rows() != self_count || self_history.cols() != m || coupling.rows() != m || coupling.cols() != m) {
        throw DimensionError("coupled filter set has inconsistent shapes");
    }
    if (!offsets.allFinite() || !stimulus.allFinite() || !gains.allFinite() || !self_history.allFinite()) {
        throw DomainError("coupled filter set has non-finite entries");
    }
    for (int k = 0; k < coupling.outerSize(); ++k) {
        for (SparseMatrixXd::InnerIterator it(coupling, k); it; ++it) {
            if (!std::isfinite(it.value())) throw DomainError("coupling weights must be finite");
            if (it.row() == it.col() && it.value() != 0.0) throw DomainError("self coupling belongs in self_history");
        }
    }
}

VectorXd filter_history(const VectorXd& counts, const VectorXd& kernel) {
    const Index n = counts.size();
    const Index tau = kernel.size();
    VectorXd out = VectorXd::Zero(n);
    for (Index t = 0; t < n; ++t) {
        if (counts[t] == 0.0) continue;
        const Index last = std::min(tau, n - 1 - t);
        for (Index lag = 1; lag <= last; ++lag) out[t + lag] += kernel[lag - 1] * counts[t];
    }
    return out;
}

GlmDataset build_population_design(const PopulationDataset& data, const HistoryBasis& basis, Index target) {
    check_target(data, target);
    check_lags(data, basis);
    const MatrixXd self = self_history_columns(data, basis, target);
    const MatrixXd coupling = coupling_block(coupling_traces(data, basis), target);
    MatrixXd design(data.bins(), data.stimulus_dim() + self.cols() + coupling.cols());
    design << data.stimulus, self, coupling;
    return {std::move(design), data.spikes.col(target)};
}

GlmDataset build_history_design(const PopulationDataset& data, const HistoryBasis& basis, Index target,
                                const VectorXd& stimulus_filter) {
    check_target(data, target);
    check_lags(data, basis);
    if (stimulus_filter.size() != data.stimulus_dim()) throw DimensionError("stimulus filter length mismatch");
    const MatrixXd self = self_history_columns(data, basis, target);
    MatrixXd design(data.bins(), 1 + self.cols());
    design << data.stimulus * stimulus_filter, self;
    return {std::move(design), data.spikes.col(target)};
}

GlmDataset build_coupled_design(const PopulationDataset& data, const HistoryBasis& basis, Index target,
                                const VectorXd& stimulus_filter) {
    check_target(data, target);
    check_lags(data, basis);
    if (stimulus_filter.size() != data.stimulus_dim()) throw DimensionError("stimulus filter length mismatch");
    const MatrixXd self = self_history_columns(data, basis, target);
    const MatrixXd coupling = coupling_block(coupling_traces(data, basis), target);
    MatrixXd design(data.bins(), 1 + self.cols() + coupling.cols());
    design << data.stimulus * stimulus_filter, self, coupling;
    return {std::move(design), data.spikes.col(target)};
}

StagewiseResult stagewise_population_fit(const PopulationDataset& data, const HistoryBasis& basis,
                                         const StructuredMatrix& covariance, const StagewiseOptions& options) {
    data.validate();
    check_lags(data, basis);
    const Index m = data.neurons();
    const Index p = data.stimulus_dim();
    const int k = basis.self_count();
    if (covariance.size() != p) throw DimensionError("stimulus covariance does not match stimulus dimension");
    const CanonicalFamily family = family_of(data);

    StagewiseResult out;
    const auto start12 = Clock::now();
    CoupledFilterSet stage2 = empty_filters(m, p, k);
    const MatrixXd basis_matrix = basis.self_basis();
    for (Index i = 0; i < m; ++i) {
        const VectorXd r = data.spikes.col(i);
        SufficientStats stats{data.stimulus.transpose() * r, r.sum(), data.bins()};
        if (!(stats.response_total > 0.0)) {
            throw DomainError("neuron " + std::to_string(i) + " has no spikes; its filters cannot be estimated");
        }
        // stage 1: stimulus filter from the expected log-likelihood
        FitResult s1 = mpele_lnp(stats, covariance, options.stimulus_ridge, data.bin_width);
        if (options.pcg_budget > 0) {
            const GlmDataset stim_only(data.stimulus, r);
            const Penalty penalty =
                options.stimulus_ridge ? Penalty::ridge_only(*options.stimulus_ridge) : Penalty::none();
            const ExpectationEngine engine = ExpectationEngine::analytic_exponential(family, covariance);
            const ElPreconditioner pre(engine, stats, penalty, s1.params);
            s1 = pcg_refine(family, stim_only, penalty, s1.params, options.pcg_budget, pre);
        }
        // stage 2: offset, gain and self history with the filter shape fixed
        const GlmDataset d2 = build_history_design(data, basis, i, s1.params.theta);
        GlmParams init;
        init.offset = std::log(stats.response_total / (static_cast<double>(data.bins()) * data.bin_width));
        init.theta = VectorXd::Zero(1 + k);
        FitResult s2 = fit_exact(family, d2, Penalty::none(), init, FitMethod::Newton, options.fit);
        if (!s2.converged) throw NumericalError("stage 2 did not converge for neuron " + std::to_string(i));
        stage2.offsets[i] = s2.params.offset;
        stage2.gains[i] = s2.params.theta[0];
        stage2.stimulus.col(i) = s1.params.theta;
        stage2.self_history.col(i) = s2.params.theta.tail(k);
    }
    out.stage12_seconds = seconds_since(start12);

    const auto start3 = Clock::now();
    const MatrixXd traces = coupling_traces(data, basis);
    std::vector<GlmDataset> designs;
    designs.reserve(m);
    double lambda_max = 0.0;
    for (Index i = 0; i < m; ++i) {
        MatrixXd design(data.bins(), 1 + k + (m - 1));
        design << data.stimulus * stage2.stimulus.col(i), self_history_columns(data, basis, i), coupling_block(traces, i);
        designs.emplace_back(std::move(design), data.spikes.col(i));
        GlmParams at;
        at.offset = stage2.offsets[i];
        at.theta = VectorXd::Zero(1 + k + (m - 1));
        at.theta[0] = stage2.gains[i];
        at.theta.segment(1, k) = stage2.self_history.col(i);
        if (m > 1) {
            const LoglikEvaluation e = exact_loglik(family, designs.back(), at);
            lambda_max = std::max(lambda_max, e.gradient.tail(m - 1).cwiseAbs().maxCoeff());
        }
    }
    out.lambdas = options.lambdas;
    if (out.lambdas.empty()) {
        if (!(lambda_max > 0.0)) lambda_max = 1.0;
        out.lambdas.resize(options.path_length);
        for (int q = 0; q < options.path_length; ++q) {
            out.lambdas[q] = options.path_length == 1
                                 ? lambda_max
                                 : lambda_max * std::pow(options.path_ratio, static_cast<double>(q) / (options.path_length - 1));
        }
    }
    const std::size_t path_len = out.lambdas.size();
    std::vector<std::vector<Eigen::Triplet<double>>> triplets(path_len);
    out.path.assign(path_len, stage2);
    out.kkt_residuals.assign(path_len, 0.0);
    VectorXd weights = VectorXd::Zero(1 + k + (m - 1));
    weights.tail(m - 1).setOnes();
    for (Index i = 0; i < m; ++i) {
        if (m == 1) break;
        GlmParams init;
        init.offset = stage2.offsets[i];
        init.theta = VectorXd::Zero(1 + k + (m - 1));
        init.theta[0] = stage2.gains[i];
        init.theta.segment(1, k) = stage2.self_history.col(i);
        const Penalty penalty = Penalty::l1_path(out.lambdas, weights);
        const std::vector<FitResult> fits = fit_exact_l1_path(family, designs[i], penalty, init, options.fit);
        for (std::size_t q = 0; q < path_len; ++q) {
            const GlmParams& prm = fits[q].params;
            CoupledFilterSet& f = out.path[q];
            f.offsets[i] = prm.offset;
            f.gains[i] = prm.theta[0];
            f.self_history.col(i) = prm.theta.segment(1, k);
            set_couplings(triplets[q], i, m, prm.theta.tail(m - 1));
            out.kkt_residuals[q] = std::max(out.kkt_residuals[q], fits[q].kkt_residual);
        }
    }
    for (std::size_t q = 0; q < path_len; ++q) out.path[q].coupling.setFromTriplets(triplets[q].begin(), triplets[q].end());
    out.stage2 = std::move(stage2);
    out.stage3_seconds = seconds_since(start3);
    return out;
}

FullMapResult full_map_population_fit(const PopulationDataset& data, const HistoryBasis& basis,
                                      const std::vector<double>& lambdas, const FitOptions& fit) {
    data.validate();
    check_lags(data, basis);
    const Index m = data.neurons();
    const Index p = data.stimulus_dim();
    const int k = basis.self_count();
    const CanonicalFamily family = family_of(data);
    FullMapResult out;
    out.lambdas = lambdas;
    const std::size_t path_len = lambdas.size();
    out.path.assign(path_len, empty_filters(m, p, k));
    out.kkt_residuals.assign(path_len, 0.0);
    std::vector<std::vector<Eigen::Triplet<double>>> triplets(path_len);
    const MatrixXd traces = coupling_traces(data, basis);
    VectorXd weights = VectorXd::Zero(p + k + (m - 1));
    weights.tail(m - 1).setOnes();
    for (Index i = 0; i < m; ++i) {
        MatrixXd design(data.bins(), p + k + (m - 1));
        design << data.stimulus, self_history_columns(data, basis, i), coupling_block(traces, i);
        const GlmDataset d(std::move(design), data.spikes.col(i));
        const double total = d.stats().response_total;
        if (!(total > 0.0)) throw DomainError("neuron " + std::to_string(i) + " has no spikes");
        GlmParams init;
        init.offset = std::log(total / (static_cast<double>(data.bins()) * data.bin_width));
        init.theta = VectorXd::Zero(p + k + (m - 1));
        const std::vector<FitResult> fits = fit_exact_l1_path(family, d, Penalty::l1_path(lambdas, weights), init, fit);
        for (std::size_t q = 0; q < path_len; ++q) {
            const GlmParams& prm = fits[q].params;
            CoupledFilterSet& f = out.path[q];
            f.offsets[i] = prm.offset;
            f.stimulus.col(i) = prm.theta.head(p);
            f.gains[i] = 1.0;
            f.self_history.col(i) = prm.theta.segment(p, k);
            set_couplings(triplets[q], i, m, prm.theta.tail(m - 1));
            out.kkt_residuals[q] = std::max(out.kkt_residuals[q], fits[q].kkt_residual);
        }
    }
    for (std::size_t q = 0; q < path_len; ++q) out.path[q].coupling.setFromTriplets(triplets[q].begin(), triplets[q].end());
    return out;
}

GlmParams neuron_params(const CoupledFilterSet& filters, Index target) {
    const Index m = filters.neurons();
    if (target < 0 || target >= m) throw DimensionError("neuron index out of range");
    const Index p = filters.stimulus.rows();
    const Index k = filters.self_history.rows();
    GlmParams out;
    out.offset = filters.offsets[target];
    out.theta.resize(p + k + (m - 1));
    out.theta.head(p) = filters.gains[target] * filters.stimulus.col(target);
    out.theta.segment(p, k) = filters.self_history.col(target);
    Index c = p + k;
    for (Index j = 0; j < m; ++j) {
        if (j == target) continue;
        out.theta[c++] = filters.coupling.coeff(target, j);
    }
    return out;
}

double neuron_loglik(const PopulationDataset& data, const HistoryBasis& basis, const CoupledFilterSet& filters,
                     Index target) {
    filters.validate(data.stimulus_dim(), basis.self_count());
    const GlmDataset d = build_population_design(data, basis, target);
    return full_loglik(family_of(data), d, neuron_params(filters, target));
}

double population_loglik(const PopulationDataset& data, const HistoryBasis& basis, const CoupledFilterSet& filters) {
    double total = 0.0;
    for (Index i = 0; i < data.neurons(); ++i) total += neuron_loglik(data, basis, filters, i);
    return total;
}

VectorXd history_variance(const MatrixXd& basis, const MatrixXd& hessian) {
    if (hessian.rows() != hessian.cols() || hessian.rows() != basis.cols()) {
        throw DimensionError("history basis and Hessian sizes disagree");
    }
    Eigen::LLT<MatrixXd> llt(-hessian);
    if (llt.info() != Eigen::Success) throw NumericalError("history Hessian is not negative definite");
    const MatrixXd solved = llt.solve(basis.transpose()); // (-H)^{-1} B^T
    return (basis.array() * solved.transpose().array()).rowwise().sum();
}

VectorXd history_uncertainty(const PopulationDataset& data, const HistoryBasis& basis, const CoupledFilterSet& filters,
                             Index target) {
    filters.validate(data.stimulus_dim(), basis.self_count());
    const int k = basis.self_count();
    const GlmDataset d = build_history_design(data, basis, target, filters.stimulus.col(target));
    GlmParams at;
    at.offset = filters.offsets[target];
    at.theta.resize(1 + k);
    at.theta[0] = filters.gains[target];
    at.theta.tail(k) = filters.self_history.col(target);
    const MatrixXd h = exact_loglik(family_of(data), d, at).hessian.to_dense();
    // marginal covariance of the history coefficients: block of the full inverse
    Eigen::LLT<MatrixXd> llt(-h);
    if (llt.info() != Eigen::Success) throw NumericalError("no-coupling Hessian is not negative definite");
    const MatrixXd cov = llt.solve(MatrixXd::Identity(h.rows(), h.cols()));
    const MatrixXd block = cov.bottomRightCorner(k, k);
    const MatrixXd b = basis.self_basis();
    return ((b * block).array() * b.array()).rowwise().sum();
}

double bits_per_second(const CanonicalFamily& family, const GlmDataset& data, const GlmParams& params,
                       double total_time) {
    if (!(total_time > 0.0)) throw DomainError("total time must be positive");
    const double total = data.stats().response_total;
    const double n = static_cast<double>(data.rows());
    GlmParams homog;
    homog.theta = VectorXd::Zero(data.cols());
    homog.offset = total > 0.0 ? std::log(total / (n * family.exposure())) : -745.0;
    const double gain = full_loglik(family, data, params) - full_loglik(family, data, homog);
    return gain / (total_time * std::log(2.0));
}

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
    double pos = 0.0;
    double neg = 0.0;
    double wins = 0.0;
    for (std::size_t a = 0; a < scores.size(); ++a) {
        if (!labels[a]) continue;
        pos += 1.0;
        for (std::size_t b = 0; b < scores.size(); ++b) {
            if (labels[b]) continue;
            if (scores[a] > scores[b]) wins += 1.0;
            else if (scores[a] == scores[b]) wins += 0.5;
        }
    }
    for (bool l : labels) neg += l ? 0.0 : 1.0;
    if (pos == 0.0 || neg == 0.0) throw DomainError("ROC AUC needs both positive and negative labels");
    return wins / (pos * neg);
}

CouplingScores coupling_entry_scores(const std::vector<double>& lambdas, const std::vector<CoupledFilterSet>& path,
                                     const SparseMatrixXd& truth) {
    if (lambdas.size() != path.size()) throw DimensionError("lambda path and fits differ in length");
    const Index m = truth.rows();
    CouplingScores out;
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < m; ++j) {
            if (i == j) continue;
            double entry = 0.0;
            for (std::size_t q = 0; q < path.size(); ++q) {
                if (path[q].coupling.coeff(i, j) != 0.0) {
                    entry = lambdas[q];
                    break;
                }
            }
            out.scores.push_back(entry);
            out.labels.push_back(truth.coeff(i, j) != 0.0);
        }
    }
    return out;
}

} // namespace elglm
