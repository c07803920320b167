#include "elglm/protocols.hpp"

#include "elglm/error.hpp"
#include "elglm/model_selection.hpp"
#include "elglm/risk.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace elglm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Batch-means standard error of one quantile of a chain column.
double quantile_stderr(const Eigen::Ref<const VectorXd>& column, double prob, int batches) {
    const Index n = column.size();
    const Index len = n / batches;
    if (batches < 2 || len < 2) return std::numeric_limits<double>::infinity();
    std::vector<double> q(batches);
    std::vector<double> buf(static_cast<std::size_t>(len));
    for (int b = 0; b < batches; ++b) {
        for (Index i = 0; i < len; ++i) buf[static_cast<std::size_t>(i)] = column[b * len + i];
        std::sort(buf.begin(), buf.end());
        q[b] = quantile_sorted(buf, prob);
    }
    double mean = 0.0;
    for (double v : q) mean += v;
    mean /= batches;
    double var = 0.0;
    for (double v : q) var += (v - mean) * (v - mean);
    var /= (batches - 1);
    return std::sqrt(var / batches);
}

GlmParams intercept_only(const GlmDataset& data, double bin_width) {
    GlmParams p;
    p.theta = VectorXd::Zero(data.cols());
    p.offset = std::log(data.stats().response_total / (static_cast<double>(data.rows()) * bin_width));
    return p;
}

} // namespace

LnpSimulation simulate_lnp_white(Index samples, Index dim, double filter_norm, double stimulus_sd, double base_rate,
                                 std::uint64_t seed) {
    if (!(base_rate > 0.0)) throw DomainError("base rate must be positive");
    GeneratedStimuli stim = gen_stimuli(StimulusSpec::gaussian_iid(samples, dim, stimulus_sd), derive_seed(seed, 0));
    std::mt19937_64 rng(derive_seed(seed, 1));
    GlmParams truth;
    truth.theta = random_filter_with_norm(dim, filter_norm, rng);
    truth.offset = std::log(base_rate);
    const CanonicalFamily family = CanonicalFamily::poisson(1.0);
    VectorXd r = simulate_responses(family, stim.design, truth, derive_seed(seed, 2));
    return {GlmDataset(std::move(stim.design), std::move(r)), truth, stimulus_sd * stimulus_sd};
}

std::vector<RidgeSelectionReplicate> run_ridge_selection(const RidgeSelectionConfig& config) {
    if (config.replicates < 1) throw DomainError("need at least one replicate");
    const CanonicalFamily family = CanonicalFamily::poisson(1.0);
    std::vector<RidgeSelectionReplicate> out;
    for (int rep = 0; rep < config.replicates; ++rep) {
        const LnpSimulation sim = simulate_lnp_white(config.samples, config.dim, config.filter_norm,
                                                     config.stimulus_sd, config.base_rate,
                                                     derive_seed(config.seed, static_cast<std::uint64_t>(rep)));
        const SufficientStats& st = sim.data.stats();
        RidgeSelectionReplicate row;
        row.beta_el = rhat_analytic(st.xtr.squaredNorm(), st.response_total, config.dim, sim.stimulus_variance);

        auto mse_at = [&](const FitResult& fit) { return (fit.params.theta - sim.truth.theta).squaredNorm(); };
        if (is_infinite_ridge(row.beta_el)) {
            // no finite starting point for the fixed point; fall back to a direct search
            row.beta_onestep = row.beta_el;
            row.mse_onestep = sim.truth.theta.squaredNorm();
            const auto t0 = Clock::now();
            const RidgeSearchResult s = maximize_laplace_evidence(family, sim.data, -10.0, 15.0);
            row.seconds_exact = seconds_since(t0);
            row.beta_exact = s.beta;
            row.mse_exact = (s.map_params.theta - sim.truth.theta).squaredNorm();
            out.push_back(row);
            continue;
        }

        auto t0 = Clock::now();
        const FixedPointResult one = rhat_fixed_point(family, sim.data, row.beta_el, 1, 0.0);
        row.seconds_onestep = seconds_since(t0);
        row.beta_onestep = one.steps.back().beta;
        row.mse_onestep = mse_at(one.steps.back().map_fit);

        t0 = Clock::now();
        try {
            const FixedPointResult full = rhat_fixed_point(family, sim.data, row.beta_el, config.max_fixed_point,
                                                           config.fixed_point_tolerance);
            row.exact_converged = full.converged;
            row.beta_exact = full.steps.back().beta;
            row.mse_exact = mse_at(full.steps.back().map_fit);
        } catch (const Error&) {
            row.exact_converged = false;
        }
        if (!row.exact_converged) {
            const RidgeSearchResult s = maximize_laplace_evidence(family, sim.data, -10.0, 15.0);
            row.beta_exact = s.beta;
            row.mse_exact = (s.map_params.theta - sim.truth.theta).squaredNorm();
        }
        row.seconds_exact = seconds_since(t0);
        out.push_back(row);
    }
    return out;
}

PosteriorComparisonResult run_posterior_comparison(const PosteriorComparisonConfig& config) {
    const CanonicalFamily family = CanonicalFamily::poisson(1.0);
    const Index p = config.dim;
    const LnpSimulation sim =
        simulate_lnp_white(config.samples, p, config.filter_norm, 1.0, config.base_rate, config.seed);
    const GlmDataset& data = sim.data;
    const SufficientStats& st = data.stats();
    if (!(st.response_total > 0.0)) throw DomainError("simulated data has no events");

    const FitResult mle = fit_exact(family, data, Penalty::none(), intercept_only(data, 1.0));
    if (!mle.converged) throw NumericalError("posterior comparison: MLE did not converge");
    const ExpectationEngine engine = ExpectationEngine::analytic_exponential(family, StructuredMatrix::identity(p));

    const Potential exact = exact_potential(family, data);
    const Potential el = el_potential(engine, st);
    const VectorXd init = mle.params.stacked();

    PosteriorComparisonResult out;
    std::vector<Index> theta_coords;
    for (Index j = 1; j <= p; ++j) theta_coords.push_back(j);

    HmcOptions hmc = config.hmc;
    out.exact_chain = hmc_chain(exact, init, hmc, "exact");
    hmc.seed = derive_seed(config.hmc.seed, 1);
    out.el_chain = hmc_chain(el, init, hmc, "el");
    out.exact_acceptance = out.exact_chain.acceptance_rate;
    out.el_acceptance = out.el_chain.acceptance_rate;

    HmcOptions sur = config.hmc;
    sur.draws = config.surrogate_draws;
    sur.seed = derive_seed(config.hmc.seed, 2);
    out.surrogate_acceptance = surrogate_hmc_chain(el, exact, init, sur).acceptance_rate;
    out.exact_reference_acceptance = hmc_chain(exact, init, sur, "exact").acceptance_rate;

    out.exact = chain_summary(out.exact_chain, theta_coords);
    out.el = chain_summary(out.el_chain, theta_coords);

    // profile EL posterior: N((N_s C)^{-1} X^T r, (N_s C)^{-1}) with C = I
    out.profile = gaussian_summary(st.xtr / st.response_total, VectorXd::Constant(p, 1.0 / st.response_total));

    MatrixXd neg_h = -exact_loglik(family, data, mle.params).hessian.to_dense();
    Eigen::LLT<MatrixXd> llt(neg_h);
    if (llt.info() != Eigen::Success) throw NumericalError("posterior comparison: Hessian at the MLE is singular");
    const MatrixXd cov = llt.solve(MatrixXd::Identity(p + 1, p + 1));
    out.laplace = gaussian_summary(mle.params.theta, cov.diagonal().tail(p));

    out.el_lower_stderr.resize(p);
    out.el_upper_stderr.resize(p);
    out.el_median_stderr.resize(p);
    int overlap = 0, inside = 0, match = 0;
    for (Index j = 0; j < p; ++j) {
        const VectorXd column = out.el_chain.samples.col(j + 1);
        out.el_lower_stderr[j] = quantile_stderr(column, 0.025, config.batches);
        out.el_upper_stderr[j] = quantile_stderr(column, 0.975, config.batches);
        out.el_median_stderr[j] = quantile_stderr(column, 0.5, config.batches);
        if (out.el.lower[j] <= out.exact.upper[j] && out.exact.lower[j] <= out.el.upper[j]) ++overlap;
        if (out.el.median[j] >= out.exact.lower[j] && out.el.median[j] <= out.exact.upper[j]) ++inside;
        if (std::abs(out.profile.lower[j] - out.el.lower[j]) <= 3.0 * out.el_lower_stderr[j] &&
            std::abs(out.profile.upper[j] - out.el.upper[j]) <= 3.0 * out.el_upper_stderr[j]) {
            ++match;
        }
    }
    out.interval_overlap = static_cast<double>(overlap) / static_cast<double>(p);
    out.median_inside = static_cast<double>(inside) / static_cast<double>(p);
    out.profile_match = static_cast<double>(match) / static_cast<double>(p);
    return out;
}

PcgExperimentResult run_pcg_experiment(const PcgExperimentConfig& config) {
    const CanonicalFamily family = CanonicalFamily::poisson(1.0);
    const StructuredMatrix covariance =
        config.correlated ? spatiotemporal_covariance(5, 5, 10) : StructuredMatrix::identity(250);
    const Index p = covariance.size();
    const Index total = config.samples + config.holdout;
    GeneratedStimuli stim = gen_stimuli(StimulusSpec::gaussian_structured(total, covariance), derive_seed(config.seed, 0));
    std::mt19937_64 rng(derive_seed(config.seed, 1));
    GlmParams truth;
    truth.theta = random_filter_with_norm(p, 1.0, rng);
    // scale so the projection x^T theta has standard deviation filter_norm
    truth.theta *= config.filter_norm / std::sqrt(truth.theta.dot(covariance.matvec(truth.theta)));
    truth.offset = std::log(config.base_rate);
    const VectorXd r = simulate_responses(family, stim.design, truth, derive_seed(config.seed, 2));
    const GlmDataset all(std::move(stim.design), r);
    const GlmDataset train = all.slice(0, config.samples);
    const GlmDataset test = all.slice(config.samples, config.holdout);

    const StructuredMatrix ridge = StructuredMatrix::scaled_identity(p, config.ridge);
    const Penalty penalty = Penalty::ridge_only(ridge);
    const FitResult start = mpele_lnp(train.stats(), covariance, &ridge);
    const ExpectationEngine engine = ExpectationEngine::analytic_exponential(family, covariance);
    const ElPreconditioner pre(engine, train.stats(), penalty, start.params);

    PcgExperimentResult out;
    const auto t0 = Clock::now();
    FitResult last = start;
    out.heldout_by_iteration.push_back(full_loglik(family, test, start.params));
    for (int k = 1; k <= config.budget; ++k) {
        last = pcg_refine(family, train, penalty, start.params, k, pre);
        out.heldout_by_iteration.push_back(full_loglik(family, test, last.params));
    }
    out.seconds_pcg = seconds_since(t0);

    const auto t1 = Clock::now();
    const FitResult map = fit_exact(family, train, penalty, start.params);
    out.seconds_map = seconds_since(t1);
    if (!map.converged) throw NumericalError("PCG experiment: reference MAP did not converge");
    out.map_iterations = map.iterations;
    out.heldout_map = full_loglik(family, test, map.params);
    out.relative_gap = std::abs(out.heldout_by_iteration.back() - out.heldout_map) / std::abs(out.heldout_map);
    return out;
}

double population_bits(const PopulationDataset& data, const HistoryBasis& basis, const CoupledFilterSet& filters) {
    const CanonicalFamily family = CanonicalFamily::poisson(data.bin_width);
    const double t = static_cast<double>(data.bins()) * data.bin_width;
    double bits = 0.0;
    for (Index i = 0; i < data.neurons(); ++i) {
        const GlmDataset d = build_population_design(data, basis, i);
        bits += bits_per_second(family, d, neuron_params(filters, i), t);
    }
    return bits;
}

PopulationExperimentResult run_population_experiment(const PopulationExperimentConfig& config) {
    const PopulationSpec& spec = config.population;
    if (!(config.train_fraction > 0.0) || !(config.validation_fraction > 0.0) ||
        config.train_fraction + config.validation_fraction >= 1.0) {
        throw DomainError("train and validation fractions must be positive and leave a test split");
    }
    PopulationExperimentResult out;
    out.truth = random_coupled_filters(spec, config.basis, derive_seed(config.seed, 0));
    const StimulusSpec stim = StimulusSpec::gaussian_iid(spec.bins, spec.stimulus_dim, 1.0);
    const PopulationDataset data =
        gen_coupled_population(stim, out.truth, config.basis, spec.bin_width, derive_seed(config.seed, 1), spec.rate_cap);

    const auto n_train = static_cast<Index>(std::floor(config.train_fraction * static_cast<double>(spec.bins)));
    const auto n_val = static_cast<Index>(std::floor(config.validation_fraction * static_cast<double>(spec.bins)));
    const PopulationDataset train = data.slice(0, n_train);
    const PopulationDataset val = data.slice(n_train, n_val);
    const PopulationDataset test = data.slice(n_train + n_val, spec.bins - n_train - n_val);

    StagewiseOptions opts;
    opts.path_length = config.path_length;
    opts.path_ratio = config.path_ratio;
    out.staged = stagewise_population_fit(train, config.basis, StructuredMatrix::identity(spec.stimulus_dim), opts);
    out.lambdas = out.staged.lambdas;
    out.stage12_seconds = out.staged.stage12_seconds;
    out.stage3_seconds = out.staged.stage3_seconds;

    // support recovery
    for (const auto& f : out.staged.path) {
        std::vector<double> scores;
        std::vector<bool> labels;
        const MatrixXd est = MatrixXd(f.coupling);
        const MatrixXd tru = MatrixXd(out.truth.coupling);
        for (Index i = 0; i < est.rows(); ++i) {
            for (Index j = 0; j < est.cols(); ++j) {
                if (i == j) continue;
                scores.push_back(std::abs(est(i, j)));
                labels.push_back(tru(i, j) != 0.0);
            }
        }
        out.auc_path.push_back(roc_auc(scores, labels));
    }
    out.auc_best = *std::max_element(out.auc_path.begin(), out.auc_path.end());
    const CouplingScores entry = coupling_entry_scores(out.lambdas, out.staged.path, out.truth.coupling);
    out.auc_entry = roc_auc(entry.scores, entry.labels);

    // lambda chosen on validation bits, reported on the test split
    auto pick = [&](const std::vector<CoupledFilterSet>& path, double& lambda) {
        std::size_t best = 0;
        double best_bits = -std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < path.size(); ++q) {
            const double b = population_bits(val, config.basis, path[q]);
            if (b > best_bits) {
                best_bits = b;
                best = q;
            }
        }
        lambda = out.lambdas[best];
        return best;
    };
    const std::size_t qs = pick(out.staged.path, out.staged_lambda);
    out.staged_test_bits = population_bits(test, config.basis, out.staged.path[qs]);
    out.staged_test_loglik = population_loglik(test, config.basis, out.staged.path[qs]);

    if (config.run_full_map) {
        const auto t0 = Clock::now();
        const FullMapResult full = full_map_population_fit(train, config.basis, out.lambdas);
        out.full_seconds = seconds_since(t0);
        const std::size_t qf = pick(full.path, out.full_lambda);
        out.full_test_bits = population_bits(test, config.basis, full.path[qf]);
        out.full_test_loglik = population_loglik(test, config.basis, full.path[qf]);
    }
    return out;
}

std::vector<TimingPoint> time_loglik(const std::vector<Index>& sizes, Index dim, int repeats, std::uint64_t seed) {
    if (repeats < 1) throw DomainError("need at least one timing repeat");
    const CanonicalFamily family = CanonicalFamily::poisson(1.0);
    const ExpectationEngine engine = ExpectationEngine::analytic_exponential(family, StructuredMatrix::identity(dim));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    GlmParams params;
    params.offset = std::log(0.1);
    params.theta = VectorXd::Zero(dim);
    for (Index j = 0; j < dim; ++j) params.theta[j] = 0.1 * z(rng);

    auto best_per_call = [&](auto&& call) {
        // batch enough calls that one batch lasts at least ~2 ms
        int batch = 1;
        for (;;) {
            const auto t0 = Clock::now();
            for (int b = 0; b < batch; ++b) call();
            if (seconds_since(t0) >= 2e-3 || batch >= (1 << 20)) break;
            batch *= 4;
        }
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = Clock::now();
            for (int b = 0; b < batch; ++b) call();
            best = std::min(best, seconds_since(t0) / batch);
        }
        return best;
    };

    std::vector<TimingPoint> out;
    volatile double sink = 0.0;
    for (Index n : sizes) {
        MatrixXd x(n, dim);
        for (Index j = 0; j < dim; ++j) {
            for (Index i = 0; i < n; ++i) x(i, j) = z(rng);
        }
        VectorXd r = simulate_responses(family, x, params, rng());
        const GlmDataset data(std::move(x), std::move(r));
        TimingPoint t;
        t.samples = n;
        t.el_seconds = best_per_call([&] { sink = sink + el_loglik(engine, data.stats(), params).value; });
        t.exact_seconds = best_per_call([&] { sink = sink + exact_loglik(family, data, params).value; });
        out.push_back(t);
    }
    return out;
}

} // namespace elglm
