#include "elglm/simulate.hpp"

#include "elglm/error.hpp"

#include <cmath>
#include <string>

namespace elglm {

namespace {

MatrixXd covariance_factor(const StructuredMatrix& c) {
    const MatrixXd dense = c.to_dense();
    Eigen::LLT<MatrixXd> llt(dense);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    // semidefinite: symmetric square root
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(dense);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

} // namespace

StimulusSpec StimulusSpec::gaussian_iid(Index rows, Index cols, double sigma) {
    StimulusSpec s;
    s.kind = Kind::GaussianIid;
    s.rows = rows;
    s.cols = cols;
    s.sigma = sigma;
    s.validate();
    return s;
}

StimulusSpec StimulusSpec::gaussian_structured(Index rows, StructuredMatrix covariance) {
    StimulusSpec s;
    s.kind = Kind::GaussianStructured;
    s.rows = rows;
    s.cols = covariance.size();
    s.covariance = std::make_shared<const StructuredMatrix>(std::move(covariance));
    s.validate();
    return s;
}

StimulusSpec StimulusSpec::binary_iid(Index rows, Index cols, double mean) {
    StimulusSpec s;
    s.kind = Kind::BinaryIid;
    s.rows = rows;
    s.cols = cols;
    s.binary_mean = mean;
    s.validate();
    return s;
}

StimulusSpec StimulusSpec::weibull_iid(Index rows, Index cols, double scale, double shape) {
    StimulusSpec s;
    s.kind = Kind::WeibullIid;
    s.rows = rows;
    s.cols = cols;
    s.weibull_scale = scale;
    s.weibull_shape = shape;
    s.validate();
    return s;
}

void StimulusSpec::validate() const {
    if (rows < 1 || cols < 1) throw DomainError("stimulus dimensions must be positive");
    switch (kind) {
    case Kind::GaussianIid:
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("stimulus sigma must be positive");
        break;
    case Kind::GaussianStructured:
        if (!covariance) throw DomainError("structured stimulus needs a covariance");
        if (covariance->size() != cols) throw DimensionError("stimulus covariance size mismatch");
        break;
    case Kind::BinaryIid:
        if (!(binary_mean > 0.0 && binary_mean < 1.0)) throw DomainError("binary stimulus mean must lie in (0, 1)");
        break;
    case Kind::WeibullIid:
        if (!(weibull_scale > 0.0) || !(weibull_shape > 0.0)) {
            throw DomainError("Weibull scale and shape must be positive");
        }
        break;
    }
}

StimulusMoments StimulusSpec::moments() const {
    validate();
    switch (kind) {
    case Kind::GaussianIid:
        return StimulusMoments::centered(StructuredMatrix::scaled_identity(cols, sigma * sigma));
    case Kind::GaussianStructured:
        return {VectorXd::Zero(cols), covariance};
    case Kind::BinaryIid:
        return {VectorXd::Constant(cols, binary_mean),
                std::make_shared<const StructuredMatrix>(StructuredMatrix::identity(cols))};
    case Kind::WeibullIid: {
        const double g1 = std::tgamma(1.0 + 1.0 / weibull_shape);
        const double g2 = std::tgamma(1.0 + 2.0 / weibull_shape);
        const double mean = weibull_scale * g1;
        const double var = weibull_scale * weibull_scale * (g2 - g1 * g1);
        return {VectorXd::Constant(cols, mean),
                std::make_shared<const StructuredMatrix>(StructuredMatrix::scaled_identity(cols, var))};
    }
    }
    throw DomainError("unknown stimulus kind");
}

GeneratedStimuli gen_stimuli(const StimulusSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    GeneratedStimuli out;
    out.moments = spec.moments();
    MatrixXd x(spec.rows, spec.cols);
    switch (spec.kind) {
    case StimulusSpec::Kind::GaussianIid: {
        std::normal_distribution<double> z(0.0, spec.sigma);
        for (Index n = 0; n < spec.rows; ++n)
            for (Index j = 0; j < spec.cols; ++j) x(n, j) = z(rng);
        break;
    }
    case StimulusSpec::Kind::GaussianStructured: {
        std::normal_distribution<double> z(0.0, 1.0);
        for (Index n = 0; n < spec.rows; ++n)
            for (Index j = 0; j < spec.cols; ++j) x(n, j) = z(rng);
        x = x * covariance_factor(*spec.covariance).transpose();
        break;
    }
    case StimulusSpec::Kind::BinaryIid: {
        std::bernoulli_distribution coin(0.5);
        for (Index n = 0; n < spec.rows; ++n)
            for (Index j = 0; j < spec.cols; ++j) x(n, j) = spec.binary_mean + (coin(rng) ? 1.0 : -1.0);
        break;
    }
    case StimulusSpec::Kind::WeibullIid: {
        std::weibull_distribution<double> w(spec.weibull_shape, spec.weibull_scale);
        for (Index n = 0; n < spec.rows; ++n)
            for (Index j = 0; j < spec.cols; ++j) x(n, j) = w(rng);
        break;
    }
    }
    out.design = std::move(x);
    return out;
}

StructuredMatrix one_over_f_spatial(Index rows, Index cols) {
    if (rows < 1 || cols < 1) throw DimensionError("spatial grid needs positive dims");
    const Index total = rows * cols;
    VectorXd spectrum(total);
    double lowest_mode = 0.0;
    for (Index a = 0; a < rows; ++a) {
        for (Index b = 0; b < cols; ++b) {
            const double fa = static_cast<double>(std::min(a, rows - a)) / rows;
            const double fb = static_cast<double>(std::min(b, cols - b)) / cols;
            const double f = std::hypot(fa, fb);
            spectrum[a * cols + b] = f > 0.0 ? 1.0 / f : 0.0;
            lowest_mode = std::max(lowest_mode, spectrum[a * cols + b]);
        }
    }
    spectrum[0] = total > 1 ? lowest_mode : 1.0;
    spectrum /= spectrum.mean(); // unit marginal variance
    VectorXd base = VectorXd::Zero(total);
    for (Index a = 0; a < rows; ++a) {
        for (Index b = 0; b < cols; ++b) {
            double acc = 0.0;
            for (Index ka = 0; ka < rows; ++ka) {
                for (Index kb = 0; kb < cols; ++kb) {
                    const double phase = 2.0 * M_PI * (static_cast<double>(ka * a) / rows + static_cast<double>(kb * b) / cols);
                    acc += spectrum[ka * cols + kb] * std::cos(phase);
                }
            }
            base[a * cols + b] = acc / static_cast<double>(total);
        }
    }
    return StructuredMatrix::circulant_2d(rows, cols, std::move(base));
}

StructuredMatrix ar1_temporal(Index lags, double phi) {
    if (lags < 1) throw DimensionError("AR(1) covariance needs at least one lag");
    if (!(std::abs(phi) < 1.0)) throw DomainError("AR(1) coefficient must satisfy |phi| < 1");
    MatrixXd c(lags, lags);
    for (Index i = 0; i < lags; ++i)
        for (Index j = 0; j < lags; ++j) c(i, j) = std::pow(phi, static_cast<double>(std::abs(i - j)));
    return StructuredMatrix::dense(std::move(c));
}

StructuredMatrix spatiotemporal_covariance(Index rows, Index cols, Index lags, double phi) {
    return StructuredMatrix::kronecker({one_over_f_spatial(rows, cols), ar1_temporal(lags, phi)});
}

VectorXd gaussian_bump_filter(Index p, double center, double width, double norm) {
    if (p < 1) throw DimensionError("filter length must be positive");
    if (!(norm >= 0.0)) throw DomainError("filter norm must be nonnegative");
    VectorXd f(p);
    if (!(width > 0.0)) {
        // degenerate width: a single pixel at the (rounded) center
        f.setZero();
        const Index c = std::clamp<Index>(static_cast<Index>(std::lround(center)), 0, p - 1);
        f[c] = norm;
        return f;
    }
    for (Index j = 0; j < p; ++j) {
        const double d = (static_cast<double>(j) - center) / width;
        f[j] = std::exp(-0.5 * d * d);
    }
    const double n = f.norm();
    if (n > 0.0) f *= norm / n;
    return f;
}

VectorXd random_bump_filter(Index p, std::mt19937_64& rng, double max_norm) {
    std::normal_distribution<double> width_draw(0.0, std::sqrt(2.0));
    std::uniform_int_distribution<Index> center_draw(0, p - 1);
    std::uniform_real_distribution<double> norm_draw(0.0, max_norm);
    const double width = std::abs(width_draw(rng));
    const double center = static_cast<double>(center_draw(rng));
    const double norm = norm_draw(rng);
    return gaussian_bump_filter(p, center, width, norm);
}

VectorXd random_filter_with_norm(Index p, double norm, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    VectorXd f(p);
    for (Index j = 0; j < p; ++j) f[j] = z(rng);
    return f * (norm / f.norm());
}

CoupledFilterSet random_coupled_filters(const PopulationSpec& spec, const HistoryBasis& basis, std::uint64_t seed) {
    basis.validate();
    if (spec.neurons < 1 || spec.stimulus_dim < 1) throw DomainError("population needs neurons and stimulus dims");
    if (!(spec.base_rate > 0.0)) throw DomainError("base rate must be positive");
    std::mt19937_64 rng(seed);
    const Index m = spec.neurons;
    const int k = basis.self_count();
    CoupledFilterSet f;
    f.offsets = VectorXd::Constant(m, std::log(spec.base_rate / spec.bin_width));
    f.gains = VectorXd::Ones(m);
    f.stimulus.resize(spec.stimulus_dim, m);
    for (Index i = 0; i < m; ++i) f.stimulus.col(i) = random_filter_with_norm(spec.stimulus_dim, spec.filter_norm, rng);
    f.self_history = MatrixXd::Zero(k, m);
    if (basis.refractory) f.self_history.row(0).setConstant(2.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Eigen::Triplet<double>> triplets;
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < m; ++j) {
            if (i == j || unit(rng) >= spec.coupling_density) continue;
            const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
            triplets.emplace_back(i, j, sign * spec.coupling_scale * (0.5 + 0.5 * unit(rng)));
        }
    }
    f.coupling = SparseMatrixXd(m, m);
    f.coupling.setFromTriplets(triplets.begin(), triplets.end());
    return f;
}

PopulationDataset gen_coupled_population(const StimulusSpec& stimulus, const CoupledFilterSet& truth,
                                         const HistoryBasis& basis, double bin_width, std::uint64_t seed,
                                         double rate_cap) {
    const Index m = truth.neurons();
    truth.validate(stimulus.cols, basis.self_count());
    if (!(bin_width > 0.0)) throw DomainError("bin width must be positive");
    // stimulus and spikes use separate streams derived from the seed
    GeneratedStimuli stim = gen_stimuli(stimulus, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const Index n_bins = stimulus.rows;
    const int tau = basis.max_lag;
    const MatrixXd drive = stim.design * truth.stimulus; // N x M
    const MatrixXd self_kernels = basis.self_basis() * truth.self_history; // tau x M
    const VectorXd coupling_kernel = basis.coupling_kernel();
    const SparseMatrixXd coupling_rows = truth.coupling; // (target, source)

    MatrixXd spikes = MatrixXd::Zero(n_bins, m);
    VectorXd traces(m);
    for (Index n = 0; n < n_bins; ++n) {
        traces.setZero();
        for (int lag = 1; lag <= tau && lag <= n; ++lag) traces += coupling_kernel[lag - 1] * spikes.row(n - lag).transpose();
        const VectorXd coupled = coupling_rows * traces;
        for (Index i = 0; i < m; ++i) {
            double eta = truth.offsets[i] + truth.gains[i] * drive(n, i) + coupled[i];
            for (int lag = 1; lag <= tau && lag <= n; ++lag) eta += self_kernels(lag - 1, i) * spikes(n - lag, i);
            const double rate = bin_width * std::exp(eta);
            if (!(rate <= rate_cap)) {
                throw NumericalError("simulated rate " + std::to_string(rate) + " of neuron " + std::to_string(i) +
                                     " at bin " + std::to_string(n) + " exceeds the cap");
            }
            std::poisson_distribution<long long> draw(rate);
            spikes(n, i) = rate > 0.0 ? static_cast<double>(draw(rng)) : 0.0;
        }
    }
    return {std::move(stim.design), std::move(spikes), bin_width};
}

} // namespace elglm
