#include "commands.hpp"

#include "elglm/dataset_io.hpp"
#include "elglm/error.hpp"
#include "elglm/estimators.hpp"
#include "elglm/model_selection.hpp"
#include "elglm/protocols.hpp"
#include "elglm/risk.hpp"
#include "elglm/sampling.hpp"
#include "elglm/serialization.hpp"
#include "elglm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace elglm::cli {

namespace fs = std::filesystem;

fs::path RunContext::file(const std::string& name) {
    outputs_.push_back(name);
    return dir_ / name;
}

namespace {

// JSON has no infinities: non-finite values go out as "inf", "-inf", "nan"
Json number(double x) {
    if (std::isfinite(x)) return x;
    return format_double(x);
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, 0.5);
}

Index positive_index(ConfigNode& c, const std::string& key, long long fallback) {
    const long long v = c.integer(key, fallback);
    if (v < 1) throw ConfigError(c.path_of(key) + ": must be >= 1");
    return static_cast<Index>(v);
}

double positive_number(ConfigNode& c, const std::string& key, double fallback) {
    const double v = c.number(key, fallback);
    if (!(v > 0.0)) throw ConfigError(c.path_of(key) + ": must be positive");
    return v;
}

// ---- simulated single-neuron datasets ---------------------------------------

struct SimulatedGlm {
    CanonicalFamily family;
    GlmDataset data;
    GlmParams truth;
    StimulusMoments moments;
};

StimulusSpec stimulus_from(ConfigNode& s, Index rows) {
    const std::string kind = s.text("kind", "gaussian");
    if (kind == "gaussian") {
        return StimulusSpec::gaussian_iid(rows, positive_index(s, "dim", 10), positive_number(s, "sigma", 1.0));
    }
    if (kind == "structured") return StimulusSpec::gaussian_structured(rows, structured_from_json(s.raw("covariance")));
    if (kind == "spatiotemporal") {
        const Index h = positive_index(s, "height", 5), w = positive_index(s, "width", 5);
        const Index lags = positive_index(s, "lags", 10);
        return StimulusSpec::gaussian_structured(rows, spatiotemporal_covariance(h, w, lags, s.number("phi", 0.9)));
    }
    if (kind == "binary") return StimulusSpec::binary_iid(rows, positive_index(s, "dim", 10), s.number("mean", 0.36));
    if (kind == "weibull") {
        return StimulusSpec::weibull_iid(rows, positive_index(s, "dim", 10), positive_number(s, "scale", 0.15),
                                         positive_number(s, "shape", 0.5));
    }
    throw ConfigError(s.path_of("kind") + ": expected gaussian, structured, spatiotemporal, binary or weibull");
}

SimulatedGlm simulate_glm(ConfigNode& c, std::uint64_t seed) {
    const CanonicalFamily family = c.has("family") ? family_from_json(c.raw("family")) : CanonicalFamily::poisson(1.0);
    const Index rows = positive_index(c, "samples", 1000);
    ConfigNode s = c.child("stimulus");
    const StimulusSpec spec = stimulus_from(s, rows);
    spec.validate();
    GeneratedStimuli stim = gen_stimuli(spec, derive_seed(seed, 0));
    std::mt19937_64 rng(derive_seed(seed, 1));
    ConfigNode f = c.child("filter");
    const std::string kind = f.text("kind", "random");
    const double norm = f.number("norm", 1.0);
    GlmParams truth;
    if (kind == "random") {
        truth.theta = random_filter_with_norm(spec.cols, norm, rng);
    } else if (kind == "bump") {
        truth.theta = gaussian_bump_filter(spec.cols, f.number("center", 0.5 * static_cast<double>(spec.cols)),
                                           positive_number(f, "width", 2.0), norm);
    } else {
        throw ConfigError(f.path_of("kind") + ": expected random or bump");
    }
    truth.offset = c.number("offset", family.kind() == FamilyKind::Poisson ? std::log(0.1) : 0.0);
    VectorXd r = simulate_responses(family, stim.design, truth, derive_seed(seed, 2));
    return {family, GlmDataset(std::move(stim.design), std::move(r)), truth, spec.moments()};
}

HistoryBasis basis_from(ConfigNode& b) {
    HistoryBasis basis;
    basis.cosine_count = static_cast<int>(b.integer("cosine_count", basis.cosine_count));
    basis.cosine_spacing = b.number("cosine_spacing", basis.cosine_spacing);
    basis.refractory = b.flag("refractory", basis.refractory);
    basis.coupling_decay = b.number("coupling_decay", basis.coupling_decay);
    basis.max_lag = static_cast<int>(b.integer("max_lag", basis.max_lag));
    basis.validate();
    return basis;
}

PopulationSpec population_from(ConfigNode& c) {
    PopulationSpec p;
    p.neurons = positive_index(c, "neurons", p.neurons);
    p.bins = positive_index(c, "bins", p.bins);
    p.stimulus_dim = positive_index(c, "stimulus_dim", p.stimulus_dim);
    p.bin_width = positive_number(c, "bin_width", p.bin_width);
    p.base_rate = positive_number(c, "base_rate", p.base_rate);
    p.filter_norm = c.number("filter_norm", p.filter_norm);
    p.coupling_density = c.number("coupling_density", p.coupling_density);
    p.coupling_scale = c.number("coupling_scale", p.coupling_scale);
    p.rate_cap = positive_number(c, "rate_cap", p.rate_cap);
    if (p.coupling_density < 0.0 || p.coupling_density > 1.0) {
        throw ConfigError(c.path_of("coupling_density") + ": must lie in [0, 1]");
    }
    return p;
}

Json timing_note() { return {{"note", "wall-clock values; not part of the reproducible outputs"}}; }

} // namespace

// ---- simulate --------------------------------------------------------------------

void run_simulate(ConfigNode& config, std::uint64_t seed, RunContext& run) {
    if (config.has("population")) {
        ConfigNode pc = config.child("population");
        const PopulationSpec spec = population_from(pc);
        ConfigNode bc = config.child("basis");
        const HistoryBasis basis = basis_from(bc);
        const CoupledFilterSet truth = random_coupled_filters(spec, basis, derive_seed(seed, 0));
        const PopulationDataset data =
            gen_coupled_population(StimulusSpec::gaussian_iid(spec.bins, spec.stimulus_dim, 1.0), truth, basis,
                                   spec.bin_width, derive_seed(seed, 1), spec.rate_cap);
        run.file("population.json");
        run.file("population.stimulus.bin");
        run.file("population.spikes.bin");
        write_population(run.dir(), "population", data);
        write_json(run.file("truth.json"), {{"filters", to_json(truth)}, {"basis", to_json(basis)}});
        return;
    }
    const SimulatedGlm sim = simulate_glm(config, seed);
    run.file("dataset.json");
    run.file("dataset.X.bin");
    run.file("dataset.r.bin");
    write_dataset(run.dir(), "dataset", sim.family, sim.data);
    write_json(run.file("truth.json"), {{"params", to_json(sim.truth)},
                                        {"family", to_json(sim.family)},
                                        {"stimulus_mean", to_json(sim.moments.mean)},
                                        {"stimulus_covariance", to_json(*sim.moments.covariance)}});
}

// ---- fit ---------------------------------------------------------------------------

void run_fit(ConfigNode& config, std::uint64_t seed, RunContext& run) {
    std::optional<SimulatedGlm> sim;
    std::optional<LoadedDataset> loaded;
    if (config.has("dataset") == config.has("simulate")) {
        throw ConfigError("/dataset or /simulate: exactly one data source is required");
    }
    if (config.has("dataset")) {
        loaded.emplace(read_dataset(config.text("dataset", "")));
    } else {
        ConfigNode sc = config.child("simulate");
        sim.emplace(simulate_glm(sc, seed));
    }
    const CanonicalFamily family = sim ? sim->family : loaded->family;
    const GlmDataset& data = sim ? sim->data : loaded->data;
    const Index p = data.cols();

    // covariate covariance for the EL estimators
    std::shared_ptr<const StructuredMatrix> covariance;
    VectorXd mean = VectorXd::Zero(p);
    const std::string cov_source = config.has("covariance") && config.raw("covariance").is_string()
                                       ? config.text("covariance", "")
                                       : (config.has("covariance") ? "given" : (sim ? "truth" : "sample"));
    if (cov_source == "given") {
        covariance = std::make_shared<StructuredMatrix>(structured_from_json(config.raw("covariance")));
    } else if (cov_source == "truth") {
        if (!sim) throw ConfigError("/covariance: 'truth' needs a simulated dataset");
        covariance = sim->moments.covariance;
        mean = sim->moments.mean;
    } else if (cov_source == "identity") {
        covariance = std::make_shared<StructuredMatrix>(StructuredMatrix::identity(p));
    } else if (cov_source == "sample") {
        const StimulusMoments m = StimulusMoments::from_samples(data.design());
        covariance = m.covariance;
        mean = m.mean;
    } else {
        throw ConfigError("/covariance: expected a structured matrix, 'truth', 'identity' or 'sample'");
    }
    if (covariance->size() != p) throw ConfigError("/covariance: size does not match the design");

    std::optional<StructuredMatrix> ridge;
    if (config.has("ridge")) {
        const Json& rj = config.raw("ridge");
        ridge = rj.is_number() ? StructuredMatrix::scaled_identity(p, rj.get<double>()) : structured_from_json(rj);
        if (ridge->size() != p) throw ConfigError("/ridge: size does not match the design");
    }
    const Penalty smooth = ridge ? Penalty::ridge_only(*ridge) : Penalty::none();
    const StructuredMatrix* ridge_ptr = ridge ? &*ridge : nullptr;

    FitOptions options;
    options.max_iterations = static_cast<int>(config.integer("max_iterations", options.max_iterations));
    options.gradient_tolerance = config.number("tolerance", options.gradient_tolerance);
    const std::string method_name = config.text("method", "newton");
    if (method_name != "newton" && method_name != "cg") throw ConfigError("/method: expected newton or cg");
    const FitMethod method = method_name == "cg" ? FitMethod::ConjugateGradient : FitMethod::Newton;

    GlmParams init;
    init.theta = VectorXd::Zero(p);
    const double nbar = data.stats().response_total / static_cast<double>(data.rows());
    if (family.kind() == FamilyKind::Poisson) init.offset = std::log(std::max(nbar, 1e-12) / family.bin_width());
    if (family.kind() == FamilyKind::Gaussian) init.offset = nbar;
    if (family.kind() == FamilyKind::Bernoulli) init.offset = std::log(std::clamp(nbar, 1e-12, 1 - 1e-12) / (1 - std::clamp(nbar, 1e-12, 1 - 1e-12)));

    auto make_engine = [&]() {
        const std::string kind = config.text("engine", "auto");
        const StimulusMoments moments{mean, covariance};
        if (kind == "clt") return build_clt_engine(moments, family, static_cast<int>(config.integer("clt_order", 50)));
        if (kind == "elliptic") {
            const double r_max = positive_number(config, "elliptic_radius", 10.0);
            return ExpectationEngine::elliptic(*covariance, build_elliptic_table(family, RadialLaw::gaussian(),
                                                                                  default_elliptic_grid(r_max)));
        }
        if (kind != "auto" && kind != "analytic") throw ConfigError("/engine: expected auto, analytic, clt or elliptic");
        if (kind == "auto" && (family.kind() == FamilyKind::Bernoulli || mean.cwiseAbs().maxCoeff() > 1e-12)) {
            return build_clt_engine(moments, family, static_cast<int>(config.integer("clt_order", 50)));
        }
        return ExpectationEngine::analytic(family, moments);
    };

    auto lambda_path = [&]() {
        std::vector<double> l = config.numbers("lambdas", {});
        if (l.empty()) {
            l = default_lambda_path(data.stats().xtr, static_cast<int>(config.integer("lambda_count", 30)),
                                    config.number("lambda_ratio", 1e-3));
        }
        return l;
    };

    const std::string estimator = config.text("estimator", "mle");
    Json result;
    if (estimator == "mle" || estimator == "map") {
        if (estimator == "map" && !ridge) throw ConfigError("/ridge: required for the map estimator");
        const FitResult fit = fit_exact(family, data, estimator == "map" ? smooth : Penalty::none(), init, method, options);
        result = to_json(fit);
    } else if (estimator == "mele") {
        if (family.kind() != FamilyKind::Gaussian) throw ConfigError("/estimator: mele needs the gaussian family");
        result = to_json(mele_gaussian(data.stats(), *covariance, ridge_ptr));
    } else if (estimator == "mpele") {
        if (family.kind() != FamilyKind::Poisson) throw ConfigError("/estimator: mpele needs the poisson family");
        result = to_json(mpele_lnp(data.stats(), *covariance, ridge_ptr, family.bin_width()));
    } else if (estimator == "el") {
        result = to_json(fit_el(make_engine(), data.stats(), smooth, init, options));
    } else if (estimator == "pcg") {
        const ExpectationEngine engine = make_engine();
        const FitResult start = fit_el(engine, data.stats(), smooth, init, options);
        const ElPreconditioner pre(engine, data.stats(), smooth, start.params);
        const int budget = static_cast<int>(config.integer("pcg_budget", 10));
        result = to_json(pcg_refine(family, data, smooth, start.params, budget, pre));
    } else if (estimator == "l1_path" || estimator == "mpele_l1_path") {
        const std::vector<double> lambdas = lambda_path();
        std::vector<FitResult> fits;
        if (estimator == "l1_path") {
            fits = fit_exact_l1_path(family, data, Penalty::l1_path(lambdas), init, options);
        } else {
            const QuadraticScale scale =
                family.kind() == FamilyKind::Poisson ? QuadraticScale::Events : QuadraticScale::Samples;
            fits = covariance->is_diagonal()
                       ? mpele_l1_path_diagonal(data.stats(), *covariance, lambdas, scale, family.bin_width())
                       : mpele_l1_general_path(data.stats(), *covariance, lambdas, scale, {}, family.bin_width());
        }
        write_fit_path(run.file("path.csv"), fits);
        result = Json::array();
        for (const auto& f : fits) result.push_back(to_json(f));
    } else {
        throw ConfigError("/estimator: expected mle, map, mele, mpele, el, pcg, l1_path or mpele_l1_path");
    }
    // wall-clock fields go to timings.json so fit.json is reproducible
    Json times = Json::array();
    auto strip = [&times](Json& fit) {
        times.push_back(fit["wall_seconds"]);
        fit.erase("wall_seconds");
    };
    if (result.is_array()) {
        for (auto& f : result) strip(f);
    } else {
        strip(result);
    }
    write_json(run.file("timings.json"), {{"wall_seconds", times}, {"about", timing_note()}});
    Json out{{"estimator", estimator}, {"family", to_json(family)}, {"result", result}};
    if (sim) out["truth"] = to_json(sim->truth);
    write_json(run.file("fit.json"), out);
}

// ---- select ------------------------------------------------------------------------

void run_select(ConfigNode& config, std::uint64_t seed, RunContext& run) {
    const std::string protocol = config.text("protocol", "rhat");
    if (protocol != "rhat") throw ConfigError("/protocol: only 'rhat' is available");
    RidgeSelectionConfig rc;
    rc.dim = positive_index(config, "dim", rc.dim);
    rc.samples = positive_index(config, "samples", rc.samples);
    rc.filter_norm = config.number("filter_norm", rc.filter_norm);
    rc.stimulus_sd = positive_number(config, "stimulus_sd", rc.stimulus_sd);
    rc.base_rate = positive_number(config, "base_rate", rc.base_rate);
    rc.replicates = static_cast<int>(positive_index(config, "replicates", rc.replicates));
    rc.max_fixed_point = static_cast<int>(positive_index(config, "max_fixed_point", rc.max_fixed_point));
    rc.fixed_point_tolerance = positive_number(config, "tolerance", rc.fixed_point_tolerance);
    rc.seed = seed;
    ConfigNode sweep = config.child("sweep");
    const double from = sweep.number("from", -4.0), to = sweep.number("to", 10.0);
    const Index count = positive_index(sweep, "count", 29);

    const std::vector<RidgeSelectionReplicate> reps = run_ridge_selection(rc);
    CsvWriter csv(run.file("replicates.csv"),
                  {"replicate", "beta_el", "beta_exact", "beta_onestep", "exact_converged", "mse_exact", "mse_onestep"});
    Json per = Json::array();
    Json times = Json::array();
    std::vector<double> err_el, err_one;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        const auto& r = reps[i];
        csv.row({std::to_string(i), format_double(r.beta_el), format_double(r.beta_exact), format_double(r.beta_onestep),
                 r.exact_converged ? "1" : "0", format_double(r.mse_exact), format_double(r.mse_onestep)});
        per.push_back({{"beta_el", number(r.beta_el)},
                       {"beta_exact", number(r.beta_exact)},
                       {"beta_onestep", number(r.beta_onestep)},
                       {"exact_converged", r.exact_converged}});
        times.push_back({{"exact", r.seconds_exact}, {"onestep", r.seconds_onestep}});
        err_el.push_back(std::abs(std::log(r.beta_el / r.beta_exact)));
        err_one.push_back(std::abs(std::log(r.beta_onestep / r.beta_exact)));
    }
    write_json(run.file("summary.json"), {{"replicates", per},
                                          {"median_abs_log_ratio_el", number(median(err_el))},
                                          {"median_abs_log_ratio_onestep", number(median(err_one))}});
    write_json(run.file("timings.json"), {{"replicates", times}, {"about", timing_note()}});

    // evidence curves on the first replicate's data
    const LnpSimulation sim = simulate_lnp_white(rc.samples, rc.dim, rc.filter_norm, rc.stimulus_sd, rc.base_rate,
                                                 derive_seed(seed, 0));
    const CanonicalFamily family = CanonicalFamily::poisson(1.0);
    const StructuredMatrix cov = StructuredMatrix::scaled_identity(rc.dim, sim.stimulus_variance);
    const ExpectationEngine engine = ExpectationEngine::analytic_exponential(family, cov);
    const SufficientStats& st = sim.data.stats();
    CsvWriter ev(run.file("evidence_sweep.csv"), {"log_beta", "laplace_exact", "laplace_el", "el_closed_form"});
    GlmParams warm;
    warm.theta = VectorXd::Zero(rc.dim);
    warm.offset = std::log(st.response_total / static_cast<double>(st.count));
    for (Index k = 0; k < count; ++k) {
        const double lb = count == 1 ? from : from + (to - from) * static_cast<double>(k) / static_cast<double>(count - 1);
        const double beta = std::exp(lb);
        const StructuredMatrix ridge = StructuredMatrix::scaled_identity(rc.dim, beta);
        const FitResult map = ridge_map_fit(family, sim.data, beta, &warm);
        warm = map.params;
        const FitResult mpele = mpele_lnp(st, cov, &ridge);
        const double exact = laplace_evidence(family, sim.data, ridge, map.params, EvidenceMode::Exact).log_evidence;
        const double el =
            laplace_evidence(family, sim.data, ridge, mpele.params, EvidenceMode::El, &engine).log_evidence;
        ev.row(std::vector<double>{lb, exact, el,
                                   el_log_evidence_scalar(beta, st.xtr.squaredNorm(), st.response_total, rc.dim,
                                                          sim.stimulus_variance)});
    }
}

// ---- sample ------------------------------------------------------------------------

void run_sample(ConfigNode& config, std::uint64_t seed, RunContext& run) {
    PosteriorComparisonConfig pc;
    pc.samples = positive_index(config, "samples", pc.samples);
    pc.dim = positive_index(config, "dim", pc.dim);
    pc.filter_norm = config.number("filter_norm", pc.filter_norm);
    pc.base_rate = positive_number(config, "base_rate", pc.base_rate);
    pc.hmc.step = positive_number(config, "step", pc.hmc.step);
    pc.hmc.leapfrog = static_cast<int>(positive_index(config, "leapfrog", pc.hmc.leapfrog));
    pc.hmc.draws = static_cast<int>(positive_index(config, "draws", pc.hmc.draws));
    pc.hmc.burn_in = static_cast<int>(config.integer("burn_in", pc.hmc.burn_in));
    pc.surrogate_draws = static_cast<int>(positive_index(config, "surrogate_draws", pc.surrogate_draws));
    pc.batches = static_cast<int>(positive_index(config, "batches", pc.batches));
    pc.seed = seed;
    pc.hmc.seed = derive_seed(seed, 100);
    const PosteriorComparisonResult r = run_posterior_comparison(pc);
    for (const char* name : {"exact", "el"}) {
        const Chain& c = std::string(name) == "exact" ? r.exact_chain : r.el_chain;
        run.file(std::string("chain_") + name + ".json");
        run.file(std::string("chain_") + name + ".samples.bin");
        write_chain(run.dir(), std::string("chain_") + name, c);
    }
    write_quantile_summary(run.file("summary_exact.csv"), r.exact);
    write_quantile_summary(run.file("summary_el.csv"), r.el);
    write_quantile_summary(run.file("summary_profile.csv"), r.profile);
    write_quantile_summary(run.file("summary_laplace.csv"), r.laplace);
    write_json(run.file("summary.json"), {{"acceptance_exact", r.exact_acceptance},
                                          {"acceptance_el", r.el_acceptance},
                                          {"acceptance_surrogate", r.surrogate_acceptance},
                                          {"acceptance_exact_reference", r.exact_reference_acceptance},
                                          {"interval_overlap_fraction", r.interval_overlap},
                                          {"median_inside_fraction", r.median_inside},
                                          {"profile_match_fraction", r.profile_match}});
}

// ---- risk --------------------------------------------------------------------------

void run_risk(ConfigNode& config, std::uint64_t seed, RunContext& run) {
    const std::vector<double> snrs = config.numbers("snr", {0.2, 1.0, 5.0});
    std::vector<double> rhos = config.numbers("rho", {});
    if (rhos.empty()) {
        for (int k = 1; k <= 60; ++k) rhos.push_back(0.05 * k);
    }
    const std::vector<std::string> names = config.texts("estimators", {"mele", "mle", "mpele", "map"});
    const std::vector<double> cs = config.numbers("c", {1.0});
    const bool optimal = config.flag("optimal_c", true);
    std::vector<EstimatorKind> kinds;
    for (const auto& n : names) kinds.push_back(estimator_from_name(n));
    for (double r : rhos) {
        if (!(r > 0.0)) throw ConfigError("/rho: values must be positive");
    }
    for (double s : snrs) {
        if (!(s >= 0.0)) throw ConfigError("/snr: values must be nonnegative");
    }

    CsvWriter csv(run.file("risk_curve.csv"), {"rho", "snr", "c", "method", "source", "samples", "mse", "stderr"});
    auto emit = [&](double rho, double snr, double c, const std::string& method, const std::string& source, Index n,
                    double mse, double se) {
        csv.row({format_double(rho), format_double(snr), format_double(c), method, source, std::to_string(n),
                 format_double(mse), format_double(se)});
    };
    for (double snr : snrs) {
        for (double rho : rhos) {
            for (EstimatorKind k : kinds) {
                const std::string name(estimator_name(k));
                const bool penalized = k == EstimatorKind::Mpele || k == EstimatorKind::Map;
                if (k == EstimatorKind::Mle && rho >= 1.0) continue;
                for (double c : penalized ? cs : std::vector<double>{0.0}) {
                    if (k == EstimatorKind::Map && rho >= 1.0 && !(c > 0.0)) continue;
                    emit(rho, snr, c, name, "asymptotic", 0, mse_asymptotic(k, rho, snr, c), 0.0);
                }
                if (penalized && optimal) {
                    const OptimalRidge o = optimal_ridge(k, rho, snr);
                    emit(rho, snr, o.ridge_c, name, "asymptotic_optimal_c", 0, o.mse, 0.0);
                }
            }
        }
    }
    for (long long n : config.integers("finite_samples", {})) {
        if (n < 2) throw ConfigError("/finite_samples: values must be >= 2");
        for (double snr : snrs) {
            for (double rho : rhos) {
                const auto p = static_cast<Index>(std::lround(rho * static_cast<double>(n)));
                if (p < 1) continue;
                for (EstimatorKind k : kinds) {
                    if (k == EstimatorKind::Map) continue;
                    if (k == EstimatorKind::Mle && !(n > p + 1)) continue;
                    const bool penalized = k == EstimatorKind::Mpele;
                    for (double c : penalized ? cs : std::vector<double>{0.0}) {
                        const RiskSpec spec{static_cast<Index>(n), p, snr, c, k};
                        emit(rho, snr, c, std::string(estimator_name(k)), "closed_form", n, mse_closed_form(spec), 0.0);
                    }
                }
            }
        }
    }
    if (config.has("monte_carlo")) {
        ConfigNode mc = config.child("monte_carlo");
        const Index n = positive_index(mc, "samples", 2000);
        const int trials = static_cast<int>(positive_index(mc, "trials", 20));
        if (trials < 2) throw ConfigError("/monte_carlo/trials: must be >= 2");
        std::uint64_t point = 0;
        for (double snr : snrs) {
            for (double rho : rhos) {
                const auto p = static_cast<Index>(std::lround(rho * static_cast<double>(n)));
                ++point;
                if (p < 1) continue;
                std::mt19937_64 rng(derive_seed(seed, point));
                const VectorXd theta = random_filter_with_norm(p, std::sqrt(snr), rng);
                for (double c : cs) {
                    std::vector<EstimatorKind> run_kinds;
                    for (EstimatorKind k : kinds) {
                        const bool penalized = k == EstimatorKind::Mpele || k == EstimatorKind::Map;
                        if (!penalized && c != cs.front()) continue;
                        if (k == EstimatorKind::Mle && p >= n - 1) continue;
                        if (k == EstimatorKind::Map && !(c > 0.0) && p >= n) continue;
                        run_kinds.push_back(k);
                    }
                    if (run_kinds.empty()) continue;
                    const auto est = mc_mse_many(run_kinds, n, theta, trials, derive_seed(seed, 1000000 + point), c);
                    for (std::size_t i = 0; i < run_kinds.size(); ++i) {
                        const bool penalized =
                            run_kinds[i] == EstimatorKind::Mpele || run_kinds[i] == EstimatorKind::Map;
                        emit(rho, snr, penalized ? c : 0.0, std::string(estimator_name(run_kinds[i])), "monte_carlo", n,
                             est[i].mse, est[i].stderr_);
                    }
                }
            }
        }
    }
    Json crossings = Json::array();
    for (double snr : snrs) crossings.push_back({{"snr", snr}, {"crossover_rho", crossover_rho(snr)}});
    write_json(run.file("crossover.json"), crossings);
}

// ---- population --------------------------------------------------------------------

void run_population(ConfigNode& config, std::uint64_t seed, RunContext& run) {
    PopulationExperimentConfig pc;
    pc.population = population_from(config);
    ConfigNode bc = config.child("basis");
    pc.basis = basis_from(bc);
    pc.train_fraction = config.number("train_fraction", pc.train_fraction);
    pc.validation_fraction = config.number("validation_fraction", pc.validation_fraction);
    pc.path_length = static_cast<int>(positive_index(config, "path_length", pc.path_length));
    pc.path_ratio = positive_number(config, "path_ratio", pc.path_ratio);
    pc.run_full_map = config.flag("full_map", pc.run_full_map);
    pc.seed = seed;
    const PopulationExperimentResult r = run_population_experiment(pc);

    CsvWriter csv(run.file("path.csv"), {"lambda", "auc", "kkt_residual", "nonzero_couplings"});
    for (std::size_t q = 0; q < r.lambdas.size(); ++q) {
        csv.row({format_double(r.lambdas[q]), format_double(r.auc_path[q]), format_double(r.staged.kkt_residuals[q]),
                 std::to_string(r.staged.path[q].coupling.nonZeros())});
    }
    std::size_t chosen = 0;
    for (std::size_t q = 0; q < r.lambdas.size(); ++q) {
        if (r.lambdas[q] == r.staged_lambda) chosen = q;
    }
    write_json(run.file("truth.json"), {{"filters", to_json(r.truth)}, {"basis", to_json(pc.basis)}});
    write_json(run.file("filters.json"), {{"lambda", r.staged_lambda}, {"filters", to_json(r.staged.path[chosen])}});
    Json summary{{"auc_entry", r.auc_entry},
                 {"auc_best", r.auc_best},
                 {"staged_lambda", r.staged_lambda},
                 {"staged_test_bits", r.staged_test_bits},
                 {"staged_test_loglik", r.staged_test_loglik}};
    if (pc.run_full_map) {
        summary["full_lambda"] = r.full_lambda;
        summary["full_test_bits"] = r.full_test_bits;
        summary["full_test_loglik"] = r.full_test_loglik;
    }
    write_json(run.file("summary.json"), summary);
    write_json(run.file("timings.json"), {{"stage12_seconds", r.stage12_seconds},
                                          {"stage3_seconds", r.stage3_seconds},
                                          {"full_map_seconds", r.full_seconds},
                                          {"about", timing_note()}});
}

// ---- bench -------------------------------------------------------------------------

void run_bench(ConfigNode& config, std::uint64_t seed, RunContext& run) {
    const std::string kind = config.text("kind", "loglik");
    if (kind == "loglik") {
        std::vector<Index> sizes;
        for (long long n : config.integers("sizes", {1000, 10000, 100000, 1000000})) {
            if (n < 1) throw ConfigError("/sizes: values must be >= 1");
            sizes.push_back(static_cast<Index>(n));
        }
        const Index dim = positive_index(config, "dim", 20);
        const int repeats = static_cast<int>(positive_index(config, "repeats", 5));
        const auto points = time_loglik(sizes, dim, repeats, seed);
        CsvWriter csv(run.file("timings.csv"), {"samples", "dim", "el_seconds", "exact_seconds"});
        for (const auto& t : points) {
            csv.row({std::to_string(t.samples), std::to_string(dim), format_double(t.el_seconds),
                     format_double(t.exact_seconds)});
        }
        return;
    }
    if (kind == "pcg") {
        PcgExperimentConfig pc;
        pc.samples = positive_index(config, "samples", pc.samples);
        pc.holdout = positive_index(config, "holdout", pc.holdout);
        pc.correlated = config.flag("correlated", pc.correlated);
        pc.filter_norm = config.number("filter_norm", pc.filter_norm);
        pc.base_rate = positive_number(config, "base_rate", pc.base_rate);
        pc.ridge = positive_number(config, "ridge", pc.ridge);
        pc.budget = static_cast<int>(positive_index(config, "budget", pc.budget));
        pc.seed = seed;
        const PcgExperimentResult r = run_pcg_experiment(pc);
        CsvWriter csv(run.file("pcg.csv"), {"iteration", "heldout_loglik"});
        for (std::size_t k = 0; k < r.heldout_by_iteration.size(); ++k) {
            csv.row({std::to_string(k), format_double(r.heldout_by_iteration[k])});
        }
        write_json(run.file("summary.json"), {{"heldout_map", r.heldout_map},
                                              {"relative_gap", r.relative_gap},
                                              {"map_iterations", r.map_iterations}});
        write_json(run.file("timings.json"),
                   {{"pcg_seconds", r.seconds_pcg}, {"map_seconds", r.seconds_map}, {"about", timing_note()}});
        return;
    }
    throw ConfigError("/kind: expected loglik or pcg");
}

} // namespace elglm::cli
