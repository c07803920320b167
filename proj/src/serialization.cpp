#include "elglm/serialization.hpp"

#include "elglm/dataset_io.hpp"
#include "elglm/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace elglm {

namespace fs = std::filesystem;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const Json& require(const Json& j, const char* key, const char* where) {
    if (!j.is_object() || !j.contains(key)) {
        throw ConfigError(std::string(where) + ": missing field /" + key);
    }
    return j.at(key);
}

template <class T>
T get_as(const Json& j, const char* key, const char* where) {
    try {
        return require(j, key, where).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string(where) + ": field /" + key + " has the wrong type (" + e.what() + ")");
    }
}

} // namespace

Json to_json(const VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

VectorXd vector_from_json(const Json& j) {
    if (!j.is_array()) throw ConfigError("expected a numeric array");
    VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError("expected a numeric array, element " + std::to_string(i));
        v[static_cast<Index>(i)] = j[i].get<double>();
    }
    return v;
}

Json to_json(const MatrixXd& m) {
    Json rows = Json::array();
    for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(VectorXd(m.row(i).transpose())));
    return rows;
}

MatrixXd matrix_from_json(const Json& j) {
    if (!j.is_array()) throw ConfigError("expected an array of rows");
    if (j.empty()) return MatrixXd();
    const auto rows = static_cast<Index>(j.size());
    const auto cols = static_cast<Index>(j[0].size());
    MatrixXd m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        const VectorXd r = vector_from_json(j[static_cast<std::size_t>(i)]);
        if (r.size() != cols) throw ConfigError("ragged matrix rows");
        m.row(i) = r.transpose();
    }
    return m;
}

Json to_json(const StructuredMatrix& s) {
    using SM = StructuredMatrix;
    return std::visit(Overloaded{
                          [](const SM::ScaledIdentity& x) {
                              return Json{{"kind", "scaled_identity"}, {"size", x.size}, {"scale", x.scale}};
                          },
                          [](const SM::Diagonal& x) { return Json{{"kind", "diagonal"}, {"values", to_json(x.values)}}; },
                          [](const SM::Banded& x) { return Json{{"kind", "banded"}, {"bands", to_json(x.bands)}}; },
                          [](const SM::Circulant& x) {
                              return Json{{"kind", "circulant"}, {"dims", x.dims}, {"base", to_json(x.base)}};
                          },
                          [](const SM::Dense& x) { return Json{{"kind", "dense"}, {"values", to_json(x.values)}}; },
                          [](const SM::Kronecker& x) {
                              Json factors = Json::array();
                              for (const auto& f : x.factors) factors.push_back(to_json(f));
                              return Json{{"kind", "kronecker"}, {"factors", factors}};
                          },
                      },
                      s.kind());
}

StructuredMatrix structured_from_json(const Json& j) {
    const char* where = "structured matrix";
    const auto kind = get_as<std::string>(j, "kind", where);
    if (kind == "identity") return StructuredMatrix::identity(get_as<Index>(j, "size", where));
    if (kind == "scaled_identity") {
        return StructuredMatrix::scaled_identity(get_as<Index>(j, "size", where), get_as<double>(j, "scale", where));
    }
    if (kind == "diagonal") return StructuredMatrix::diagonal(vector_from_json(require(j, "values", where)));
    if (kind == "banded") return StructuredMatrix::banded(matrix_from_json(require(j, "bands", where)));
    if (kind == "circulant") {
        const VectorXd base = vector_from_json(require(j, "base", where));
        std::vector<Index> dims{base.size()};
        if (j.contains("dims")) dims = get_as<std::vector<Index>>(j, "dims", where);
        if (dims.size() == 1) return StructuredMatrix::circulant(base);
        if (dims.size() == 2) return StructuredMatrix::circulant_2d(dims[0], dims[1], base);
        throw ConfigError("structured matrix: /dims must have one or two entries");
    }
    if (kind == "dense") return StructuredMatrix::dense(matrix_from_json(require(j, "values", where)));
    if (kind == "kronecker") {
        std::vector<StructuredMatrix> factors;
        for (const auto& f : require(j, "factors", where)) factors.push_back(structured_from_json(f));
        return StructuredMatrix::kronecker(std::move(factors));
    }
    if (kind == "toeplitz") {
        return StructuredMatrix::toeplitz(vector_from_json(require(j, "first_column", where)),
                                          j.value("max_bandwidth", Index{8}));
    }
    throw ConfigError("structured matrix: unknown /kind '" + kind + "'");
}

Json to_json(const CanonicalFamily& family) {
    return {{"name", std::string(family.name())},
            {"noise_variance", family.noise_variance()},
            {"bin_width", family.bin_width()}};
}

CanonicalFamily family_from_json(const Json& j) {
    if (j.is_string()) return family_from_json(Json{{"name", j}});
    const auto name = get_as<std::string>(j, "name", "family");
    if (name == "gaussian") return CanonicalFamily::gaussian(j.value("noise_variance", 1.0));
    if (name == "poisson") return CanonicalFamily::poisson(j.value("bin_width", 1.0));
    if (name == "bernoulli" || name == "logistic") return CanonicalFamily::bernoulli();
    throw ConfigError("family: /name must be gaussian, poisson or bernoulli");
}

Json to_json(const GlmParams& params) { return {{"offset", params.offset}, {"theta", to_json(params.theta)}}; }

GlmParams params_from_json(const Json& j) {
    GlmParams p;
    p.offset = get_as<double>(j, "offset", "params");
    p.theta = vector_from_json(require(j, "theta", "params"));
    return p;
}

Json to_json(const FitResult& fit) {
    return {{"params", to_json(fit.params)},
            {"objective_trace", fit.objective_trace},
            {"iterations", fit.iterations},
            {"wall_seconds", fit.wall_seconds},
            {"converged", fit.converged},
            {"solver", fit.solver},
            {"lambda", fit.lambda},
            {"kkt_residual", fit.kkt_residual}};
}

Json to_json(const EllipticTable& table) {
    Json j{{"family", to_json(table.family())}, {"radii", to_json(table.radii())}, {"values", to_json(table.values())}};
    if (table.has_curvature()) j["curvature"] = to_json(table.curvature());
    return j;
}

EllipticTable elliptic_table_from_json(const Json& j) {
    const char* where = "elliptic table";
    VectorXd curvature;
    if (j.contains("curvature")) curvature = vector_from_json(j.at("curvature"));
    return EllipticTable(family_from_json(require(j, "family", where)), vector_from_json(require(j, "radii", where)),
                         vector_from_json(require(j, "values", where)), std::move(curvature));
}

Json to_json(const HistoryBasis& basis) {
    return {{"cosine_count", basis.cosine_count},
            {"cosine_spacing", basis.cosine_spacing},
            {"refractory", basis.refractory},
            {"coupling_decay", basis.coupling_decay},
            {"max_lag", basis.max_lag}};
}

HistoryBasis history_basis_from_json(const Json& j) {
    HistoryBasis b;
    b.cosine_count = j.value("cosine_count", b.cosine_count);
    b.cosine_spacing = j.value("cosine_spacing", b.cosine_spacing);
    b.refractory = j.value("refractory", b.refractory);
    b.coupling_decay = j.value("coupling_decay", b.coupling_decay);
    b.max_lag = j.value("max_lag", b.max_lag);
    b.validate();
    return b;
}

Json to_json(const CoupledFilterSet& filters) {
    Json triplets = Json::array();
    for (int k = 0; k < filters.coupling.outerSize(); ++k) {
        for (SparseMatrixXd::InnerIterator it(filters.coupling, k); it; ++it) {
            triplets.push_back(Json::array({it.row(), it.col(), it.value()}));
        }
    }
    return {{"neurons", filters.neurons()},
            {"offsets", to_json(filters.offsets)},
            {"stimulus", to_json(filters.stimulus)},
            {"gains", to_json(filters.gains)},
            {"self_history", to_json(filters.self_history)},
            {"coupling", triplets}};
}

CoupledFilterSet filters_from_json(const Json& j) {
    const char* where = "coupled filters";
    CoupledFilterSet f;
    f.offsets = vector_from_json(require(j, "offsets", where));
    f.stimulus = matrix_from_json(require(j, "stimulus", where));
    f.gains = vector_from_json(require(j, "gains", where));
    f.self_history = matrix_from_json(require(j, "self_history", where));
    const Index m = f.offsets.size();
    f.coupling.resize(m, m);
    std::vector<Eigen::Triplet<double>> t;
    for (const auto& e : require(j, "coupling", where)) {
        if (!e.is_array() || e.size() != 3) throw ConfigError("coupled filters: /coupling entries are [target, source, value]");
        t.emplace_back(e[0].get<Index>(), e[1].get<Index>(), e[2].get<double>());
    }
    f.coupling.setFromTriplets(t.begin(), t.end());
    return f;
}

fs::path write_population(const fs::path& dir, const std::string& stem, const PopulationDataset& data) {
    data.validate();
    fs::create_directories(dir);
    const std::string stim = stem + ".stimulus.bin";
    const std::string spikes = stem + ".spikes.bin";
    write_float64_matrix(dir / stim, data.stimulus);
    write_float64_matrix(dir / spikes, data.spikes);
    const fs::path manifest = dir / (stem + ".json");
    write_json(manifest, {{"bins", data.bins()},
                          {"neurons", data.neurons()},
                          {"stimulus_dim", data.stimulus_dim()},
                          {"bin_width", data.bin_width},
                          {"stimulus_file", stim},
                          {"spikes_file", spikes},
                          {"layout", "column-major float64"}});
    return manifest;
}

PopulationDataset read_population(const fs::path& manifest) {
    const Json j = read_json(manifest);
    const char* where = "population manifest";
    const auto n = get_as<Index>(j, "bins", where);
    const auto m = get_as<Index>(j, "neurons", where);
    const auto p = get_as<Index>(j, "stimulus_dim", where);
    PopulationDataset d;
    d.bin_width = get_as<double>(j, "bin_width", where);
    const fs::path base = manifest.parent_path();
    d.stimulus = read_float64_matrix(base / get_as<std::string>(j, "stimulus_file", where), n, p);
    d.spikes = read_float64_matrix(base / get_as<std::string>(j, "spikes_file", where), n, m);
    d.validate();
    return d;
}

fs::path write_chain(const fs::path& dir, const std::string& stem, const Chain& chain) {
    fs::create_directories(dir);
    const std::string samples = stem + ".samples.bin";
    write_float64_matrix(dir / samples, chain.samples);
    const fs::path manifest = dir / (stem + ".json");
    write_json(manifest, {{"draws", chain.samples.rows()},
                          {"dim", chain.samples.cols()},
                          {"acceptance_rate", chain.acceptance_rate},
                          {"seed", chain.seed},
                          {"target", chain.target},
                          {"energies", chain.energies},
                          {"samples_file", samples},
                          {"layout", "column-major float64"}});
    return manifest;
}

Chain read_chain(const fs::path& manifest) {
    const Json j = read_json(manifest);
    const char* where = "chain manifest";
    Chain c;
    c.samples = read_float64_matrix(manifest.parent_path() / get_as<std::string>(j, "samples_file", where),
                                    get_as<Index>(j, "draws", where), get_as<Index>(j, "dim", where));
    c.acceptance_rate = get_as<double>(j, "acceptance_rate", where);
    c.seed = get_as<std::uint64_t>(j, "seed", where);
    c.target = get_as<std::string>(j, "target", where);
    c.energies = j.value("energies", std::vector<double>{});
    return c;
}

struct CsvWriter::Impl {
    std::ofstream out;
    fs::path path;
};

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header)
    : impl_(new Impl), columns_(header.size()) {
    impl_->path = path;
    impl_->out.open(path);
    if (!impl_->out) {
        delete impl_;
        throw ConfigError("cannot open " + path.string() + " for writing");
    }
    row(header);
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw DimensionError("CSV row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) impl_->out << ',';
        impl_->out << cells[i];
    }
    impl_->out << '\n';
    if (!impl_->out) throw ConfigError("failed writing " + impl_->path.string());
}

void CsvWriter::row(const std::vector<double>& cells) {
    std::vector<std::string> text;
    text.reserve(cells.size());
    for (double x : cells) text.push_back(format_double(x));
    row(text);
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

void write_quantile_summary(const fs::path& path, const QuantileSummary& summary) {
    CsvWriter csv(path, {"coordinate", "median", "lower", "upper"});
    for (std::size_t c = 0; c < summary.coordinates.size(); ++c) {
        const auto k = static_cast<Index>(c);
        csv.row(std::vector<double>{static_cast<double>(summary.coordinates[c]), summary.median[k], summary.lower[k],
                                    summary.upper[k]});
    }
}

void write_fit_path(const fs::path& path, const std::vector<FitResult>& fits) {
    if (fits.empty()) throw DomainError("empty fit path");
    std::vector<std::string> header{"lambda", "objective", "offset"};
    const Index p = fits.front().params.dim();
    for (Index j = 0; j < p; ++j) header.push_back("theta_" + std::to_string(j));
    CsvWriter csv(path, header);
    for (const auto& f : fits) {
        std::vector<double> row{f.lambda, f.objective_trace.empty() ? std::nan("") : f.objective_trace.back(),
                                f.params.offset};
        for (Index j = 0; j < p; ++j) row.push_back(f.params.theta[j]);
        csv.row(row);
    }
}

void write_json(const fs::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw ConfigError("failed writing " + path.string());
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace elglm
