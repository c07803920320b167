#pragma once

#include "elglm/estimators.hpp"
#include "elglm/expected_loglik.hpp"
#include "elglm/glm.hpp"
#include "elglm/population.hpp"
#include "elglm/sampling.hpp"
#include "elglm/structured_matrix.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace elglm {

using Json = nlohmann::json;

[[nodiscard]] Json to_json(const VectorXd& v);
[[nodiscard]] VectorXd vector_from_json(const Json& j);
/// Row-major nested arrays.
[[nodiscard]] Json to_json(const MatrixXd& m);
[[nodiscard]] MatrixXd matrix_from_json(const Json& j);

/**
 * Tagged record {"kind": ..., payload}:
 *   scaled_identity {size, scale}      diagonal {values}
 *   banded {bands}                     circulant {dims, base}
 *   dense {values}                     kronecker {factors}
 *   toeplitz {first_column}            (input only, stored per toeplitz())
 */
[[nodiscard]] Json to_json(const StructuredMatrix& s);
[[nodiscard]] StructuredMatrix structured_from_json(const Json& j);

[[nodiscard]] Json to_json(const CanonicalFamily& family);
/// {"name": "gaussian"|"poisson"|"bernoulli", "noise_variance", "bin_width"}
[[nodiscard]] CanonicalFamily family_from_json(const Json& j);

[[nodiscard]] Json to_json(const GlmParams& params);
[[nodiscard]] GlmParams params_from_json(const Json& j);

[[nodiscard]] Json to_json(const FitResult& fit);

[[nodiscard]] Json to_json(const EllipticTable& table);
[[nodiscard]] EllipticTable elliptic_table_from_json(const Json& j);

[[nodiscard]] Json to_json(const HistoryBasis& basis);
[[nodiscard]] HistoryBasis history_basis_from_json(const Json& j);

/// Coupling stored as a triplet list [[target, source, value], ...].
[[nodiscard]] Json to_json(const CoupledFilterSet& filters);
[[nodiscard]] CoupledFilterSet filters_from_json(const Json& j);

/// <dir>/<stem>.json manifest with stimulus and spike binaries beside it.
std::filesystem::path write_population(const std::filesystem::path& dir, const std::string& stem,
                                       const PopulationDataset& data);
[[nodiscard]] PopulationDataset read_population(const std::filesystem::path& manifest);

/// <dir>/<stem>.json manifest plus <stem>.samples.bin (draws x dim, column-major).
std::filesystem::path write_chain(const std::filesystem::path& dir, const std::string& stem, const Chain& chain);
[[nodiscard]] Chain read_chain(const std::filesystem::path& manifest);

/// Minimal CSV writer: header row then numeric or string rows.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<std::string>& cells);
    void row(const std::vector<double>& cells);

private:
    struct Impl;
    Impl* impl_;
    std::size_t columns_;
};

/// Shortest round-trippable decimal form.
[[nodiscard]] std::string format_double(double x);

/// Summary CSV: coordinate, median, lower, upper.
void write_quantile_summary(const std::filesystem::path& path, const QuantileSummary& summary);

/// One row per path point: lambda, objective, offset, theta_0..theta_{p-1}.
void write_fit_path(const std::filesystem::path& path, const std::vector<FitResult>& fits);

void write_json(const std::filesystem::path& path, const Json& j);
[[nodiscard]] Json read_json(const std::filesystem::path& path);

} // namespace elglm
