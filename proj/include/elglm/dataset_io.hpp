#pragma once

#include "elglm/glm.hpp"

#include <filesystem>

namespace elglm {

struct LoadedDataset {
    CanonicalFamily family;
    GlmDataset data;
};

/// Writes <dir>/<stem>.json (sidecar with N, p, family, bin width, noise
/// variance) plus <stem>.X.bin and <stem>.r.bin as column-major little-endian
/// float64. Returns the sidecar path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::string& stem,
                                    const CanonicalFamily& family, const GlmDataset& data);

/// Reads a dataset written by write_dataset. Binary sizes must match the sidecar.
LoadedDataset read_dataset(const std::filesystem::path& sidecar);

/// CSV import for small data: one row per observation, covariates first and
/// the response in the last column. A non-numeric first line is treated as a header.
GlmDataset read_csv_dataset(const std::filesystem::path& path);

/// Raw float64 matrix helpers shared by the chain and population formats.
void write_float64_matrix(const std::filesystem::path& path, const MatrixXd& m);
MatrixXd read_float64_matrix(const std::filesystem::path& path, Index rows, Index cols);

} // namespace elglm
