#include "elglm/dataset_io.hpp"

#include "elglm/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <vector>

namespace elglm {

namespace fs = std::filesystem;
using nlohmann::json;

void write_float64_matrix(const fs::path& path, const MatrixXd& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!out) throw ConfigError("failed writing " + path.string());
}

MatrixXd read_float64_matrix(const fs::path& path, Index rows, Index cols) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw ConfigError("cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    const auto expected = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (bytes != expected) {
        throw ConfigError(path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(bytes));
    }
    in.seekg(0);
    MatrixXd m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(expected));
    return m;
}

fs::path write_dataset(const fs::path& dir, const std::string& stem, const CanonicalFamily& family,
                       const GlmDataset& data) {
    fs::create_directories(dir);
    const std::string x_name = stem + ".X.bin";
    const std::string r_name = stem + ".r.bin";
    write_float64_matrix(dir / x_name, data.design());
    write_float64_matrix(dir / r_name, data.responses());
    json sidecar = {
        {"N", data.rows()},
        {"p", data.cols()},
        {"family", std::string(family.name())},
        {"bin_width", family.bin_width()},
        {"noise_variance", family.noise_variance()},
        {"design_file", x_name},
        {"response_file", r_name},
        {"layout", "column-major float64"},
    };
    const fs::path sidecar_path = dir / (stem + ".json");
    std::ofstream(sidecar_path) << sidecar.dump(2) << '\n';
    return sidecar_path;
}

LoadedDataset read_dataset(const fs::path& sidecar) {
    std::ifstream in(sidecar);
    if (!in) throw ConfigError("cannot open dataset sidecar " + sidecar.string());
    json meta;
    try {
        in >> meta;
    } catch (const json::exception& e) {
        throw ConfigError(sidecar.string() + ": " + e.what());
    }
    auto field = [&](const char* key) -> const json& {
        if (!meta.contains(key)) throw ConfigError(sidecar.string() + ": missing field /" + key);
        return meta.at(key);
    };
    const auto n = field("N").get<Index>();
    const auto p = field("p").get<Index>();
    const auto family_name = field("family").get<std::string>();
    CanonicalFamily family = CanonicalFamily::bernoulli();
    if (family_name == "gaussian") {
        family = CanonicalFamily::gaussian(meta.value("noise_variance", 1.0));
    } else if (family_name == "poisson") {
        family = CanonicalFamily::poisson(meta.value("bin_width", 1.0));
    } else if (family_name != "bernoulli") {
        throw ConfigError(sidecar.string() + ": /family must be gaussian, poisson or bernoulli");
    }
    const fs::path base = sidecar.parent_path();
    MatrixXd x = read_float64_matrix(base / field("design_file").get<std::string>(), n, p);
    VectorXd r = read_float64_matrix(base / field("response_file").get<std::string>(), n, 1);
    GlmDataset data(std::move(x), std::move(r));
    data.validate_for(family);
    return {family, std::move(data)};
}

GlmDataset read_csv_dataset(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> values;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                values.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (rows.empty() && line_no == 1) continue; // header
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell");
        }
        if (!rows.empty() && values.size() != rows.front().size()) {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": ragged row");
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty() || rows.front().size() < 2) throw ConfigError(path.string() + ": need covariates and a response");
    const auto n = static_cast<Index>(rows.size());
    const auto p = static_cast<Index>(rows.front().size()) - 1;
    MatrixXd x(n, p);
    VectorXd r(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        r[i] = rows[static_cast<std::size_t>(i)].back();
    }
    return {std::move(x), std::move(r)};
}

} // namespace elglm
