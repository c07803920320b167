#pragma once

#include "cli_config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace elglm::cli {

/// Output directory of one run plus the list of files written into it.
class RunContext {
public:
    explicit RunContext(std::filesystem::path dir) : dir_(std::move(dir)) {}

    [[nodiscard]] const std::filesystem::path& dir() const { return dir_; }
    /// Path for a new output file; records it in the manifest list.
    std::filesystem::path file(const std::string& name);
    [[nodiscard]] const std::vector<std::string>& outputs() const { return outputs_; }

private:
    std::filesystem::path dir_;
    std::vector<std::string> outputs_;
};

using Command = void (*)(ConfigNode& config, std::uint64_t seed, RunContext& run);

void run_fit(ConfigNode& config, std::uint64_t seed, RunContext& run);
void run_select(ConfigNode& config, std::uint64_t seed, RunContext& run);
void run_sample(ConfigNode& config, std::uint64_t seed, RunContext& run);
void run_risk(ConfigNode& config, std::uint64_t seed, RunContext& run);
void run_simulate(ConfigNode& config, std::uint64_t seed, RunContext& run);
void run_population(ConfigNode& config, std::uint64_t seed, RunContext& run);
void run_bench(ConfigNode& config, std::uint64_t seed, RunContext& run);

} // namespace elglm::cli
