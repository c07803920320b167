#pragma once

#include "elglm/serialization.hpp"

#include <memory>
#include <set>
#include <string>
#include <vector>

namespace elglm::cli {

/**
 * Typed view of one JSON object in a run config. Every read records the key;
 * finish() rejects keys nobody asked for, so typos surface as errors with the
 * offending field path instead of being silently ignored.
 */
class ConfigNode {
public:
    ConfigNode(const Json& node, std::string path);

    [[nodiscard]] bool has(const std::string& key) const;
    [[nodiscard]] double number(const std::string& key, double fallback);
    [[nodiscard]] double number(const std::string& key);
    [[nodiscard]] long long integer(const std::string& key, long long fallback);
    [[nodiscard]] std::uint64_t seed(const std::string& key, std::uint64_t fallback);
    [[nodiscard]] bool flag(const std::string& key, bool fallback);
    [[nodiscard]] std::string text(const std::string& key, const std::string& fallback);
    [[nodiscard]] std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback);
    [[nodiscard]] std::vector<long long> integers(const std::string& key, const std::vector<long long>& fallback);
    [[nodiscard]] std::vector<std::string> texts(const std::string& key, const std::vector<std::string>& fallback);
    /// Raw sub-tree (structured matrices, families) for the library parsers.
    [[nodiscard]] const Json& raw(const std::string& key);
    [[nodiscard]] ConfigNode child(const std::string& key);
    [[nodiscard]] std::string path_of(const std::string& key) const { return path_ + "/" + key; }

    void finish() const;

private:
    const Json* node_;
    std::string path_;
    struct State {
        std::set<std::string> used;
        std::vector<ConfigNode> children;
    };
    std::shared_ptr<State> state_;
};

/// Applies "a.b.c=value" overrides; value is parsed as JSON, else kept as a string.
void apply_override(Json& config, const std::string& assignment);

/// FNV-1a 64-bit hash of the compact dump, as 16 hex digits.
[[nodiscard]] std::string config_hash(const Json& config);

} // namespace elglm::cli
