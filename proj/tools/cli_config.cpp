#include "cli_config.hpp"

#include "elglm/error.hpp"

#include <cstdio>

namespace elglm::cli {

ConfigNode::ConfigNode(const Json& node, std::string path)
    : node_(&node), path_(std::move(path)), state_(std::make_shared<State>()) {
    if (!node.is_object()) throw ConfigError((path_.empty() ? std::string("/") : path_) + ": expected an object");
}

bool ConfigNode::has(const std::string& key) const { return node_->contains(key); }

double ConfigNode::number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return number(key);
}

double ConfigNode::number(const std::string& key) {
    state_->used.insert(key);
    if (!has(key)) throw ConfigError(path_of(key) + ": required field is missing");
    const Json& v = node_->at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
    }
    throw ConfigError(path_of(key) + ": expected a number");
}

long long ConfigNode::integer(const std::string& key, long long fallback) {
    state_->used.insert(key);
    if (!has(key)) return fallback;
    const Json& v = node_->at(key);
    if (!v.is_number_integer()) throw ConfigError(path_of(key) + ": expected an integer");
    return v.get<long long>();
}

std::uint64_t ConfigNode::seed(const std::string& key, std::uint64_t fallback) {
    state_->used.insert(key);
    if (!has(key)) return fallback;
    const Json& v = node_->at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
        throw ConfigError(path_of(key) + ": expected a nonnegative integer seed");
    }
    return v.get<std::uint64_t>();
}

bool ConfigNode::flag(const std::string& key, bool fallback) {
    state_->used.insert(key);
    if (!has(key)) return fallback;
    const Json& v = node_->at(key);
    if (!v.is_boolean()) throw ConfigError(path_of(key) + ": expected true or false");
    return v.get<bool>();
}

std::string ConfigNode::text(const std::string& key, const std::string& fallback) {
    state_->used.insert(key);
    if (!has(key)) return fallback;
    const Json& v = node_->at(key);
    if (!v.is_string()) throw ConfigError(path_of(key) + ": expected a string");
    return v.get<std::string>();
}

std::vector<double> ConfigNode::numbers(const std::string& key, const std::vector<double>& fallback) {
    state_->used.insert(key);
    if (!has(key)) return fallback;
    const Json& v = node_->at(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError(path_of(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError(path_of(key) + "/" + std::to_string(i) + ": expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

std::vector<long long> ConfigNode::integers(const std::string& key, const std::vector<long long>& fallback) {
    state_->used.insert(key);
    if (!has(key)) return fallback;
    const Json& v = node_->at(key);
    if (v.is_number_integer()) return {v.get<long long>()};
    if (!v.is_array()) throw ConfigError(path_of(key) + ": expected an array of integers");
    std::vector<long long> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer()) {
            throw ConfigError(path_of(key) + "/" + std::to_string(i) + ": expected an integer");
        }
        out.push_back(v[i].get<long long>());
    }
    return out;
}

std::vector<std::string> ConfigNode::texts(const std::string& key, const std::vector<std::string>& fallback) {
    state_->used.insert(key);
    if (!has(key)) return fallback;
    const Json& v = node_->at(key);
    if (v.is_string()) return {v.get<std::string>()};
    if (!v.is_array()) throw ConfigError(path_of(key) + ": expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string()) throw ConfigError(path_of(key) + "/" + std::to_string(i) + ": expected a string");
        out.push_back(v[i].get<std::string>());
    }
    return out;
}

const Json& ConfigNode::raw(const std::string& key) {
    state_->used.insert(key);
    if (!has(key)) throw ConfigError(path_of(key) + ": required field is missing");
    return node_->at(key);
}

ConfigNode ConfigNode::child(const std::string& key) {
    state_->used.insert(key);
    static const Json empty = Json::object();
    if (!has(key)) return ConfigNode(empty, path_of(key));
    state_->children.emplace_back(node_->at(key), path_of(key));
    return state_->children.back();
}

void ConfigNode::finish() const {
    for (const auto& item : node_->items()) {
        if (!state_->used.count(item.key())) throw ConfigError(path_of(item.key()) + ": unknown field");
    }
    for (const auto& c : state_->children) c.finish();
}

void apply_override(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const Json::exception&) {
        value = text;
    }
    Json* node = &config;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override '" + assignment + "' has an empty key segment");
        if (!node->is_object()) throw ConfigError("override '" + assignment + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = Json::object();
        start = dot + 1;
    }
}

std::string config_hash(const Json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace elglm::cli
