#include "commands.hpp"

#include "elglm/error.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/version.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using elglm::Json;
using namespace elglm::cli;

namespace {

constexpr const char* kToolkitVersion = "0.1.0";

std::string utc_stamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    return std::string(buf) + "-" + std::to_string(ms);
}

Json versions() {
    return {{"toolkit", kToolkitVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"compiler", __VERSION__}};
}

struct Options {
    std::string config_path;
    std::string out = "out";
    std::string run_id;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
};

int run(const std::string& name, Command command, const Options& opt) {
    Json config = elglm::read_json(opt.config_path);
    if (config.is_object() && config.contains("config") && config.contains("config_hash")) {
        config = config["config"]; // rerun from a manifest
    }
    if (!config.is_object()) throw elglm::ConfigError("/: expected an object");
    for (const auto& o : opt.overrides) apply_override(config, o);
    if (opt.seed) config["seed"] = *opt.seed;
    if (config.empty()) throw elglm::ConfigError("/: configuration is empty");

    ConfigNode root(config, "");
    const std::uint64_t seed = root.seed("seed", 1);
    const std::string run_id = opt.run_id.empty() ? utc_stamp() : opt.run_id;
    const fs::path dir = fs::path(opt.out) / name / run_id;
    if (fs::exists(dir)) throw elglm::ConfigError("output directory " + dir.string() + " already exists");
    fs::create_directories(dir);
    try {
        RunContext ctx(dir);
        command(root, seed, ctx);
        root.finish();
        Json manifest{{"experiment", name}, {"run_id", run_id},       {"seed", seed},
                      {"config", config},   {"config_hash", config_hash(config)},
                      {"versions", versions()}, {"outputs", ctx.outputs()}};
        elglm::write_json(dir / "manifest.json", manifest);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(dir, ec);
        throw;
    }
    std::cout << dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Expected log-likelihood GLM toolkit"};
    app.require_subcommand(1);
    const std::map<std::string, std::pair<Command, std::string>> commands{
        {"fit", {run_fit, "fit one GLM by exact or expected log-likelihood"}},
        {"select", {run_select, "ridge selection by marginal likelihood"}},
        {"sample", {run_sample, "posterior sampling with exact and EL potentials"}},
        {"risk", {run_risk, "estimator risk curves"}},
        {"simulate", {run_simulate, "simulate a dataset"}},
        {"population", {run_population, "coupled population fit"}},
        {"bench", {run_bench, "evaluation cost and PCG benchmarks"}},
    };
    Options opt;
    std::uint64_t seed = 0;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, entry] : commands) {
        CLI::App* sub = app.add_subcommand(name, entry.second);
        sub->add_option("--config", opt.config_path, "JSON config (or a previous manifest.json)")->required();
        sub->add_option("--out", opt.out, "output root");
        sub->add_option("--run-id", opt.run_id, "run directory name (default: UTC timestamp)");
        sub->add_option("--seed", seed, "overrides the config seed");
        sub->add_option("--set", opt.overrides, "override a config field, key.path=value")->take_all();
        subs[name] = sub;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    for (const auto& [name, sub] : subs) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed") > 0) opt.seed = seed;
        try {
            return run(name, commands.at(name).first, opt);
        } catch (const elglm::ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        } catch (const elglm::DomainError& e) {
            std::cerr << "domain error: " << e.what() << "\n";
            return 2;
        } catch (const elglm::NumericalError& e) {
            std::cerr << "numerical error: " << e.what() << "\n";
            return 3;
        } catch (const elglm::DimensionError& e) {
            std::cerr << "dimension error: " << e.what() << "\n";
            return 3;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 3;
        }
    }
    return 2;
}
