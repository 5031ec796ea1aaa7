#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "burnmap/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int dispatch(const std::string& command, const std::string& config_path,
             bool have_seed, std::uint64_t seed_override, const std::string& out_override) {
    burnmap::PipelineConfig cfg = burnmap::PipelineConfig::load(config_path);
    if (have_seed) cfg.seed = seed_override;
    if (!out_override.empty()) cfg.out_dir = out_override;
    return burnmap::run_command(command, cfg, std::cout);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"burnmap: simulated VSWIR burn-assessment pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool have_seed = false;

    const std::vector<std::string> commands = {"phantom",  "scan",    "calibrate",
                                               "preprocess", "maps",  "lsci",
                                               "train-cae", "cluster", "report"};
    for (const auto& name : commands) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "pipeline config json")->required();
        sub->add_option("--seed", seed_override, "override the config seed")
            ->each([&](const std::string&) { have_seed = true; });
        sub->add_option("--out", out_override, "override the output directory");
    }

    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return dispatch(command, config_path, have_seed, seed_override, out_override);
    } catch (const burnmap::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const burnmap::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const burnmap::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
