#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "edip/config.hpp"
#include "edip/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"EDIP sparse-view CT reconstruction toolkit"};
    std::string command;
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out_dir;
    app.add_option("command", command,
                   "simulate | pretrain | select | reconstruct | spectra | report")
        ->required();
    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--seed", seed, "run only this seed (replaces the config's seed list)");
    app.add_option("--out", out_dir, "override the config's output directory");
    CLI11_PARSE(app, argc, argv);

    try {
        edip::ExperimentConfig cfg = edip::ExperimentConfig::load(config_path);
        if (seed) cfg.seeds = {*seed};
        if (out_dir) cfg.output_dir = *out_dir;
        edip::run_command(command, cfg);
    } catch (const std::exception& e) {
        nlohmann::json err;
        err["command"] = command;
        err["config"] = config_path;
        err["error"] = e.what();
        std::cerr << err.dump() << std::endl;
        return 1;
    }
    return 0;
}
