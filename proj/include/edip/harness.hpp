#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edip/config.hpp"
#include "edip/metrics.hpp"

namespace edip {

// All artifact locations are pure functions of (config hash, command, seed).
struct Workspace {
    ExperimentConfig config;
    std::string root;  // <output_dir>/<hash as 16 hex digits>

    static Workspace open(ExperimentConfig config);

    std::string simulate_dir() const { return root + "/simulate"; }
    std::string pretrain_run_dir(int run) const {
        return root + "/pretrain/run" + std::to_string(run);
    }
    std::string select_dir() const { return root + "/select"; }
    std::string reconstruct_dir(const std::string& method, uint64_t seed) const {
        return root + "/reconstruct/" + method + "/seed" + std::to_string(seed);
    }
    std::string spectra_dir(const std::string& tag) const { return root + "/spectra/" + tag; }
    std::string report_dir() const { return root + "/report"; }

    std::string test_sino_path(uint64_t seed) const {
        return simulate_dir() + "/sino_test_seed" + std::to_string(seed) + ".edipt";
    }
    std::string test_fbp_path(uint64_t seed) const {
        return simulate_dir() + "/fbp_test_seed" + std::to_string(seed) + ".edipt";
    }
    std::string test_phantom_path() const { return simulate_dir() + "/phantom_test.edipt"; }
    std::string val_phantom_path() const { return simulate_dir() + "/phantom_shepp.edipt"; }
    std::string val_sino_path() const { return simulate_dir() + "/sino_shepp.edipt"; }
    std::string selection_json_path() const { return select_dir() + "/selection.json"; }

    uint64_t validation_noise_seed() const;
    uint64_t pretrain_run_seed(int run) const;
};

struct SelectionCandidate {
    std::string checkpoint;
    double steady_psnr = 0.0;
    int64_t rise_time = kNotReached;
    bool eligible = false;
};

struct SelectionResult {
    std::vector<SelectionCandidate> candidates;
    int selected_index = -1;
    std::string selected_checkpoint;
    std::string rationale;
};

// The 0.25 dB rule: among candidates whose steady PSNR is within `margin_db`
// of the maximum, pick the shortest rise time (never-reached counts as
// infinite; if no eligible candidate reports one, fall back to the highest
// steady PSNR).
SelectionResult apply_selection_rule(std::vector<SelectionCandidate> candidates, double margin_db);

void cmd_simulate(const Workspace& ws);
void cmd_pretrain(const Workspace& ws);
SelectionResult cmd_select(const Workspace& ws);
void cmd_reconstruct(const Workspace& ws);
void cmd_spectra(const Workspace& ws);
void cmd_report(const Workspace& ws);

// Dispatch by command name; throws Error on unknown commands or missing
// upstream artifacts (the message names the producing command).
void run_command(const std::string& command, const ExperimentConfig& config);

}  // namespace edip
