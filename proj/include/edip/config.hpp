#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "edip/dip.hpp"
#include "edip/phantoms.hpp"
#include "edip/pretrain.hpp"
#include "edip/ray_transform.hpp"
#include "edip/unet.hpp"

namespace edip {

struct GeometryConfig {
    int64_t image_size = 128;
    int64_t num_angles = 20;
    double angle_start_deg = 0.0;
    double angle_span_deg = 360.0;
    int64_t num_detector_pixels = 183;
    double detector_extent = 7.0;
    double source_radius = 3.0;
    double detector_radius = 3.0;

    FanBeamGeometry build() const;
};

struct PretrainSection {
    int64_t epochs = 20;
    int64_t samples_per_epoch = 200;
    int64_t val_samples = 32;
    int64_t batch_size = 16;
    double lr = 1e-3;
    int64_t checkpoint_every_epochs = 20;
    int num_runs = 3;
};

struct LrSection {
    std::string kind = "constant";  // constant | linear-warmdown
    double initial = 1e-4;
    double final = 1e-4;
    int64_t transition = 1;

    LearningRateSchedule build() const;
};

struct MethodSection {
    std::string name;            // e.g. "dip-noise", "edip-fbp", "edip-fbp-fe"
    std::string input = "noise"; // noise | fbp
    bool pretrained = false;
    bool freeze_encoder = false;
    double gamma_prime = 1e-4;
    LrSection lr;
    int64_t max_iters = 2000;
    int eval_every = 10;
    bool use_stop_rule = false;
    int stop_window = 100;
    double stop_threshold = 1e-7;
};

struct MetricsSection {
    double tail_fraction = 1.0 / 6.0;  // mirrors "last 5k of 30k"
    double rise_margin_db = 0.1;
    double selection_margin_db = 0.25;
};

struct SpectraSection {
    int rank = 40;
    int oversampling = 5;
    std::string method = "edip-fbp";  // fine-tune run providing mid/conv tags
    int64_t mid_iter = 100;
};

struct SelectSection {
    double gamma_prime = 1e-4;
    LrSection lr;
    int64_t max_iters = 1000;
    int eval_every = 10;
};

struct ExperimentConfig {
    int version = 1;
    GeometryConfig geometry;
    EllipsesDistribution dataset;
    NoiseModel noise;
    UNetConfig unet;
    PretrainSection pretrain;
    SelectSection select;
    std::vector<MethodSection> methods;
    MetricsSection metrics;
    SpectraSection spectra;
    std::string test_phantom = "rings-and-texture";
    std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
    std::string output_dir = "out";

    void validate() const;
    // Sorted-key JSON; round-trips losslessly through load().
    std::string canonical_json() const;
    // FNV-1a over the canonical JSON with `seeds` and `output_dir` removed, so
    // artifact paths stay stable under seed/output overrides.
    uint64_t hash() const;

    static ExperimentConfig load(const std::string& path);
    static ExperimentConfig from_json_text(const std::string& text);
    void save(const std::string& path) const;

    const MethodSection* find_method(const std::string& name) const;
};

// Default experiment matching the desk-scale workflow; handy starting config.
ExperimentConfig default_config();

}  // namespace edip
