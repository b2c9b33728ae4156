#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edip/phantoms.hpp"
#include "edip/optim.hpp"
#include "edip/unet.hpp"

namespace edip {

struct PretrainConfig {
    int64_t epochs = 100;
    int64_t samples_per_epoch = 3200;
    int64_t val_samples = 320;
    int64_t batch_size = 16;
    LearningRateSchedule lr_schedule = LearningRateSchedule::constant(1e-3);
    int64_t checkpoint_every_epochs = 20;
    uint64_t seed = 0;  // parameter init; dataset split seed derives from it
    std::string output_dir;  // checkpoints land here; empty = no files
    // Resume from a checkpoint written by a previous run; picks up the
    // optimizer-state sidecar (<ckpt>.opt) and the stream position.
    std::optional<std::string> resume_checkpoint;

    void validate() const;
};

struct EpochRecord {
    int64_t epoch;  // 1-based
    double train_loss;  // running mean over the epoch
    double val_loss;
    std::string checkpoint_path;  // empty when no checkpoint was written
};

struct PretrainRecord {
    std::vector<EpochRecord> epochs;
    std::vector<std::string> checkpoint_paths;  // ordered by epoch
    std::string min_val_loss_checkpoint;
    double min_val_loss = 0.0;
    bool aborted = false;
    UNetParams final_params;
};

// Supervised pretraining of phi(fbp) -> ground truth by per-pixel MSE over a
// streaming ellipses dataset. Validation split is evaluated after each epoch.
PretrainRecord pretrain(const PretrainConfig& config, const UNetConfig& arch,
                        const EllipsesDistribution& dist, const RayTransform& op,
                        const NoiseModel& noise);

struct FeedForwardEval {
    std::vector<double> output;
    double psnr_db;
};

// Pure feed-forward application of a checkpointed network to one sample.
FeedForwardEval eval_checkpoint_feedforward(const UNetParams& params,
                                            std::span<const double> fbp_input,
                                            std::span<const double> ground_truth);

}  // namespace edip
