#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edip/optim.hpp"
#include "edip/ray_transform.hpp"
#include "edip/unet.hpp"

namespace edip {

enum class InputMode { Noise, Fbp };

// Moving average of |loss(i+1) - loss(i)| dropping below threshold stops the
// run.
struct StopRule {
    int window = 100;
    double threshold = 1e-7;
};

struct DipConfig {
    InputMode input_mode = InputMode::Noise;
    std::optional<std::string> init_checkpoint;  // random init when absent
    uint64_t seed = 0;
    bool freeze_encoder = false;
    double gamma_prime = 1e-4;  // TV weight
    LearningRateSchedule lr_schedule = LearningRateSchedule::constant(1e-4);
    int64_t max_iters = 1000;
    std::optional<StopRule> stop_rule;
    int eval_every = 10;  // PSNR logging cadence
    std::vector<int64_t> snapshot_iters;  // flattened parameter snapshots

    void validate() const;
};

struct IterRecord {
    int64_t iter;
    double loss;
    double data_fit;
    double tv;
    double psnr;  // NaN when not evaluated at this iteration
    double wall_ms;
};

struct RunHistory {
    std::vector<IterRecord> records;
    int64_t min_loss_iter = 0;
    double min_loss = 0.0;
    std::optional<int64_t> stop_iter;
    bool aborted = false;  // non-finite loss encountered

    std::vector<int64_t> psnr_grid() const;
    std::vector<double> psnr_trace() const;
};

struct DipResult {
    RunHistory history;
    std::vector<double> final_output;     // network output at the last iterate
    std::vector<double> min_loss_output;  // output at the minimum-loss iterate
    UNetParams params;
    std::map<int64_t, std::vector<double>> snapshots;  // iter -> flat params
    std::vector<double> input;  // the fixed network input z
};

struct LossParts {
    double loss;
    double data_fit;
    double tv;
};

// (1/m)|A phi - y|^2 + gamma' (|d_h phi|_1 + |d_v phi|_1) for a given output
// image; pure evaluation, no tape needed.
LossParts dip_loss(const RayTransform& op, std::span<const double> output_image,
                   std::span<const double> y_delta, double gamma_prime);

// Differentiable loss on the active tape; `output` is the network output
// [1,H,W].
Tensor dip_loss_op(const RayTransform& op, const Tensor& output, const Tensor& y_delta,
                   double gamma_prime, double* data_fit_out = nullptr, double* tv_out = nullptr);

// Adam warm-up schedule used with pretrained noise-input runs: linear
// decrease from 5e-4 to 1e-4 over the first 5k iterations by default.
LearningRateSchedule warmup_schedule(double initial_lr = 5e-4, double final_lr = 1e-4,
                                     int64_t transition_iters = 5000);

// The unsupervised reconstruction loop (DIP / EDIP and fixed-encoder
// variants). ground_truth may be empty; PSNR is logged when it is given.
DipResult dip_reconstruct(const DipConfig& config, const UNetConfig& arch, const RayTransform& op,
                          std::span<const double> y_delta,
                          std::span<const double> ground_truth = {});

struct TvBaselineResult {
    std::vector<double> image;
    std::vector<IterRecord> history;
};

// TV-regularized reconstruction directly over the image (no network).
TvBaselineResult baseline_tv_reconstruct(const RayTransform& op, std::span<const double> y_delta,
                                         double gamma_prime, double lr, int64_t iters,
                                         std::span<const double> ground_truth = {},
                                         int eval_every = 10);

}  // namespace edip
