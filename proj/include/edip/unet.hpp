#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "edip/ops.hpp"
#include "edip/tensor.hpp"

namespace edip {

struct UNetConfig {
    int scales = 4;
    int channels = 32;
    int skip_channels = 4;
    int kernel_size = 3;
    int groups = 8;  // group normalization

    void validate() const;
    uint64_t hash() const;
};

enum class BlockTag { Encoder, Decoder };

struct ParamBlock {
    std::string name;
    BlockTag tag;
    Tensor tensor;
};

// Flat parameter set for the multi-scale network, partitioned into encoder
// (contracting path + bottleneck) and decoder (skip projections, expanding
// path, output head) blocks.
struct UNetParams {
    UNetConfig config;
    std::vector<ParamBlock> blocks;
    std::vector<bool> frozen;  // per block; frozen blocks get no updates

    int64_t num_params() const;
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> flat);
    std::vector<size_t> block_indices(BlockTag tag) const;
    void freeze(BlockTag tag);
    UNetParams clone() const;
};

// Closed-form parameter count for a config (no allocation).
int64_t unet_param_count(const UNetConfig& config);

// Kaiming-uniform weights, zero biases, unit group-norm gains.
UNetParams init_params(const UNetConfig& config, uint64_t seed);

// input [1,H,W] (or [H,W]); H and W divisible by 2^(scales-1).
// Output [1,H,W], values in (0,1) via the sigmoid head.
Tensor unet_forward(const UNetParams& params, const Tensor& input);

struct CheckpointMeta {
    uint64_t epoch = 0;
    uint64_t seed = 0;
    double validation_loss = 0.0;
};

void save_checkpoint(const std::string& path, const UNetParams& params, const CheckpointMeta& meta);

struct Checkpoint {
    UNetParams params;
    CheckpointMeta meta;
};

// Throws when the stored config hash does not match `expected`.
Checkpoint load_checkpoint(const std::string& path, const UNetConfig& expected);
CheckpointMeta peek_checkpoint_meta(const std::string& path);

}  // namespace edip
