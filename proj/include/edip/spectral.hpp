#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edip/linalg.hpp"
#include "edip/ray_transform.hpp"
#include "edip/unet.hpp"

namespace edip {

struct RsvdConfig {
    int rank = 100;        // returned components
    int oversampling = 5;  // extra probes, discarded after the SVD
    uint64_t probe_seed = 0;
    double fd_eps_scale = 1e-3;  // eps = scale * (1 + |theta|) / |omega| per probe

    void validate(int64_t m, int64_t p) const;
};

// Central-difference Jacobian-vector product of the measurement map
// theta -> A phi_theta(input), evaluated at `params` in direction omega.
std::vector<double> net_jvp(const UNetParams& params, std::span<const double> input,
                            const RayTransform& op, std::span<const double> omega, double eps);

// Exact reverse-mode product F'(theta)^T q through the tape.
std::vector<double> net_vjp(const UNetParams& params, std::span<const double> input,
                            const RayTransform& op, std::span<const double> cotangent);

struct SpectralReport {
    std::vector<double> singular_values;       // rank entries, descending
    Matrix right_singular_vectors;             // rank x p, unit-norm rows
    std::vector<std::string> block_names;      // parameter blocks, in order
    std::vector<int64_t> block_sizes;
    std::vector<std::string> block_tags;       // "encoder" / "decoder"
    Matrix block_mass;                         // rank x num_blocks, rows sum to 1
    std::vector<double> hoyer_per_vector;      // rank entries
    std::string checkpoint_tag;                // init | mid | converged
};

// Named partition of the parameter vector used for block-mass accounting.
struct BlockLayout {
    std::vector<std::string> names;
    std::vector<int64_t> sizes;
    std::vector<std::string> tags;  // "encoder" / "decoder"
};

using JvpFn = std::function<std::vector<double>(std::span<const double> omega, double eps)>;
using VjpFn = std::function<std::vector<double>(std::span<const double> cotangent)>;

// Core of the randomized SVD over an implicit m x p linear map given by
// jvp/vjp callbacks; theta_norm feeds the per-probe step-size rule.
SpectralReport rsvd_linop(int64_t m, int64_t p, const JvpFn& jvp, const VjpFn& vjp,
                          const BlockLayout& layout, double theta_norm,
                          const RsvdConfig& config);

// Randomized SVD of the linearized measurement map (Gaussian probing via
// central-difference JVPs, Householder range finder, small dense SVD formed
// through backpropagated rows).
SpectralReport rsvd(const UNetParams& params, std::span<const double> input,
                    const RayTransform& op, const RsvdConfig& config);

struct BlockMassSummary {
    std::vector<double> leading_mean_mass;   // per block, mean over first `group` vectors
    std::vector<double> trailing_mean_mass;  // per block, mean over last `group` vectors
    double leading_mean_hoyer = 0.0;
    double trailing_mean_hoyer = 0.0;
    double leading_encoder_mass = 0.0;  // tag-level aggregates
    double leading_decoder_mass = 0.0;
    double trailing_encoder_mass = 0.0;
    double trailing_decoder_mass = 0.0;
};

BlockMassSummary block_histogram(const SpectralReport& report, int group = 20);

}  // namespace edip
