#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edip/ray_transform.hpp"
#include "edip/rng.hpp"

namespace edip {

struct Ellipse {
    double value;     // additive intensity
    double a, b;      // semi-axes (fraction of the [-1,1] extent)
    double cx, cy;    // center
    double phi;       // rotation, radians
};

// Rasterize a sum of ellipses on the n x n grid (pixel-center sampling),
// without clipping.
std::vector<double> rasterize_ellipses(std::span<const Ellipse> ellipses, int64_t n);

struct EllipsesDistribution {
    int count_min = 3;
    int count_max = 10;
    double value_min = 0.1;
    double value_max = 1.0;
    double axis_min = 0.05;
    double axis_max = 0.4;
    double center_disk_radius = 0.8;

    void validate() const;
};

// Deterministic function of (dist, n, seed); overlaps sum, then clip to [0,1].
std::vector<double> generate_ellipses_image(const EllipsesDistribution& dist, int64_t n,
                                            uint64_t seed);

// Classical 10-ellipse head phantom, rescaled to [0,1].
std::vector<double> shepp_logan(int64_t n);
std::span<const Ellipse> shepp_logan_ellipses();

// Out-of-distribution test phantoms; kind is "rings-and-texture" or
// "voronoi-cells". Piecewise-constant cells with thin curved boundaries,
// values in [0,1], byte-identical across runs.
std::vector<double> test_phantom(const std::string& kind, int64_t n);

struct NoiseModel {
    double relative_stddev = 0.05;  // sigma as a fraction of mean(A x)
};

struct Measurement {
    std::vector<double> sinogram;  // A x + noise
    std::vector<double> fbp;
};

Measurement simulate_measurement(const RayTransform& op, std::span<const double> image,
                                 const NoiseModel& noise, uint64_t seed);

struct SampleRecord {
    std::vector<double> ground_truth;
    std::vector<double> sinogram;
    std::vector<double> fbp;
    uint64_t seed;
};

// Infinite deterministic stream of samples. Train (split 0) and validation
// (split 1) use disjoint per-record seeds derived from split_seed.
class DatasetStream {
  public:
    DatasetStream(EllipsesDistribution dist, const RayTransform& op, NoiseModel noise,
                  uint64_t split_seed, int split)
        : dist_(dist), op_(&op), noise_(noise), split_seed_(split_seed), split_(split) {
        dist_.validate();
    }

    SampleRecord next();
    void reset() { index_ = 0; }
    void seek(uint64_t index) { index_ = index; }
    uint64_t record_seed(uint64_t index) const {
        return mix64(mix64(split_seed_) + 2 * index + static_cast<uint64_t>(split_));
    }

  private:
    EllipsesDistribution dist_;
    const RayTransform* op_;
    NoiseModel noise_;
    uint64_t split_seed_;
    int split_;
    uint64_t index_ = 0;
};

}  // namespace edip
