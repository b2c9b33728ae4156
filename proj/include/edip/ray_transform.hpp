#pragma once

#include <memory>
#include <span>
#include <vector>

#include "edip/serialize.hpp"
#include "edip/tensor.hpp"

namespace edip {

// Fan-beam scan over a square image grid with physical extent [-1,1]^2.
// Source at radius source_radius, flat detector at radius detector_radius on
// the opposite side, detector_extent is the physical detector width.
struct FanBeamGeometry {
    int64_t image_size = 128;
    std::vector<double> angles;  // source angles in radians
    double source_radius = 3.0;
    double detector_radius = 3.0;
    int64_t num_detector_pixels = 183;
    double detector_extent = 7.0;

    static std::vector<double> uniform_angles(int64_t n, double start_rad, double span_rad);
    void validate() const;
    int64_t num_rays() const { return static_cast<int64_t>(angles.size()) * num_detector_pixels; }
    int64_t num_pixels() const { return image_size * image_size; }
};

// Explicit sparse fan-beam projector with exact transpose adjoint.
// Rows are ordered angle-major: ray (a, j) -> row a * num_detector_pixels + j.
// Pixels are ordered row-major with x = -1 + (ix+0.5)*d, y = -1 + (iy+0.5)*d
// and flat index iy * image_size + ix.
class RayTransform {
  public:
    explicit RayTransform(FanBeamGeometry geometry);  // Siddon assembly
    RayTransform(FanBeamGeometry geometry, SparseCsr matrix);

    const FanBeamGeometry& geometry() const { return geom_; }
    const SparseCsr& matrix() const { return *mat_; }
    const SparseCsr& matrix_transposed() const { return *mat_t_; }

    std::vector<double> forward(std::span<const double> image) const;
    std::vector<double> adjoint(std::span<const double> sinogram) const;

    // Differentiable forward; records on the active tape.
    Tensor forward_op(const Tensor& image) const;

    // Flat-detector fan-beam FBP (cosine weighting, Ram-Lak ramp filtering in
    // the frequency domain, distance-weighted backprojection). Output >= 0.
    std::vector<double> fbp(std::span<const double> sinogram) const;

  private:
    FanBeamGeometry geom_;
    std::shared_ptr<const SparseCsr> mat_;
    std::shared_ptr<const SparseCsr> mat_t_;
};

}  // namespace edip
