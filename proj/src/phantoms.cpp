#include "edip/phantoms.hpp"

#include <algorithm>
#include <cmath>

#include "edip/error.hpp"

namespace edip {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::vector<double> rasterize_ellipses(std::span<const Ellipse> ellipses, int64_t n) {
    std::vector<double> img(static_cast<size_t>(n * n), 0.0);
    const double cell = 2.0 / n;
    for (const Ellipse& e : ellipses) {
        const double c = std::cos(e.phi), s = std::sin(e.phi);
        const double ia = 1.0 / (e.a * e.a), ib = 1.0 / (e.b * e.b);
        for (int64_t iy = 0; iy < n; ++iy) {
            const double py = -1.0 + (iy + 0.5) * cell;
            for (int64_t ix = 0; ix < n; ++ix) {
                const double px = -1.0 + (ix + 0.5) * cell;
                const double dx = px - e.cx, dy = py - e.cy;
                const double rx = c * dx + s * dy, ry = -s * dx + c * dy;
                if (rx * rx * ia + ry * ry * ib <= 1.0) img[iy * n + ix] += e.value;
            }
        }
    }
    return img;
}

void EllipsesDistribution::validate() const {
    if (count_min < 0 || count_max < count_min) throw Error("ellipses: bad count range");
    if (value_max < value_min) throw Error("ellipses: bad value range");
    if (axis_min <= 0.0 || axis_max > 1.0 || axis_max < axis_min)
        throw Error("ellipses: axis lengths must lie in (0, 1]");
    if (center_disk_radius < 0.0) throw Error("ellipses: bad center disk radius");
}

std::vector<double> generate_ellipses_image(const EllipsesDistribution& dist, int64_t n,
                                            uint64_t seed) {
    dist.validate();
    Rng rng(seed);
    const int count =
        dist.count_min + static_cast<int>(rng.integer(static_cast<uint64_t>(dist.count_max - dist.count_min) + 1));
    std::vector<Ellipse> es;
    es.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        Ellipse e;
        e.value = rng.uniform(dist.value_min, dist.value_max);
        e.a = rng.uniform(dist.axis_min, dist.axis_max);
        e.b = rng.uniform(dist.axis_min, dist.axis_max);
        const double r = dist.center_disk_radius * std::sqrt(rng.uniform());
        const double th = rng.uniform(0.0, 2.0 * kPi);
        e.cx = r * std::cos(th);
        e.cy = r * std::sin(th);
        e.phi = rng.uniform(0.0, kPi);
        es.push_back(e);
    }
    auto img = rasterize_ellipses(es, n);
    for (double& v : img) v = std::clamp(v, 0.0, 1.0);
    return img;
}

std::span<const Ellipse> shepp_logan_ellipses() {
    static const std::vector<Ellipse> table = [] {
        auto deg = [](double d) { return d * kPi / 180.0; };
        // value, a, b, cx, cy, phi
        return std::vector<Ellipse>{
            {2.00, 0.6900, 0.9200, 0.00, 0.0000, deg(0)},
            {-0.98, 0.6624, 0.8740, 0.00, -0.0184, deg(0)},
            {-0.02, 0.1100, 0.3100, 0.22, 0.0000, deg(-18)},
            {-0.02, 0.1600, 0.4100, -0.22, 0.0000, deg(18)},
            {0.01, 0.2100, 0.2500, 0.00, 0.3500, deg(0)},
            {0.01, 0.0460, 0.0460, 0.00, 0.1000, deg(0)},
            {0.01, 0.0460, 0.0460, 0.00, -0.1000, deg(0)},
            {0.01, 0.0460, 0.0230, -0.08, -0.6050, deg(0)},
            {0.01, 0.0230, 0.0230, 0.00, -0.6060, deg(0)},
            {0.01, 0.0230, 0.0460, 0.06, -0.6050, deg(0)},
        };
    }();
    return table;
}

std::vector<double> shepp_logan(int64_t n) {
    if (n < 16) throw Error("shepp_logan: image size must be >= 16");
    auto img = rasterize_ellipses(shepp_logan_ellipses(), n);
    // peak additive intensity is the skull ring value 2.0
    for (double& v : img) v = std::clamp(v / 2.0, 0.0, 1.0);
    return img;
}

std::vector<double> test_phantom(const std::string& kind, int64_t n) {
    std::vector<double> img(static_cast<size_t>(n * n), 0.0);
    const double cell = 2.0 / n;
    if (kind == "rings-and-texture") {
        // piecewise-constant cells of a polar grid, slightly spiraled so the
        // boundaries are curved, with a faint texture inside each cell
        for (int64_t iy = 0; iy < n; ++iy) {
            const double py = -1.0 + (iy + 0.5) * cell;
            for (int64_t ix = 0; ix < n; ++ix) {
                const double px = -1.0 + (ix + 0.5) * cell;
                const double r = std::hypot(px, py);
                if (r > 0.92) continue;
                const double th = std::atan2(py, px) + kPi + 2.5 * r;  // spiral twist
                const int64_t kr = static_cast<int64_t>(r / 0.185);
                const int64_t kt = static_cast<int64_t>(std::fmod(th, 2.0 * kPi) / (kPi / 3.0));
                const uint64_t h = mix64(0x9e11u + static_cast<uint64_t>(kr) * 131 +
                                         static_cast<uint64_t>(kt));
                double v = 0.15 + 0.8 * ((h >> 11) * (1.0 / 9007199254740992.0));
                v += 0.05 * std::sin(14.0 * px) * std::sin(13.0 * py);
                img[iy * n + ix] = std::clamp(v, 0.0, 1.0);
            }
        }
    } else if (kind == "voronoi-cells") {
        Rng rng(0xced5eedULL);
        const int num_seeds = 24;
        std::vector<double> sx(num_seeds), sy(num_seeds), sv(num_seeds);
        for (int i = 0; i < num_seeds; ++i) {
            const double r = 0.88 * std::sqrt(rng.uniform());
            const double th = rng.uniform(0.0, 2.0 * kPi);
            sx[i] = r * std::cos(th);
            sy[i] = r * std::sin(th);
            sv[i] = rng.uniform(0.1, 1.0);
        }
        for (int64_t iy = 0; iy < n; ++iy) {
            const double py = -1.0 + (iy + 0.5) * cell;
            for (int64_t ix = 0; ix < n; ++ix) {
                const double px = -1.0 + (ix + 0.5) * cell;
                if (std::hypot(px, py) > 0.92) continue;
                double d1 = 1e30, d2 = 1e30;
                int best = 0;
                for (int i = 0; i < num_seeds; ++i) {
                    const double d = std::hypot(px - sx[i], py - sy[i]);
                    if (d < d1) {
                        d2 = d1;
                        d1 = d;
                        best = i;
                    } else if (d < d2) {
                        d2 = d;
                    }
                }
                img[iy * n + ix] = (d2 - d1 < 0.015) ? 0.0 : sv[best];
            }
        }
    } else {
        throw Error("test_phantom: unknown kind '" + kind + "'");
    }
    return img;
}

Measurement simulate_measurement(const RayTransform& op, std::span<const double> image,
                                 const NoiseModel& noise, uint64_t seed) {
    if (noise.relative_stddev < 0.0) throw Error("noise: relative_stddev must be >= 0");
    Measurement m;
    m.sinogram = op.forward(image);
    if (noise.relative_stddev > 0.0) {
        double mean = 0.0;
        for (double v : m.sinogram) mean += v;
        mean /= static_cast<double>(m.sinogram.size());
        const double sigma = noise.relative_stddev * mean;
        Rng rng(seed);
        for (double& v : m.sinogram) v += rng.normal(0.0, sigma);
    }
    m.fbp = op.fbp(m.sinogram);
    return m;
}

SampleRecord DatasetStream::next() {
    SampleRecord rec;
    rec.seed = record_seed(index_);
    index_ += 1;
    rec.ground_truth = generate_ellipses_image(dist_, op_->geometry().image_size, rec.seed);
    auto m = simulate_measurement(*op_, rec.ground_truth, noise_, mix64(rec.seed ^ 0x6e6f697365ULL));
    rec.sinogram = std::move(m.sinogram);
    rec.fbp = std::move(m.fbp);
    return rec;
}

}  // namespace edip
