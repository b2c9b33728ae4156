#include "edip/ray_transform.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "edip/op_detail.hpp"

namespace edip {

namespace {
constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x, y;
};

// Siddon traversal: exact intersection lengths of the segment src->dst with
// the n x n pixel grid covering [-1,1]^2. Appends (pixel, length) pairs.
void trace_ray(Vec2 src, Vec2 dst, int64_t n, std::vector<std::pair<int64_t, double>>& hits) {
    const double dx = dst.x - src.x, dy = dst.y - src.y;
    const double len = std::hypot(dx, dy);
    if (len == 0.0) return;
    // clip the parametric segment t in [0,1] against the square
    double t0 = 0.0, t1 = 1.0;
    auto clip = [&](double p, double q) {
        // p * t <= q
        if (p == 0.0) return q >= 0.0;
        double r = q / p;
        if (p < 0) {
            if (r > t1) return false;
            if (r > t0) t0 = r;
        } else {
            if (r < t0) return false;
            if (r < t1) t1 = r;
        }
        return true;
    };
    if (!clip(-dx, src.x + 1.0)) return;
    if (!clip(dx, 1.0 - src.x)) return;
    if (!clip(-dy, src.y + 1.0)) return;
    if (!clip(dy, 1.0 - src.y)) return;
    if (t1 <= t0) return;

    const double cell = 2.0 / n;
    auto cell_of = [&](double t) {
        double px = src.x + t * dx, py = src.y + t * dy;
        int64_t ix = std::clamp<int64_t>(static_cast<int64_t>((px + 1.0) / cell), 0, n - 1);
        int64_t iy = std::clamp<int64_t>(static_cast<int64_t>((py + 1.0) / cell), 0, n - 1);
        return std::pair<int64_t, int64_t>(ix, iy);
    };
    auto [ix, iy] = cell_of(t0 + 1e-12 * (t1 - t0));
    const int sx = dx > 0 ? 1 : -1, sy = dy > 0 ? 1 : -1;
    // parametric distance to the next vertical / horizontal grid line
    const double inf = std::numeric_limits<double>::infinity();
    double tx = inf, ty = inf, dtx = inf, dty = inf;
    if (dx != 0.0) {
        dtx = cell / std::abs(dx);
        double next = -1.0 + (ix + (sx > 0 ? 1 : 0)) * cell;
        tx = (next - src.x) / dx;
    }
    if (dy != 0.0) {
        dty = cell / std::abs(dy);
        double next = -1.0 + (iy + (sy > 0 ? 1 : 0)) * cell;
        ty = (next - src.y) / dy;
    }
    double t = t0;
    while (t < t1 - 1e-15) {
        double tn = std::min({tx, ty, t1});
        if (tn > t) hits.emplace_back(iy * n + ix, (tn - t) * len);
        if (tx <= ty && tx <= t1) {
            ix += sx;
            tx += dtx;
            if (ix < 0 || ix >= n) break;
        } else if (ty < tx && ty <= t1) {
            iy += sy;
            ty += dty;
            if (iy < 0 || iy >= n) break;
        }
        t = tn;
    }
}

// iterative radix-2 FFT, size must be a power of two
void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1 : -1);
        std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0);
            for (size_t j = 0; j < len / 2; ++j) {
                auto u = a[i + j], v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

}  // namespace

std::vector<double> FanBeamGeometry::uniform_angles(int64_t n, double start_rad, double span_rad) {
    std::vector<double> a(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) a[i] = start_rad + span_rad * static_cast<double>(i) / n;
    return a;
}

void FanBeamGeometry::validate() const {
    if (image_size < 1 || num_detector_pixels < 1 || angles.empty())
        throw Error("geometry: counts must be positive");
    if (source_radius <= std::sqrt(2.0))
        throw Error("geometry: source_radius must exceed sqrt(2) (source outside image square)");
    if (source_radius + detector_radius <= 0.0)
        throw Error("geometry: detector lies behind the source");
    if (detector_extent <= 0.0) throw Error("geometry: detector_extent must be positive");
    for (size_t i = 0; i < angles.size(); ++i) {
        if (angles[i] < 0.0 || angles[i] >= 2.0 * kPi)
            throw Error("geometry: angles must lie in [0, 2pi)");
        if (i > 0 && angles[i] <= angles[i - 1])
            throw Error("geometry: angles must be strictly increasing");
    }
}

RayTransform::RayTransform(FanBeamGeometry geometry) : geom_(std::move(geometry)) {
    geom_.validate();
    const int64_t n = geom_.image_size, nd = geom_.num_detector_pixels;
    const double rs = geom_.source_radius, rd = geom_.detector_radius;
    SparseCsr m;
    m.rows = geom_.num_rays();
    m.cols = geom_.num_pixels();
    m.row_offsets.assign(static_cast<size_t>(m.rows) + 1, 0);
    std::vector<std::pair<int64_t, double>> hits;
    for (size_t a = 0; a < geom_.angles.size(); ++a) {
        const double ca = std::cos(geom_.angles[a]), sa = std::sin(geom_.angles[a]);
        const Vec2 src{rs * ca, rs * sa};
        const Vec2 center{-rd * ca, -rd * sa};
        const Vec2 u{-sa, ca};  // detector tangent
        for (int64_t j = 0; j < nd; ++j) {
            const double t = geom_.detector_extent * ((j + 0.5) / static_cast<double>(nd) - 0.5);
            const Vec2 dst{center.x + t * u.x, center.y + t * u.y};
            hits.clear();
            trace_ray(src, dst, n, hits);
            std::sort(hits.begin(), hits.end());
            for (auto& [pix, w] : hits)
                if (w > 0.0) {
                    m.col_indices.push_back(static_cast<uint64_t>(pix));
                    m.values.push_back(w);
                }
            m.row_offsets[a * nd + j + 1] = m.col_indices.size();
        }
    }
    mat_ = std::make_shared<SparseCsr>(std::move(m));
    mat_t_ = std::make_shared<SparseCsr>(mat_->transposed());
}

RayTransform::RayTransform(FanBeamGeometry geometry, SparseCsr matrix) : geom_(std::move(geometry)) {
    geom_.validate();
    if (matrix.rows != geom_.num_rays() || matrix.cols != geom_.num_pixels())
        throw ShapeError("ray transform: matrix does not match geometry");
    mat_ = std::make_shared<SparseCsr>(std::move(matrix));
    mat_t_ = std::make_shared<SparseCsr>(mat_->transposed());
}

std::vector<double> RayTransform::forward(std::span<const double> image) const {
    if (static_cast<int64_t>(image.size()) != mat_->cols)
        throw ShapeError("forward: image has " + std::to_string(image.size()) + " pixels, expected " +
                         std::to_string(mat_->cols));
    std::vector<double> y(static_cast<size_t>(mat_->rows));
    mat_->matvec(image.data(), y.data());
    return y;
}

std::vector<double> RayTransform::adjoint(std::span<const double> sinogram) const {
    if (static_cast<int64_t>(sinogram.size()) != mat_->rows)
        throw ShapeError("adjoint: sinogram has " + std::to_string(sinogram.size()) +
                         " entries, expected " + std::to_string(mat_->rows));
    std::vector<double> x(static_cast<size_t>(mat_->cols));
    mat_t_->matvec(sinogram.data(), x.data());
    return x;
}

Tensor RayTransform::forward_op(const Tensor& image) const {
    if (image.numel() != mat_->cols)
        throw ShapeError("forward_op: image has " + std::to_string(image.numel()) +
                         " elements, expected " + std::to_string(mat_->cols));
    std::vector<double> y(static_cast<size_t>(mat_->rows));
    mat_->matvec(image.data().data(), y.data());
    Tensor r = Tensor::from_data({mat_->rows}, std::move(y));
    auto xn = image.node();
    auto mt = mat_t_;
    detail::finalize_op("ray_forward", r, {image}, [xn, mt](Node& n) {
        if (!xn->on_tape) return;
        xn->ensure_grad();
        std::vector<double> gx(static_cast<size_t>(mt->rows));
        mt->matvec(n.grad.data(), gx.data());
        for (size_t i = 0; i < gx.size(); ++i) xn->grad[i] += gx[i];
    });
    return r;
}

std::vector<double> RayTransform::fbp(std::span<const double> sinogram) const {
    const int64_t na = static_cast<int64_t>(geom_.angles.size());
    const int64_t nd = geom_.num_detector_pixels;
    if (na < 2) throw Error("fbp: need at least 2 angles");
    if (static_cast<int64_t>(sinogram.size()) != na * nd)
        throw ShapeError("fbp: sinogram size mismatch");
    const double rs = geom_.source_radius;
    const double rsd = geom_.source_radius + geom_.detector_radius;
    const double dt = geom_.detector_extent / static_cast<double>(nd);  // physical pitch
    const double vscale = rs / rsd;  // rescale onto virtual detector through the origin
    const double ds = dt * vscale;

    size_t nfft = 1;
    while (nfft < static_cast<size_t>(2 * nd)) nfft <<= 1;

    // frequency response of the band-limited ramp (discrete Ram-Lak kernel)
    std::vector<std::complex<double>> ramp(nfft, 0.0);
    ramp[0] = 1.0 / (4.0 * ds * ds);
    for (size_t k = 1; k < nfft / 2 + 1; ++k) {
        double v = (k % 2 == 1) ? -1.0 / (kPi * kPi * k * k * ds * ds) : 0.0;
        ramp[k] = v;
        ramp[nfft - k] = v;
    }
    fft(ramp, false);

    // filter all angle rows
    std::vector<double> filtered(static_cast<size_t>(na * nd));
    std::vector<std::complex<double>> row(nfft);
    for (int64_t a = 0; a < na; ++a) {
        std::fill(row.begin(), row.end(), std::complex<double>(0.0));
        for (int64_t j = 0; j < nd; ++j) {
            const double t = geom_.detector_extent * ((j + 0.5) / static_cast<double>(nd) - 0.5);
            const double cosw = rsd / std::sqrt(rsd * rsd + t * t);
            row[j] = sinogram[a * nd + j] * cosw;
        }
        fft(row, false);
        for (size_t k = 0; k < nfft; ++k) row[k] *= ramp[k].real();
        fft(row, true);
        for (int64_t j = 0; j < nd; ++j) filtered[a * nd + j] = row[j].real() * ds;
    }

    // distance-weighted backprojection with linear detector interpolation
    const int64_t n = geom_.image_size;
    const double cell = 2.0 / n;
    const double dlam = na > 1 ? (geom_.angles[1] - geom_.angles[0]) : 0.0;
    std::vector<double> img(static_cast<size_t>(n * n), 0.0);
    for (int64_t a = 0; a < na; ++a) {
        const double ca = std::cos(geom_.angles[a]), sa = std::sin(geom_.angles[a]);
        const double* frow = filtered.data() + a * nd;
        for (int64_t iy = 0; iy < n; ++iy) {
            const double py = -1.0 + (iy + 0.5) * cell;
            for (int64_t ix = 0; ix < n; ++ix) {
                const double px = -1.0 + (ix + 0.5) * cell;
                const double u = (rs - (px * ca + py * sa)) / rs;
                const double tp = rsd * (px * -sa + py * ca) / (rs - (px * ca + py * sa));
                const double jf = tp / dt + 0.5 * nd - 0.5;
                const int64_t j0 = static_cast<int64_t>(std::floor(jf));
                if (j0 < -1 || j0 > nd - 1) continue;
                const double fr = jf - j0;
                double q = 0.0;
                if (j0 >= 0) q += (1.0 - fr) * frow[j0];
                if (j0 + 1 <= nd - 1) q += fr * frow[j0 + 1];
                img[iy * n + ix] += dlam * q / (u * u);
            }
        }
    }
    // each line is measured twice over a full circle
    const double span = dlam * static_cast<double>(na);
    const double cover = span >= 1.99 * kPi ? 0.5 : 1.0;
    for (double& v : img) v = std::max(0.0, v * cover);
    return img;
}

}  // namespace edip
