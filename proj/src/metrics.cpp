#include "edip/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "edip/error.hpp"

namespace edip {

double psnr(std::span<const double> reconstruction, std::span<const double> ground_truth) {
    if (reconstruction.size() != ground_truth.size())
        throw ShapeError("psnr: size mismatch");
    if (ground_truth.empty()) throw ShapeError("psnr: empty input");
    double lo = ground_truth[0], hi = ground_truth[0], mse = 0.0;
    for (size_t i = 0; i < ground_truth.size(); ++i) {
        lo = std::min(lo, ground_truth[i]);
        hi = std::max(hi, ground_truth[i]);
        const double d = reconstruction[i] - ground_truth[i];
        mse += d * d;
    }
    mse /= static_cast<double>(ground_truth.size());
    const double range = hi - lo;
    if (range <= 0.0) throw Error("psnr: constant ground truth has no dynamic range");
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(range * range / mse);
}

double ssim(std::span<const double> reconstruction, std::span<const double> ground_truth,
            int64_t height, int64_t width) {
    if (reconstruction.size() != ground_truth.size() ||
        static_cast<int64_t>(ground_truth.size()) != height * width)
        throw ShapeError("ssim: size mismatch");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    if (height < kWin || width < kWin) throw Error("ssim: image smaller than the 11x11 window");
    double lo = ground_truth[0], hi = ground_truth[0];
    for (double v : ground_truth) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi - lo;
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);

    double win[kWin];
    double norm = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        win[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        norm += win[i];
    }
    for (double& w : win) w /= norm;

    double acc = 0.0;
    int64_t count = 0;
    // valid windows only
    for (int64_t y = 0; y + kWin <= height; ++y)
        for (int64_t x = 0; x + kWin <= width; ++x) {
            double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
            for (int i = 0; i < kWin; ++i)
                for (int j = 0; j < kWin; ++j) {
                    const double w = win[i] * win[j];
                    const double a = reconstruction[(y + i) * width + (x + j)];
                    const double b = ground_truth[(y + i) * width + (x + j)];
                    mx += w * a;
                    my += w * b;
                    sxx += w * a * a;
                    syy += w * b * b;
                    sxy += w * a * b;
                }
            const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
            acc += ((2 * mx * my + c1) * (2 * cxy + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return acc / static_cast<double>(count);
}

double hoyer(std::span<const double> v) {
    if (v.size() < 2) throw Error("hoyer: vector must have length >= 2");
    double l1 = 0.0, l2 = 0.0;
    for (double x : v) {
        l1 += std::abs(x);
        l2 += x * x;
    }
    if (l2 == 0.0) throw Error("hoyer: zero vector");
    const double sqn = std::sqrt(static_cast<double>(v.size()));
    return (sqn - l1 / std::sqrt(l2)) / (sqn - 1.0);
}

double median(std::vector<double> values) {
    if (values.empty()) throw Error("median: empty input");
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AggregatedTrace aggregate_traces(const std::vector<std::vector<int64_t>>& iteration_grids,
                                 const std::vector<std::vector<double>>& psnr_traces) {
    if (iteration_grids.empty() || iteration_grids.size() != psnr_traces.size())
        throw Error("aggregate_traces: need matching non-empty grids and traces");
    for (size_t r = 1; r < iteration_grids.size(); ++r)
        if (iteration_grids[r] != iteration_grids[0])
            throw Error("aggregate_traces: runs must share the iteration grid");
    AggregatedTrace out;
    out.iterations = iteration_grids[0];
    out.num_runs = static_cast<int>(psnr_traces.size());
    const size_t npts = out.iterations.size();
    for (const auto& t : psnr_traces)
        if (t.size() != npts) throw Error("aggregate_traces: trace length mismatch");
    out.median_psnr.resize(npts);
    out.mean_psnr.resize(npts);
    out.stddev_psnr.resize(npts);
    std::vector<double> col(psnr_traces.size());
    for (size_t i = 0; i < npts; ++i) {
        double m = 0.0;
        for (size_t r = 0; r < psnr_traces.size(); ++r) {
            col[r] = psnr_traces[r][i];
            m += col[r];
        }
        m /= static_cast<double>(col.size());
        double var = 0.0;
        for (double v : col) var += (v - m) * (v - m);
        out.median_psnr[i] = median(col);
        out.mean_psnr[i] = m;
        out.stddev_psnr[i] = std::sqrt(var / static_cast<double>(col.size()));
    }
    return out;
}

double steady_psnr(const AggregatedTrace& trace, double tail_fraction) {
    if (trace.median_psnr.empty()) throw Error("steady_psnr: empty trace");
    size_t tail = static_cast<size_t>(
        std::llround(tail_fraction * static_cast<double>(trace.median_psnr.size())));
    tail = std::clamp<size_t>(tail, 1, trace.median_psnr.size());
    std::vector<double> window(trace.median_psnr.end() - static_cast<std::ptrdiff_t>(tail),
                               trace.median_psnr.end());
    return median(std::move(window));
}

int64_t rise_time(const AggregatedTrace& trace, double baseline_steady_psnr, double margin) {
    if (margin <= 0.0) throw Error("rise_time: margin must be positive");
    for (size_t i = 0; i < trace.median_psnr.size(); ++i)
        if (trace.median_psnr[i] >= baseline_steady_psnr - margin) return trace.iterations[i];
    return kNotReached;
}

ConvergenceSummary summarize(const AggregatedTrace& trace, double baseline_steady_psnr,
                             double margin, double tail_fraction) {
    ConvergenceSummary s;
    s.steady_psnr_db = steady_psnr(trace, tail_fraction);
    s.rise_time_iter = rise_time(trace, baseline_steady_psnr, margin);
    size_t best = 0;
    for (size_t i = 1; i < trace.median_psnr.size(); ++i)
        if (trace.median_psnr[i] > trace.median_psnr[best]) best = i;
    s.max_psnr_db = trace.median_psnr[best];
    s.max_psnr_iter = trace.iterations[best];
    s.init_psnr_db = trace.mean_psnr.front();
    return s;
}

}  // namespace edip
