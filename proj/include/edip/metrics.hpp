#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace edip {

// 10*log10(range^2 / MSE), range = max(ground_truth) - min(ground_truth).
// Returns +inf when MSE is zero.
double psnr(std::span<const double> reconstruction, std::span<const double> ground_truth);

// Mean local SSIM, Gaussian window 11, sigma 1.5, K1=0.01, K2=0.03; the
// dynamic range convention matches psnr.
double ssim(std::span<const double> reconstruction, std::span<const double> ground_truth,
            int64_t height, int64_t width);

// Normalized l1/l2 sparsity: (sqrt(n) - |v|_1/|v|_2) / (sqrt(n) - 1).
// 0 for constant vectors, 1 for one-hot vectors. Throws on the zero vector.
double hoyer(std::span<const double> v);

double median(std::vector<double> values);  // by value; empty input throws

// PSNR traces from repeated runs on a shared iteration grid.
struct AggregatedTrace {
    std::vector<int64_t> iterations;
    std::vector<double> median_psnr;  // pointwise across runs
    std::vector<double> mean_psnr;
    std::vector<double> stddev_psnr;
    int num_runs = 0;
};

AggregatedTrace aggregate_traces(const std::vector<std::vector<int64_t>>& iteration_grids,
                                 const std::vector<std::vector<double>>& psnr_traces);

// Median of the median-trace over the trailing window (tail_fraction of the
// grid, at least one point).
double steady_psnr(const AggregatedTrace& trace, double tail_fraction);

constexpr int64_t kNotReached = -1;

// Minimal grid iteration where the median trace reaches baseline - margin;
// kNotReached when it never does.
int64_t rise_time(const AggregatedTrace& trace, double baseline_steady_psnr, double margin);

struct ConvergenceSummary {
    double steady_psnr_db = 0.0;
    int64_t rise_time_iter = kNotReached;
    double max_psnr_db = 0.0;
    int64_t max_psnr_iter = 0;
    double init_psnr_db = 0.0;  // mean over runs at the first grid point
};

ConvergenceSummary summarize(const AggregatedTrace& trace, double baseline_steady_psnr,
                             double margin, double tail_fraction);

}  // namespace edip
