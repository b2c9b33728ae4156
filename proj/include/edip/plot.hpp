#pragma once

#include <array>
#include <string>
#include <vector>

namespace edip {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotOptions {
    int width = 900;
    int height = 600;
    bool log_x = false;
    bool log_y = false;
    std::string title;
    std::string x_label;
    std::string y_label;
};

// Rasterize line series into an RGB PNG: framed axes, decade gridlines on log
// scales, tick labels from a built-in 5x7 font, legend in the top-right.
// Non-finite points and non-positive values on log axes are skipped.
void line_plot(const std::string& path, const std::vector<PlotSeries>& series,
               const PlotOptions& options);

}  // namespace edip
