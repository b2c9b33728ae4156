#include "edip/plot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

#include "edip/error.hpp"
#include "edip/image_io.hpp"

namespace edip {

namespace {

using Color = std::array<unsigned char, 3>;

constexpr Color kPalette[] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},   {214, 39, 40},
    {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127},
};

// 5x7 bitmap glyphs, one byte per row, low 5 bits used (MSB on the left).
struct Glyph {
    char c;
    unsigned char rows[7];
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x04}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'=', {0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const unsigned char* glyph_rows(char c) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    for (const auto& g : kFont)
        if (g.c == c) return g.rows;
    return nullptr;
}

class Canvas {
  public:
    Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<size_t>(w) * h * 3, 255) {}

    void set(int x, int y, Color c) {
        if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
        unsigned char* p = &px_[(static_cast<size_t>(y) * w_ + x) * 3];
        p[0] = c[0];
        p[1] = c[1];
        p[2] = c[2];
    }

    void line(int x0, int y0, int x1, int y1, Color c) {
        const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        for (;;) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    void thick_line(int x0, int y0, int x1, int y1, Color c) {
        line(x0, y0, x1, y1, c);
        line(x0, y0 + 1, x1, y1 + 1, c);
    }

    void text(int x, int y, const std::string& s, Color c) {
        for (char ch : s) {
            const unsigned char* rows = glyph_rows(ch);
            if (rows) {
                for (int r = 0; r < 7; ++r)
                    for (int b = 0; b < 5; ++b)
                        if (rows[r] & (1 << (4 - b))) set(x + b, y + r, c);
            }
            x += 6;
        }
    }

    void save(const std::string& path) const { write_png(path, px_, w_, h_, 3); }

  private:
    int w_, h_;
    std::vector<unsigned char> px_;
};

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// linear tick step of the form {1,2,5} * 10^k giving 4-8 ticks
double nice_step(double range) {
    if (range <= 0) return 1.0;
    const double raw = range / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    if (frac < 1.5) return mag;
    if (frac < 3.5) return 2 * mag;
    if (frac < 7.5) return 5 * mag;
    return 10 * mag;
}

}  // namespace

void line_plot(const std::string& path, const std::vector<PlotSeries>& series,
               const PlotOptions& opt) {
    if (series.empty()) throw Error("line_plot: no series");
    const int ml = 64, mr = 16, mt = opt.title.empty() ? 16 : 28, mb = 40;
    const int pw = opt.width - ml - mr, ph = opt.height - mt - mb;
    if (pw < 40 || ph < 40) throw Error("line_plot: canvas too small");

    const auto tx = [&](double v) { return opt.log_x ? std::log10(v) : v; };
    const auto ty = [&](double v) { return opt.log_y ? std::log10(v) : v; };
    const auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!opt.log_x || x > 0) &&
               (!opt.log_y || y > 0);
    };

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            xmin = std::min(xmin, tx(s.x[i]));
            xmax = std::max(xmax, tx(s.x[i]));
            ymin = std::min(ymin, ty(s.y[i]));
            ymax = std::max(ymax, ty(s.y[i]));
        }
    if (!(xmin <= xmax)) throw Error("line_plot: no plottable points");
    if (xmin == xmax) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (ymin == ymax) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    Canvas cv(opt.width, opt.height);
    const Color black{0, 0, 0}, grid{220, 220, 220}, gray{90, 90, 90};
    const auto px = [&](double v) {
        return ml + static_cast<int>(std::lround((tx(v) - xmin) / (xmax - xmin) * (pw - 1)));
    };
    const auto py = [&](double v) {
        return mt + ph - 1 -
               static_cast<int>(std::lround((ty(v) - ymin) / (ymax - ymin) * (ph - 1)));
    };

    // gridlines + tick labels
    if (opt.log_x) {
        for (int e = static_cast<int>(std::ceil(xmin)); e <= static_cast<int>(std::floor(xmax));
             ++e) {
            const double v = std::pow(10.0, e);
            const int x = px(v);
            cv.line(x, mt, x, mt + ph - 1, grid);
            const std::string lbl = fmt_tick(v);
            cv.text(x - 3 * static_cast<int>(lbl.size()), mt + ph + 6, lbl, gray);
        }
    } else {
        const double step = nice_step(xmax - xmin);
        for (double v = std::ceil(xmin / step) * step; v <= xmax + 1e-9 * step; v += step) {
            const int x = ml + static_cast<int>(std::lround((v - xmin) / (xmax - xmin) * (pw - 1)));
            cv.line(x, mt, x, mt + ph - 1, grid);
            const std::string lbl = fmt_tick(std::abs(v) < 1e-12 * step ? 0.0 : v);
            cv.text(x - 3 * static_cast<int>(lbl.size()), mt + ph + 6, lbl, gray);
        }
    }
    if (opt.log_y) {
        for (int e = static_cast<int>(std::ceil(ymin)); e <= static_cast<int>(std::floor(ymax));
             ++e) {
            const double v = std::pow(10.0, e);
            const int y = py(v);
            cv.line(ml, y, ml + pw - 1, y, grid);
            cv.text(ml - 6 - 6 * static_cast<int>(fmt_tick(v).size()), y - 3, fmt_tick(v), gray);
        }
    } else {
        const double step = nice_step(ymax - ymin);
        for (double v = std::ceil(ymin / step) * step; v <= ymax + 1e-9 * step; v += step) {
            const int y =
                mt + ph - 1 - static_cast<int>(std::lround((v - ymin) / (ymax - ymin) * (ph - 1)));
            cv.line(ml, y, ml + pw - 1, y, grid);
            const std::string lbl = fmt_tick(std::abs(v) < 1e-12 * step ? 0.0 : v);
            cv.text(ml - 6 - 6 * static_cast<int>(lbl.size()), y - 3, lbl, gray);
        }
    }

    // frame
    cv.line(ml, mt, ml + pw - 1, mt, black);
    cv.line(ml, mt + ph - 1, ml + pw - 1, mt + ph - 1, black);
    cv.line(ml, mt, ml, mt + ph - 1, black);
    cv.line(ml + pw - 1, mt, ml + pw - 1, mt + ph - 1, black);

    // series
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const Color c = kPalette[si % (sizeof kPalette / sizeof kPalette[0])];
        bool have_prev = false;
        int px0 = 0, py0 = 0;
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], s.y[i])) {
                have_prev = false;
                continue;
            }
            const int x = px(s.x[i]), y = py(s.y[i]);
            if (have_prev) cv.thick_line(px0, py0, x, y, c);
            px0 = x;
            py0 = y;
            have_prev = true;
        }
    }

    // legend
    int ly = mt + 8;
    for (size_t si = 0; si < series.size(); ++si) {
        if (series[si].label.empty()) continue;
        const Color c = kPalette[si % (sizeof kPalette / sizeof kPalette[0])];
        const int lx = ml + pw - 24 - 6 * static_cast<int>(series[si].label.size()) - 22;
        cv.thick_line(lx, ly + 3, lx + 16, ly + 3, c);
        cv.text(lx + 22, ly, series[si].label, black);
        ly += 12;
    }

    if (!opt.title.empty())
        cv.text(ml + (pw - 6 * static_cast<int>(opt.title.size())) / 2, 8, opt.title, black);
    if (!opt.x_label.empty())
        cv.text(ml + (pw - 6 * static_cast<int>(opt.x_label.size())) / 2, opt.height - 14,
                opt.x_label, gray);
    if (!opt.y_label.empty()) cv.text(4, mt - 2, opt.y_label, gray);

    cv.save(path);
}

}  // namespace edip
