#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace sketchlab::cli {

/// Minimal polyline line chart: axes, ticks, legend, optional log scales.
/// Deliberately dependency-free; figures are derived artifacts, the CSV next
/// to them is the primary output.
class SvgChart {
public:
    SvgChart(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)),
          y_label_(std::move(y_label)) {}

    void set_log_x(bool on) { log_x_ = on; }
    void set_log_y(bool on) { log_y_ = on; }

    void add_series(std::string name, std::vector<double> xs, std::vector<double> ys) {
        series_.push_back({std::move(name), std::move(xs), std::move(ys)});
    }

    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("SvgChart: cannot open " + path);
        out << render();
    }

    std::string render() const {
        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
        double ymin = xmin, ymax = -xmin;
        for (const auto& s : series_) {
            for (std::size_t i = 0; i < s.xs.size(); ++i) {
                const double x = tx(s.xs[i]), y = ty(s.ys[i]);
                if (!std::isfinite(x) || !std::isfinite(y)) continue;
                xmin = std::min(xmin, x); xmax = std::max(xmax, x);
                ymin = std::min(ymin, y); ymax = std::max(ymax, y);
            }
        }
        if (!(xmin < xmax)) { xmin -= 1.0; xmax = xmin + 2.0; }
        if (!(ymin < ymax)) { ymin -= 1.0; ymax = ymin + 2.0; }

        std::ostringstream svg;
        svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW
            << "' height='" << kH << "' viewBox='0 0 " << kW << " " << kH << "'>\n";
        svg << "<rect width='100%' height='100%' fill='white'/>\n";
        svg << "<text x='" << kW / 2 << "' y='20' text-anchor='middle' "
            << "font-family='sans-serif' font-size='14'>" << title_ << "</text>\n";
        svg << "<rect x='" << kMargin << "' y='" << kTop << "' width='" << plot_w()
            << "' height='" << plot_h()
            << "' fill='none' stroke='black' stroke-width='1'/>\n";

        for (int i = 0; i <= kTicks; ++i) {
            const double fx = xmin + (xmax - xmin) * i / kTicks;
            const double px = map_x(fx, xmin, xmax);
            svg << "<line x1='" << px << "' y1='" << kTop + plot_h() << "' x2='" << px
                << "' y2='" << kTop + plot_h() + 4 << "' stroke='black'/>\n";
            svg << "<text x='" << px << "' y='" << kTop + plot_h() + 18
                << "' text-anchor='middle' font-family='sans-serif' font-size='10'>"
                << tick_label(fx, log_x_) << "</text>\n";
            const double fy = ymin + (ymax - ymin) * i / kTicks;
            const double py = map_y(fy, ymin, ymax);
            svg << "<line x1='" << kMargin - 4 << "' y1='" << py << "' x2='" << kMargin
                << "' y2='" << py << "' stroke='black'/>\n";
            svg << "<text x='" << kMargin - 8 << "' y='" << py + 3
                << "' text-anchor='end' font-family='sans-serif' font-size='10'>"
                << tick_label(fy, log_y_) << "</text>\n";
        }
        svg << "<text x='" << kMargin + plot_w() / 2 << "' y='" << kH - 8
            << "' text-anchor='middle' font-family='sans-serif' font-size='12'>"
            << x_label_ << "</text>\n";
        svg << "<text x='14' y='" << kTop + plot_h() / 2
            << "' text-anchor='middle' font-family='sans-serif' font-size='12' "
            << "transform='rotate(-90 14 " << kTop + plot_h() / 2 << ")'>" << y_label_
            << "</text>\n";

        for (std::size_t s = 0; s < series_.size(); ++s) {
            const auto& ser = series_[s];
            svg << "<polyline fill='none' stroke='" << color(s)
                << "' stroke-width='1.5' points='";
            for (std::size_t i = 0; i < ser.xs.size(); ++i) {
                const double x = tx(ser.xs[i]), y = ty(ser.ys[i]);
                if (!std::isfinite(x) || !std::isfinite(y)) continue;
                svg << map_x(x, xmin, xmax) << ',' << map_y(y, ymin, ymax) << ' ';
            }
            svg << "'/>\n";
            const double ly = kTop + 14 + 16 * static_cast<double>(s);
            svg << "<line x1='" << kMargin + plot_w() - 130 << "' y1='" << ly
                << "' x2='" << kMargin + plot_w() - 110 << "' y2='" << ly
                << "' stroke='" << color(s) << "' stroke-width='2'/>\n";
            svg << "<text x='" << kMargin + plot_w() - 105 << "' y='" << ly + 4
                << "' font-family='sans-serif' font-size='11'>" << ser.name
                << "</text>\n";
        }
        svg << "</svg>\n";
        return svg.str();
    }

private:
    struct Series {
        std::string name;
        std::vector<double> xs, ys;
    };

    static constexpr double kW = 640, kH = 420, kMargin = 60, kTop = 36;
    static constexpr int kTicks = 5;

    static double plot_w() { return kW - kMargin - 20; }
    static double plot_h() { return kH - kTop - 50; }

    double tx(double x) const { return log_x_ ? std::log10(x) : x; }
    double ty(double y) const { return log_y_ ? std::log10(y) : y; }

    static double map_x(double v, double lo, double hi) {
        return kMargin + (v - lo) / (hi - lo) * plot_w();
    }
    static double map_y(double v, double lo, double hi) {
        return kTop + plot_h() - (v - lo) / (hi - lo) * plot_h();
    }

    static std::string tick_label(double v, bool log_scale) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", log_scale ? std::pow(10.0, v) : v);
        return buf;
    }

    static std::string color(std::size_t i) {
        static const char* palette[] = {"#1b6ca8", "#d1495b", "#2e933c",
                                        "#8338ec", "#f18f01", "#444444"};
        return palette[i % 6];
    }

    std::string title_, x_label_, y_label_;
    bool log_x_ = false, log_y_ = false;
    std::vector<Series> series_;
};

}  // namespace sketchlab::cli
