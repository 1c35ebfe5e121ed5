#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "volerr/errors.hpp"
#include "volerr/metrics.hpp"

namespace volerr {

/// One measured series on a log-log chart, optionally with its fitted law
/// drawn dashed in the same colour.
struct LogLogSeries {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<double> x;
    std::vector<double> y;
    std::optional<PowerLaw> fit;
};

namespace svg_detail {

inline std::string fmt(double v, const char* spec = "%.2f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string tick_label(double v) {
    if (v >= 1.0 && v < 1e6) return fmt(v, "%.0f");
    return fmt(v, "%g");
}

}  // namespace svg_detail

/// Standalone SVG with decade grid lines. Non-positive values are skipped.
inline std::string render_loglog_svg(const std::vector<LogLogSeries>& series, const std::string& title,
                                     const std::string& x_label, const std::string& y_label) {
    using namespace svg_detail;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw DataError("plot: series '" + s.label + "' has unequal x and y lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!(xmin <= xmax)) throw DataError("plot: no positive data to draw");

    const double lx0 = std::floor(std::log10(xmin)), lx1 = std::max(std::ceil(std::log10(xmax)), lx0 + 1.0);
    const double ly0 = std::floor(std::log10(ymin)), ly1 = std::max(std::ceil(std::log10(ymax)), ly0 + 1.0);
    const double W = 640, H = 440, left = 70, right = 150, top = 40, bottom = 55;
    const double pw = W - left - right, ph = H - top - bottom;
    auto px = [&](double x) { return left + (std::log10(x) - lx0) / (lx1 - lx0) * pw; };
    auto py = [&](double y) { return top + ph - (std::log10(y) - ly0) / (ly1 - ly0) * ph; };

    std::string o;
    o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(W, "%.0f") + "\" height=\"" + fmt(H, "%.0f") +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
         "</text>\n";

    // grid: decades solid, 2..9 faint
    for (double d = lx0; d <= lx1; d += 1.0) {
        for (int m = 1; m <= 9; ++m) {
            const double v = m * std::pow(10.0, d);
            if (std::log10(v) > lx1 + 1e-12) break;
            const double x = px(v);
            o += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(top) + "\" x2=\"" + fmt(x) + "\" y2=\"" + fmt(top + ph) +
                 "\" stroke=\"" + (m == 1 ? "#bbb" : "#eee") + "\"/>\n";
            if (m == 1) {
                o += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(top + ph + 18) + "\" text-anchor=\"middle\">" +
                     tick_label(v) + "</text>\n";
            }
        }
    }
    for (double d = ly0; d <= ly1; d += 1.0) {
        for (int m = 1; m <= 9; ++m) {
            const double v = m * std::pow(10.0, d);
            if (std::log10(v) > ly1 + 1e-12) break;
            const double y = py(v);
            o += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(left + pw) + "\" y2=\"" + fmt(y) +
                 "\" stroke=\"" + (m == 1 ? "#bbb" : "#eee") + "\"/>\n";
            if (m == 1) {
                o += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(y + 4) + "\" text-anchor=\"end\">" +
                     tick_label(v) + "</text>\n";
            }
        }
    }
    o += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    o += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(H - 12) + "\" text-anchor=\"middle\">" + escape(x_label) +
         "</text>\n";
    o += "<text transform=\"translate(18 " + fmt(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(y_label) + "</text>\n";

    double legend_y = top + 10;
    for (const auto& s : series) {
        if (s.fit) {
            std::string pts;
            const int steps = 60;
            for (int i = 0; i <= steps; ++i) {
                const double lx = std::log10(xmin) + (std::log10(xmax) - std::log10(xmin)) * i / steps;
                const double x = std::pow(10.0, lx), y = (*s.fit)(x);
                if (!(y > 0.0)) continue;
                const double yy = std::clamp(py(y), top, top + ph);
                pts += fmt(px(x)) + "," + fmt(yy) + " ";
            }
            o += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + s.color +
                 "\" stroke-dasharray=\"6 4\"/>\n";
        }
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
            o += "<circle cx=\"" + fmt(px(s.x[i])) + "\" cy=\"" + fmt(py(s.y[i])) + "\" r=\"4\" fill=\"" + s.color +
                 "\"/>\n";
        }
        std::string label = s.label;
        if (s.fit) label += " (N = " + fmt(s.fit->exponent, "%.2f") + ")";
        o += "<circle cx=\"" + fmt(left + pw + 16) + "\" cy=\"" + fmt(legend_y - 4) + "\" r=\"4\" fill=\"" + s.color +
             "\"/>\n";
        o += "<text x=\"" + fmt(left + pw + 26) + "\" y=\"" + fmt(legend_y) + "\">" + escape(label) + "</text>\n";
        legend_y += 18;
    }
    o += "</svg>\n";
    return o;
}

}  // namespace volerr
