#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "sketchlab/sketch.hpp"

namespace sketchlab {

namespace detail {
inline std::string fmt_coord(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}
}  // namespace detail

// Renders one SVG path element per stroke, absolute coordinates, viewBox
// fitted to the bounding box plus a 5% margin. When stroke_colors is given
// it must have one entry per stroke.
inline std::string render_svg(const VectorSketch& sketch, const std::vector<std::string>& stroke_colors = {}) {
    auto pts = to_absolute(sketch);
    const int n_strokes = stroke_count(sketch);
    if (!stroke_colors.empty() && static_cast<int>(stroke_colors.size()) != n_strokes) throw std::invalid_argument("render_svg: expected " + std::to_string(n_strokes) + " stroke colors, got " + std::to_string(stroke_colors.size()));

    BoundingBox bb = bounding_box(pts);
    double pad_x = std::max(bb.width() * 0.05, 1e-3);
    double pad_y = std::max(bb.height() * 0.05, 1e-3);
    double vx = bb.min_x - pad_x, vy = bb.min_y - pad_y;
    double vw = bb.width() + 2 * pad_x, vh = bb.height() + 2 * pad_y;
    double stroke_w = std::max(vw, vh) / 200.0;

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"" + detail::fmt_coord(vx) + " " + detail::fmt_coord(vy) + " " + detail::fmt_coord(vw) + " " + detail::fmt_coord(vh) + "\">\n";
    std::size_t i = 0;
    for (int stroke = 0; stroke < n_strokes; ++stroke) {
        std::string d;
        bool first = true;
        for (; i < pts.size() && pts[i].stroke == stroke; ++i) {
            d += (first ? "M " : "L ") + detail::fmt_coord(pts[i].x) + " " + detail::fmt_coord(pts[i].y) + " ";
            first = false;
        }
        const std::string color = stroke_colors.empty() ? "black" : stroke_colors[static_cast<std::size_t>(stroke)];
        out += "  <path d=\"" + d + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + detail::fmt_coord(stroke_w) + "\" stroke-linecap=\"round\"/>\n";
    }
    out += "</svg>\n";
    return out;
}

// 5-bin blue-to-red scale for saliency rendering: 0 maps to blue, 1 to red.
inline std::string saliency_color(double value) {
    static const char* bins[5] = {"#0000ff", "#4080df", "#808080", "#df8040", "#ff0000"};
    int bin = static_cast<int>(value * 5.0);
    if (bin < 0) bin = 0;
    if (bin > 4) bin = 4;
    return bins[bin];
}

}  // namespace sketchlab
