#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sketchlab/sketch.hpp"

namespace sketchlab {

struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;  // row-major grayscale

    RasterImage() = default;
    RasterImage(int w, int h, std::uint8_t fill = 0) : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        if (w < 1 || h < 1) throw std::invalid_argument("raster: non-positive dimensions");
    }

    std::uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    bool inside(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

namespace detail {

// Reads the next header token, skipping whitespace and '#' comments.
inline std::string pgm_token(std::istream& is) {
    std::string tok;
    int c;
    while ((c = is.get()) != EOF) {
        if (c == '#') {
            while ((c = is.get()) != EOF && c != '\n') {
            }
        } else if (!std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            while ((c = is.peek()) != EOF && !std::isspace(c) && c != '#') tok.push_back(static_cast<char>(is.get()));
            return tok;
        }
    }
    throw std::runtime_error("pgm: unexpected end of header");
}

inline int pgm_int(std::istream& is) {
    std::string tok = pgm_token(is);
    try {
        std::size_t used = 0;
        int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("pgm: expected integer, got \"" + tok + "\"");
    }
}

}  // namespace detail

inline RasterImage load_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("pgm: cannot open " + path);
    std::string magic = detail::pgm_token(is);
    if (magic != "P2" && magic != "P5") throw std::runtime_error("pgm: unsupported magic \"" + magic + "\" in " + path);
    int w = detail::pgm_int(is);
    int h = detail::pgm_int(is);
    int maxval = detail::pgm_int(is);
    if (w < 1 || h < 1) throw std::runtime_error("pgm: bad dimensions in " + path);
    if (maxval < 1 || maxval > 255) throw std::runtime_error("pgm: unsupported maxval " + std::to_string(maxval) + " in " + path);
    RasterImage img(w, h);
    if (magic == "P2") {
        for (auto& v : img.values) {
            int x = detail::pgm_int(is);
            if (x < 0 || x > maxval) throw std::runtime_error("pgm: sample out of range in " + path);
            v = static_cast<std::uint8_t>(x);
        }
    } else {
        int c = is.get();  // single whitespace byte after maxval
        if (c == EOF) throw std::runtime_error("pgm: truncated " + path);
        is.read(reinterpret_cast<char*>(img.values.data()), static_cast<std::streamsize>(img.values.size()));
        if (static_cast<std::size_t>(is.gcount()) != img.values.size()) throw std::runtime_error("pgm: truncated pixel data in " + path);
    }
    return img;
}

inline void save_pgm(const std::string& path, const RasterImage& img, bool binary = true) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("pgm: cannot write " + path);
    os << (binary ? "P5" : "P2") << "\n" << img.width << " " << img.height << "\n255\n";
    if (binary) {
        os.write(reinterpret_cast<const char*>(img.values.data()), static_cast<std::streamsize>(img.values.size()));
    } else {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) os << static_cast<int>(img.at(x, y)) << (x + 1 == img.width ? "" : " ");
            os << "\n";
        }
    }
    if (!os) throw std::runtime_error("pgm: write failed: " + path);
}

inline RasterImage binarize(const RasterImage& img, int threshold = 128) {
    RasterImage out = img;
    for (auto& v : out.values) v = v >= threshold ? 255 : 0;
    return out;
}

// Renders stroke polylines into a w x h binary raster (strokes white on
// black) with 1-px Bresenham lines; geometry is fit to the raster with a 1-px
// margin, preserving aspect ratio.
inline RasterImage render_raster(const VectorSketch& sketch, int w, int h) {
    if (sketch.empty()) throw std::invalid_argument("render_raster: empty sketch");
    if (w < 4 || h < 4) throw std::invalid_argument("render_raster: raster too small");
    RasterImage img(w, h);
    auto pts = to_absolute(sketch);
    BoundingBox bb = bounding_box(pts);
    double span = std::max(bb.max_x - bb.min_x, bb.max_y - bb.min_y);
    if (span <= 0.0) span = 1.0;
    const double scale = (std::min(w, h) - 3) / span;
    auto to_px = [&](const AbsolutePoint& p) {
        int x = static_cast<int>(std::lround((p.x - bb.min_x) * scale)) + 1;
        // y grows downward in rasters
        int y = h - 2 - static_cast<int>(std::lround((p.y - bb.min_y) * scale));
        return std::pair<int, int>{std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)};
    };
    auto draw_line = [&](std::pair<int, int> a, std::pair<int, int> b) {
        int x0 = a.first, y0 = a.second, x1 = b.first, y1 = b.second;
        int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
        int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        while (true) {
            img.at(x0, y0) = 255;
            if (x0 == x1 && y0 == y1) break;
            int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    };
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto p = to_px(pts[i]);
        if (i > 0 && pts[i].stroke == pts[i - 1].stroke) {
            draw_line(to_px(pts[i - 1]), p);
        } else {
            img.at(p.first, p.second) = 255;
        }
    }
    return img;
}

// Nearest-neighbor resize.
inline RasterImage resize_nn(const RasterImage& img, int w, int h) {
    RasterImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int sx = std::min(img.width - 1, static_cast<int>(static_cast<long long>(x) * img.width / w));
            int sy = std::min(img.height - 1, static_cast<int>(static_cast<long long>(y) * img.height / h));
            out.at(x, y) = img.at(sx, sy);
        }
    return out;
}

}  // namespace sketchlab
