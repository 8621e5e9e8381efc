#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "sketchlab/corpus.hpp"  // Polyline helpers
#include "sketchlab/sketch.hpp"

namespace sketchlab {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

// Global ranges are sampled once per sketch, stroke-level ones once per
// stroke. Translation-like quantities are fractions of the larger bounding
// box side, so defaults transfer across coordinate scales.
struct DistortionParams {
    Range rotation{-5.0 * std::numbers::pi / 180.0, 5.0 * std::numbers::pi / 180.0};
    Range translation{-0.02, 0.02};
    Range scale{0.95, 1.05};
    Range skew_x{-0.05, 0.05};
    Range skew_y{-0.05, 0.05};
    Range stroke_translation{-0.01, 0.01};
    double curvature_jitter_amp = 0.01;        // max amplitude, fraction of bbox side
    double curvature_jitter_wavelength = 0.2;  // fraction of bbox side
};

inline void validate_distortion(const DistortionParams& p) {
    for (const Range* r : {&p.rotation, &p.translation, &p.scale, &p.skew_x, &p.skew_y, &p.stroke_translation})
        if (!(r->lo <= r->hi) || !std::isfinite(r->lo) || !std::isfinite(r->hi)) throw std::invalid_argument("distort: bad range");
    if (p.curvature_jitter_amp < 0.0 || p.curvature_jitter_wavelength <= 0.0) throw std::invalid_argument("distort: bad jitter parameters");
}

// Global affine (rotate, then skew, then scale, then translate, about the
// bbox center), then per-stroke translation plus sinusoidal displacement
// along the local normal. Draw order is fixed: theta, skew_x, skew_y, scale,
// tx, ty, then per stroke dtx, dty, amplitude, phase.
inline VectorSketch distort(const VectorSketch& sketch, const DistortionParams& params, std::mt19937_64& rng) {
    validate_distortion(params);
    if (sketch.empty()) return sketch;
    auto draw = [&](const Range& r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };

    auto pts = to_absolute(sketch);
    BoundingBox bb = bounding_box(pts);
    double size = std::max(bb.max_x - bb.min_x, bb.max_y - bb.min_y);
    if (size <= 0.0) size = 1.0;
    const double cx = 0.5 * (bb.min_x + bb.max_x), cy = 0.5 * (bb.min_y + bb.max_y);

    const double theta = draw(params.rotation);
    const double kx = draw(params.skew_x);
    const double ky = draw(params.skew_y);
    const double sc = draw(params.scale);
    const double tx = draw(params.translation) * size;
    const double ty = draw(params.translation) * size;
    const double cth = std::cos(theta), sth = std::sin(theta);

    std::vector<Polyline> strokes = stroke_polylines(sketch);
    for (auto& stroke : strokes) {
        for (auto& [x, y] : stroke) {
            double vx = x - cx, vy = y - cy;
            double rx = cth * vx - sth * vy, ry = sth * vx + cth * vy;
            double sx = rx + kx * ry, sy = ky * rx + ry;
            x = sc * sx + cx + tx;
            y = sc * sy + cy + ty;
        }
        const double dtx = draw(params.stroke_translation) * size;
        const double dty = draw(params.stroke_translation) * size;
        const double amp = std::uniform_real_distribution<double>(0.0, params.curvature_jitter_amp)(rng) * size;
        const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
        const double wavelength = params.curvature_jitter_wavelength * size;

        std::vector<double> arc(stroke.size(), 0.0);
        for (std::size_t i = 1; i < stroke.size(); ++i)
            arc[i] = arc[i - 1] + std::hypot(stroke[i].first - stroke[i - 1].first, stroke[i].second - stroke[i - 1].second);
        Polyline displaced = stroke;
        for (std::size_t i = 0; i < stroke.size(); ++i) {
            double txv, tyv;  // local tangent, one-sided at endpoints
            std::size_t a = i > 0 ? i - 1 : i;
            std::size_t b = i + 1 < stroke.size() ? i + 1 : i;
            txv = stroke[b].first - stroke[a].first;
            tyv = stroke[b].second - stroke[a].second;
            double len = std::hypot(txv, tyv);
            double disp = amp * std::sin(2.0 * std::numbers::pi * arc[i] / wavelength + phase);
            if (len > 0.0 && amp > 0.0) {
                displaced[i].first += disp * (-tyv / len);
                displaced[i].second += disp * (txv / len);
            }
            displaced[i].first += dtx;
            displaced[i].second += dty;
        }
        stroke = std::move(displaced);
    }
    VectorSketch out = from_absolute(strokes, sketch.label);
    return out;
}

// Re-marks each stroke at equal arc-length intervals, always keeping the
// first and last points; a stroke shorter than the step collapses to its two
// endpoints. Single-point strokes pass through unchanged.
inline VectorSketch resample(const VectorSketch& sketch, double step_length) {
    if (step_length <= 0.0) throw std::invalid_argument("resample: step_length must be positive");
    if (sketch.empty()) return sketch;
    std::vector<Polyline> out;
    for (const auto& stroke : stroke_polylines(sketch)) {
        if (stroke.size() < 2) {
            out.push_back(stroke);
            continue;
        }
        std::vector<double> arc(stroke.size(), 0.0);
        for (std::size_t i = 1; i < stroke.size(); ++i)
            arc[i] = arc[i - 1] + std::hypot(stroke[i].first - stroke[i - 1].first, stroke[i].second - stroke[i - 1].second);
        const double total = arc.back();
        Polyline res;
        res.push_back(stroke.front());
        std::size_t seg = 0;
        for (double target = step_length; target < total; target += step_length) {
            while (seg + 2 < stroke.size() && arc[seg + 1] < target) ++seg;
            double span = arc[seg + 1] - arc[seg];
            double u = span > 0.0 ? (target - arc[seg]) / span : 0.0;
            res.emplace_back(stroke[seg].first + u * (stroke[seg + 1].first - stroke[seg].first),
                             stroke[seg].second + u * (stroke[seg + 1].second - stroke[seg].second));
        }
        res.push_back(stroke.back());
        // Collapse consecutive duplicates (can appear when total is an exact
        // multiple of the step).
        Polyline dedup;
        for (const auto& p : res)
            if (dedup.empty() || p != dedup.back()) dedup.push_back(p);
        out.push_back(std::move(dedup));
    }
    VectorSketch s = from_absolute(out, sketch.label);
    return s;
}

}  // namespace sketchlab
