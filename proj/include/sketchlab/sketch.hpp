#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sketchlab {

// One stroke-3 coordinate: offsets from the previous point plus a pen-lift
// flag. pen = 1 means the pen lifts after this point, ending the stroke.
struct StrokePoint {
    double dx = 0.0;
    double dy = 0.0;
    int pen = 0;
};

// A vectorized sketch: an ordered run of stroke-3 points. The first point's
// offsets are taken from the origin. A "data-segment" is one point; a stroke
// is a maximal run ending at a pen = 1 point.
struct VectorSketch {
    std::vector<StrokePoint> points;
    std::optional<int> label;

    bool empty() const { return points.empty(); }
    int size() const { return static_cast<int>(points.size()); }
};

struct AbsolutePoint {
    double x = 0.0;
    double y = 0.0;
    int stroke = 0;
};

struct BoundingBox {
    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
};

// Half-open point range [begin, end) forming one stroke-segment; stroke is
// the 0-based index of the stroke the segment belongs to.
struct SegmentRange {
    int begin = 0;
    int end = 0;
    int stroke = 0;
    int size() const { return end - begin; }
};

// Per-stroke greedy grouping of data-segments into stroke-segments of up to
// kSegmentPoints points; the MDP time axis has one step per entry.
struct SegmentTable {
    std::vector<SegmentRange> ranges;
    int stroke_count = 0;
    int segment_count() const { return static_cast<int>(ranges.size()); }
};

inline constexpr int kSegmentPoints = 5;

inline bool is_well_formed(const VectorSketch& s) {
    for (const auto& p : s.points) {
        if (!std::isfinite(p.dx) || !std::isfinite(p.dy)) return false;
        if (p.pen != 0 && p.pen != 1) return false;
    }
    if (!s.points.empty() && s.points.back().pen != 1) return false;
    return true;
}

inline void validate_sketch(const VectorSketch& s) {
    if (!is_well_formed(s)) throw std::invalid_argument("malformed sketch: offsets must be finite, pen in {0,1}, last point pen = 1");
}

inline std::vector<AbsolutePoint> to_absolute(const VectorSketch& s) {
    std::vector<AbsolutePoint> out;
    out.reserve(s.points.size());
    double x = 0.0, y = 0.0;
    int stroke = 0;
    for (const auto& p : s.points) {
        x += p.dx;
        y += p.dy;
        out.push_back({x, y, stroke});
        if (p.pen == 1) ++stroke;
    }
    return out;
}

inline int stroke_count(const VectorSketch& s) {
    int n = 0;
    for (const auto& p : s.points) n += (p.pen == 1);
    return n;
}

inline BoundingBox bounding_box(const std::vector<AbsolutePoint>& pts) {
    if (pts.empty()) return {};
    BoundingBox b{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
    for (const auto& p : pts) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
    }
    return b;
}

inline SegmentTable build_segment_table(const VectorSketch& s) {
    SegmentTable table;
    int stroke = 0;
    int start = 0;
    const int n = s.size();
    for (int i = 0; i < n; ++i) {
        bool stroke_end = s.points[i].pen == 1 || i == n - 1;
        if (i - start + 1 == kSegmentPoints || stroke_end) {
            table.ranges.push_back({start, i + 1, stroke});
            start = i + 1;
        }
        if (stroke_end) ++stroke;
    }
    table.stroke_count = stroke;
    return table;
}

// Deletes one stroke-segment. The first retained point after the gap absorbs
// the deleted offsets, so the absolute position of every retained point is
// unchanged. If the gap leaves same-stroke points on its left, that point
// becomes a stroke end (the remainder, if any, starts a new stroke).
inline VectorSketch remove_segment(const VectorSketch& s, const SegmentTable& table, int seg_id) {
    if (seg_id < 0 || seg_id >= table.segment_count()) throw std::out_of_range("remove_segment: seg_id " + std::to_string(seg_id) + " out of range [0, " + std::to_string(table.segment_count()) + ")");
    const SegmentRange r = table.ranges[static_cast<std::size_t>(seg_id)];
    double gap_dx = 0.0, gap_dy = 0.0;
    for (int i = r.begin; i < r.end; ++i) {
        gap_dx += s.points[static_cast<std::size_t>(i)].dx;
        gap_dy += s.points[static_cast<std::size_t>(i)].dy;
    }
    VectorSketch out;
    out.label = s.label;
    out.points.reserve(s.points.size() - static_cast<std::size_t>(r.size()));
    for (int i = 0; i < r.begin; ++i) out.points.push_back(s.points[static_cast<std::size_t>(i)]);
    // The segment never starts a stroke mid-air: begin > 0 implies the point
    // before it exists, and it shares the stroke iff its pen flag is 0.
    if (r.begin > 0 && out.points.back().pen == 0) out.points.back().pen = 1;
    for (int i = r.end; i < s.size(); ++i) out.points.push_back(s.points[static_cast<std::size_t>(i)]);
    if (r.end < s.size()) {
        auto& first_after = out.points[static_cast<std::size_t>(r.begin)];
        first_after.dx += gap_dx;
        first_after.dy += gap_dy;
    }
    return out;
}

// Divides all offsets by the standard deviation of the pooled dx and dy
// values. Zero-variance sketches come back unchanged.
inline VectorSketch normalize(const VectorSketch& s) {
    if (s.empty()) throw std::invalid_argument("normalize: empty sketch");
    double sum = 0.0, sum_sq = 0.0;
    const double n = 2.0 * static_cast<double>(s.size());
    for (const auto& p : s.points) {
        sum += p.dx + p.dy;
        sum_sq += p.dx * p.dx + p.dy * p.dy;
    }
    double mean = sum / n;
    double var = sum_sq / n - mean * mean;
    if (var <= 0.0) return s;
    double inv = 1.0 / std::sqrt(var);
    VectorSketch out = s;
    for (auto& p : out.points) {
        p.dx *= inv;
        p.dy *= inv;
    }
    return out;
}

// Offset standard deviation as used by normalize (pooled dx and dy values).
inline double offset_std(const VectorSketch& s) {
    if (s.empty()) return 0.0;
    double sum = 0.0, sum_sq = 0.0;
    const double n = 2.0 * static_cast<double>(s.size());
    for (const auto& p : s.points) {
        sum += p.dx + p.dy;
        sum_sq += p.dx * p.dx + p.dy * p.dy;
    }
    double mean = sum / n;
    double var = sum_sq / n - mean * mean;
    return var > 0.0 ? std::sqrt(var) : 0.0;
}

// Rebuilds a sketch from per-stroke absolute polylines.
inline VectorSketch from_absolute(const std::vector<std::vector<std::pair<double, double>>>& strokes, std::optional<int> label = std::nullopt) {
    VectorSketch out;
    out.label = label;
    double px = 0.0, py = 0.0;
    for (const auto& stroke : strokes) {
        if (stroke.empty()) continue;
        for (std::size_t i = 0; i < stroke.size(); ++i) {
            StrokePoint p;
            p.dx = stroke[i].first - px;
            p.dy = stroke[i].second - py;
            p.pen = (i + 1 == stroke.size()) ? 1 : 0;
            px = stroke[i].first;
            py = stroke[i].second;
            out.points.push_back(p);
        }
    }
    return out;
}

// Splits a sketch into per-stroke absolute polylines (inverse of from_absolute).
inline std::vector<std::vector<std::pair<double, double>>> stroke_polylines(const VectorSketch& s) {
    std::vector<std::vector<std::pair<double, double>>> out;
    auto abs_pts = to_absolute(s);
    for (const auto& p : abs_pts) {
        if (out.size() <= static_cast<std::size_t>(p.stroke)) out.resize(static_cast<std::size_t>(p.stroke) + 1);
        out[static_cast<std::size_t>(p.stroke)].push_back({p.x, p.y});
    }
    return out;
}

}  // namespace sketchlab
