#pragma once

#include <algorithm>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sketchlab/corpus.hpp"  // Polyline
#include "sketchlab/raster.hpp"

namespace sketchlab {

// Zhang-Suen thinning of a binary raster (255 = foreground). Repeats the two
// sub-iterations until no pixel changes.
inline RasterImage zhang_suen_thin(const RasterImage& input) {
    RasterImage img = input;
    for (auto v : img.values)
        if (v != 0 && v != 255) throw std::invalid_argument("thin: raster is not binary");
    auto p = [&](int x, int y) { return img.inside(x, y) && img.at(x, y) == 255 ? 1 : 0; };
    std::vector<std::pair<int, int>> kill;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int phase = 0; phase < 2; ++phase) {
            kill.clear();
            for (int y = 0; y < img.height; ++y) {
                for (int x = 0; x < img.width; ++x) {
                    if (!p(x, y)) continue;
                    // Neighbors P2..P9 clockwise from north.
                    int n[8] = {p(x, y - 1), p(x + 1, y - 1), p(x + 1, y), p(x + 1, y + 1),
                                p(x, y + 1), p(x - 1, y + 1), p(x - 1, y), p(x - 1, y - 1)};
                    int b = 0;
                    for (int v : n) b += v;
                    if (b < 2 || b > 6) continue;
                    int a = 0;
                    for (int i = 0; i < 8; ++i)
                        if (n[i] == 0 && n[(i + 1) % 8] == 1) ++a;
                    if (a != 1) continue;
                    if (phase == 0) {
                        if (n[0] * n[2] * n[4] != 0) continue;  // P2*P4*P6
                        if (n[2] * n[4] * n[6] != 0) continue;  // P4*P6*P8
                    } else {
                        if (n[0] * n[2] * n[6] != 0) continue;  // P2*P4*P8
                        if (n[0] * n[4] * n[6] != 0) continue;  // P2*P6*P8
                    }
                    kill.emplace_back(x, y);
                }
            }
            for (auto [x, y] : kill) img.at(x, y) = 0;
            if (!kill.empty()) changed = true;
        }
    }
    return img;
}

namespace detail {

struct SkeletonGraph {
    std::vector<std::pair<int, int>> pixels;                  // row-major order
    std::unordered_map<long long, int> index;                 // packed (x,y) -> pixel id
    std::vector<std::vector<int>> adjacency;                  // 8-connected, ascending ids

    static long long pack(int x, int y) { return static_cast<long long>(y) * (1LL << 24) + x; }
    int degree(int i) const { return static_cast<int>(adjacency[static_cast<std::size_t>(i)].size()); }
};

inline SkeletonGraph skeleton_graph(const RasterImage& img) {
    SkeletonGraph g;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (img.at(x, y) == 255) {
                g.index[SkeletonGraph::pack(x, y)] = static_cast<int>(g.pixels.size());
                g.pixels.emplace_back(x, y);
            }
    g.adjacency.resize(g.pixels.size());
    auto on = [&](int x, int y) { return g.index.count(SkeletonGraph::pack(x, y)) != 0; };
    for (std::size_t i = 0; i < g.pixels.size(); ++i) {
        auto [x, y] = g.pixels[i];
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                if (!on(x + dx, y + dy)) continue;
                // A diagonal edge bridged by an orthogonal neighbor is
                // redundant: the path through that neighbor stays connected,
                // and keeping the diagonal would weld junction clusters.
                if (dx != 0 && dy != 0 && (on(x + dx, y) || on(x, y + dy))) continue;
                g.adjacency[i].push_back(g.index.at(SkeletonGraph::pack(x + dx, y + dy)));
            }
        std::sort(g.adjacency[i].begin(), g.adjacency[i].end());
    }
    return g;
}

}  // namespace detail

// Decomposes a thinned raster's skeleton into maximal paths split at
// endpoints and junction pixels (degree >= 3); leftover pure cycles become
// one closed polyline each; isolated pixels are dropped. Coordinates are
// pixel centers (x right, y down).
inline std::vector<Polyline> trace(const RasterImage& binary) {
    RasterImage skel = zhang_suen_thin(binary);
    detail::SkeletonGraph g = detail::skeleton_graph(skel);
    const int n = static_cast<int>(g.pixels.size());

    auto edge_key = [n](int a, int b) { return static_cast<long long>(std::min(a, b)) * n + std::max(a, b); };
    std::unordered_set<long long> used;
    std::vector<Polyline> out;
    auto emit = [&](const std::vector<int>& ids) {
        Polyline p;
        for (int i : ids) p.emplace_back(static_cast<double>(g.pixels[static_cast<std::size_t>(i)].first), static_cast<double>(g.pixels[static_cast<std::size_t>(i)].second));
        out.push_back(std::move(p));
    };

    // Walk from every terminal (degree != 2) along each unused incident edge
    // through the degree-2 chain until the next terminal.
    for (int start = 0; start < n; ++start) {
        if (g.degree(start) == 2 || g.degree(start) == 0) continue;
        for (int nb : g.adjacency[static_cast<std::size_t>(start)]) {
            if (used.count(edge_key(start, nb))) continue;
            std::vector<int> path{start, nb};
            used.insert(edge_key(start, nb));
            int prev = start, cur = nb;
            while (g.degree(cur) == 2) {
                const auto& adj = g.adjacency[static_cast<std::size_t>(cur)];
                int next = adj[0] == prev ? adj[1] : adj[0];
                used.insert(edge_key(cur, next));
                path.push_back(next);
                prev = cur;
                cur = next;
            }
            emit(path);
        }
    }

    // Remaining unused edges are pure cycles of degree-2 pixels.
    for (int start = 0; start < n; ++start) {
        if (g.degree(start) != 2) continue;
        int first_nb = g.adjacency[static_cast<std::size_t>(start)][0];
        if (used.count(edge_key(start, first_nb))) continue;
        std::vector<int> path{start, first_nb};
        used.insert(edge_key(start, first_nb));
        int prev = start, cur = first_nb;
        while (cur != start) {
            const auto& adj = g.adjacency[static_cast<std::size_t>(cur)];
            int next = adj[0] == prev ? adj[1] : adj[0];
            used.insert(edge_key(cur, next));
            path.push_back(next);
            prev = cur;
            cur = next;
        }
        emit(path);
    }
    return out;
}

// Converts traced pixel polylines into a stroke-3 sketch, flipping y so the
// sketch is y-up like the rest of the pipeline.
inline VectorSketch polylines_to_sketch(const std::vector<Polyline>& lines, int raster_height) {
    if (lines.empty()) throw std::runtime_error("polylines_to_sketch: no strokes traced");
    std::vector<Polyline> flipped = lines;
    for (auto& line : flipped)
        for (auto& [x, y] : line) y = static_cast<double>(raster_height - 1) - y;
    return from_absolute(flipped);
}

}  // namespace sketchlab
