#pragma once

#include <catch2/catch_amalgamated.hpp>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sketchlab/autodiff.hpp"
#include "sketchlab/sketch.hpp"

namespace testutil {

// Random stroke-3 sketch: unit-normal offsets, random pen lifts, last pen = 1.
inline sketchlab::VectorSketch random_sketch(std::mt19937_64& rng, int n_points, double pen_prob = 0.2) {
    sketchlab::VectorSketch s;
    std::normal_distribution<double> offset(0.0, 1.0);
    std::bernoulli_distribution lift(pen_prob);
    for (int i = 0; i < n_points; ++i) {
        sketchlab::StrokePoint p;
        p.dx = offset(rng);
        p.dy = offset(rng);
        p.pen = (i + 1 == n_points || lift(rng)) ? 1 : 0;
        s.points.push_back(p);
    }
    return s;
}

// Single-stroke sketch from absolute points along the given polyline.
inline sketchlab::VectorSketch stroke_from(const std::vector<std::pair<double, double>>& pts) {
    return sketchlab::from_absolute({pts});
}

inline bool params_equal(const sketchlab::ParamStore& a, const sketchlab::ParamStore& b) {
    if (a.count() != b.count()) return false;
    for (int id = 0; id < a.count(); ++id) {
        if (a.name(id) != b.name(id)) return false;
        const sketchlab::Tensor& x = a.value(id);
        const sketchlab::Tensor& y = b.value(id);
        if (x.shape != y.shape || x.v != y.v) return false;
    }
    return true;
}

// Central differences (step h) against the gradients already accumulated in
// ps. forward() must recompute the loss from the current parameter values.
// Error is |numeric - analytic| / max(floor, |numeric|, |analytic|).
inline double max_gradient_error(sketchlab::ParamStore& ps, const std::function<double()>& forward,
                                 double h = 1e-5, double floor = 1e-5) {
    double worst = 0.0;
    for (int id = 0; id < ps.count(); ++id) {
        sketchlab::Tensor& w = ps.value(id);
        const sketchlab::Tensor& g = ps.grad(id);
        for (int i = 0; i < w.size(); ++i) {
            const double orig = w[i];
            w[i] = orig + h;
            const double f1 = forward();
            w[i] = orig - h;
            const double f2 = forward();
            w[i] = orig;
            const double num = (f1 - f2) / (2.0 * h);
            const double err = std::abs(num - g[i]) / std::max({floor, std::abs(num), std::abs(g[i])});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

// Unique scratch directory, removed when the object dies.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        auto base = std::filesystem::temp_directory_path();
        for (int i = 0; i < 10000; ++i) {
            auto candidate = base / ("sketchlab-test-" + std::to_string(::getpid()) + "-" + std::to_string(i));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path = candidate;
                return;
            }
        }
        throw std::runtime_error("could not create temp dir");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testutil
