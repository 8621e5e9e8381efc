#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "sketchlab/common.hpp"
#include "sketchlab/ndjson.hpp"
#include "sketchlab/sketch.hpp"

namespace sketchlab {

struct Corpus {
    std::vector<VectorSketch> sketches;  // each carries its label
    std::vector<std::string> class_names;
    std::vector<bool> is_test;
    std::vector<int> core_strokes;  // strokes before decorations; -1 when unknown

    int class_count() const { return static_cast<int>(class_names.size()); }

    std::vector<int> split_indices(bool test) const {
        std::vector<int> ids;
        for (std::size_t i = 0; i < sketches.size(); ++i)
            if (is_test[i] == test) ids.push_back(static_cast<int>(i));
        return ids;
    }
    std::vector<int> train_indices() const { return split_indices(false); }
    std::vector<int> test_indices() const { return split_indices(true); }
};

inline void validate_corpus(const Corpus& c) {
    const int K = c.class_count();
    if (K < 2) throw std::runtime_error("corpus: need at least 2 classes, have " + std::to_string(K));
    if (c.sketches.size() != c.is_test.size() || c.sketches.size() != c.core_strokes.size()) throw std::runtime_error("corpus: parallel arrays disagree");
    std::vector<int> train_n(static_cast<std::size_t>(K), 0), test_n(static_cast<std::size_t>(K), 0);
    for (std::size_t i = 0; i < c.sketches.size(); ++i) {
        const auto& s = c.sketches[i];
        if (!s.label || *s.label < 0 || *s.label >= K) throw std::runtime_error("corpus: sketch " + std::to_string(i) + " has label outside [0, K)");
        (c.is_test[i] ? test_n : train_n)[static_cast<std::size_t>(*s.label)]++;
    }
    for (int k = 0; k < K; ++k) {
        if (train_n[static_cast<std::size_t>(k)] == 0 || test_n[static_cast<std::size_t>(k)] == 0)
            throw std::runtime_error("corpus: class " + c.class_names[static_cast<std::size_t>(k)] + " is empty in one split");
    }
}

namespace detail {

// Splits a class's shuffled sketch list: first n_test become test items.
inline int stratified_test_count(int n, double test_fraction) {
    auto n_test = static_cast<int>(std::llround(n * test_fraction));
    return std::clamp(n_test, 1, n - 1);
}

}  // namespace detail

// Reads NDJSON sketch files, groups by class, caps, splits, and normalizes.
// Class identity comes from "word" fields when present (names sorted
// alphabetically), otherwise from integer "label" fields.
inline Corpus load_corpus(const std::vector<std::string>& paths, int per_class_cap, double test_fraction, std::uint64_t seed) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0) throw std::invalid_argument("load_corpus: test_fraction must be in (0, 1)");
    std::vector<SketchRecord> records;
    for (const auto& path : paths) {
        NdjsonReadResult r = read_ndjson(path);
        if (!r.errors.empty())
            throw std::runtime_error("load_corpus: " + path + " line " + std::to_string(r.errors.front().line) + ": " + r.errors.front().message);
        for (auto& rec : r.records) records.push_back(std::move(rec));
    }
    if (records.empty()) throw std::runtime_error("load_corpus: no sketches found");

    Corpus out;
    bool words = std::all_of(records.begin(), records.end(), [](const SketchRecord& r) { return r.word.has_value(); });
    if (words) {
        std::map<std::string, int> name_to_id;
        for (const auto& r : records) name_to_id.emplace(*r.word, 0);
        for (auto& [name, id] : name_to_id) {
            id = static_cast<int>(out.class_names.size());
            out.class_names.push_back(name);
        }
        for (auto& r : records) r.sketch.label = name_to_id.at(*r.word);
    } else {
        int max_label = -1;
        for (const auto& r : records) {
            if (!r.sketch.label || *r.sketch.label < 0) throw std::runtime_error("load_corpus: record lacks a usable \"word\" or \"label\" field");
            max_label = std::max(max_label, *r.sketch.label);
        }
        for (int k = 0; k <= max_label; ++k) out.class_names.push_back("class" + std::to_string(k));
    }

    const int K = out.class_count();
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(K));
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].sketch.empty()) throw std::runtime_error("load_corpus: empty sketch at record " + std::to_string(i));
        by_class[static_cast<std::size_t>(*records[i].sketch.label)].push_back(static_cast<int>(i));
    }
    for (int k = 0; k < K; ++k) {
        auto& ids = by_class[static_cast<std::size_t>(k)];
        if (static_cast<int>(ids.size()) < 2) throw std::runtime_error("load_corpus: class " + out.class_names[static_cast<std::size_t>(k)] + " has fewer than 2 sketches");
        auto rng = make_rng(seed, static_cast<std::uint64_t>(k));
        std::shuffle(ids.begin(), ids.end(), rng);
        if (per_class_cap > 0 && static_cast<int>(ids.size()) > per_class_cap) ids.resize(static_cast<std::size_t>(per_class_cap));
        if (static_cast<int>(ids.size()) < 2) throw std::runtime_error("load_corpus: per_class_cap leaves class " + out.class_names[static_cast<std::size_t>(k)] + " with fewer than 2 sketches");
        const int n_test = detail::stratified_test_count(static_cast<int>(ids.size()), test_fraction);
        for (std::size_t j = 0; j < ids.size(); ++j) {
            const auto& rec = records[static_cast<std::size_t>(ids[j])];
            out.sketches.push_back(normalize(rec.sketch));
            out.is_test.push_back(static_cast<int>(j) < n_test);
            out.core_strokes.push_back(rec.core_strokes.value_or(-1));
        }
    }
    validate_corpus(out);
    return out;
}

// ---------------------------------------------------------------------------
// Toy generator
// ---------------------------------------------------------------------------

struct IntRange {
    int lo = 0;
    int hi = 0;
    bool valid() const { return lo <= hi; }
};

struct ToyGenSpec {
    std::vector<std::string> classes{"square", "circle", "zigzag"};
    IntRange points_per_stroke{18, 24};
    IntRange decoration_count{2, 5};
    IntRange decoration_points{5, 8};
    double jitter_std = 0.01;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
};

using Polyline = std::vector<std::pair<double, double>>;

namespace detail {

inline Polyline resample_polyline_count(const Polyline& poly, int n) {
    if (poly.size() < 2 || n < 2) throw std::invalid_argument("resample_polyline_count: degenerate input");
    std::vector<double> cum(poly.size(), 0.0);
    for (std::size_t i = 1; i < poly.size(); ++i) {
        double dx = poly[i].first - poly[i - 1].first;
        double dy = poly[i].second - poly[i - 1].second;
        cum[i] = cum[i - 1] + std::hypot(dx, dy);
    }
    const double total = cum.back();
    Polyline out;
    out.reserve(static_cast<std::size_t>(n));
    if (total <= 0.0) {
        out.assign(static_cast<std::size_t>(n), poly.front());
        return out;
    }
    std::size_t seg = 0;
    for (int i = 0; i < n; ++i) {
        double target = total * i / (n - 1);
        while (seg + 2 < poly.size() && cum[seg + 1] < target) ++seg;
        double span = cum[seg + 1] - cum[seg];
        double u = span > 0.0 ? (target - cum[seg]) / span : 0.0;
        out.emplace_back(poly[seg].first + u * (poly[seg + 1].first - poly[seg].first),
                         poly[seg].second + u * (poly[seg + 1].second - poly[seg].second));
    }
    return out;
}

inline std::vector<Polyline> toy_core_polylines(const std::string& cls) {
    auto ring = [](std::vector<std::pair<double, double>> pts) {
        pts.push_back(pts.front());
        return pts;
    };
    if (cls == "square") return {ring({{0.1, 0.1}, {0.9, 0.1}, {0.9, 0.9}, {0.1, 0.9}})};
    if (cls == "circle") {
        Polyline p;
        for (int i = 0; i < 12; ++i) {
            double a = 2.0 * std::numbers::pi * i / 12.0;
            p.emplace_back(0.5 + 0.4 * std::cos(a), 0.5 + 0.4 * std::sin(a));
        }
        return {ring(p)};
    }
    if (cls == "zigzag") return {{{0.05, 0.2}, {0.275, 0.8}, {0.5, 0.2}, {0.725, 0.8}, {0.95, 0.2}}};
    if (cls == "tee") return {{{0.1, 0.85}, {0.9, 0.85}}, {{0.5, 0.85}, {0.5, 0.1}}};
    if (cls == "star") {
        Polyline p;
        for (int i = 0; i < 10; ++i) {
            double a = -std::numbers::pi / 2.0 + std::numbers::pi * i / 5.0;
            double r = (i % 2 == 0) ? 0.45 : 0.18;
            p.emplace_back(0.5 + r * std::cos(a), 0.5 + r * std::sin(a));
        }
        return {ring(p)};
    }
    throw std::invalid_argument("generate_toy: unknown class \"" + cls + "\"");
}

inline int sample_range(const IntRange& r, std::mt19937_64& rng) {
    return std::uniform_int_distribution<int>(r.lo, r.hi)(rng);
}

}  // namespace detail

// Core shape strokes first, then 0..n short decoration strokes; decorations
// are drawn the same way for every class, so they carry no label signal.
inline Corpus generate_toy(const ToyGenSpec& spec, int n_per_class) {
    if (n_per_class < 2) throw std::invalid_argument("generate_toy: n_per_class must be >= 2");
    if (spec.classes.empty()) throw std::invalid_argument("generate_toy: no classes");
    if (!spec.points_per_stroke.valid() || !spec.decoration_count.valid() || !spec.decoration_points.valid())
        throw std::invalid_argument("generate_toy: empty integer range");
    if (spec.points_per_stroke.lo < 2 || spec.decoration_points.lo < 2 || spec.decoration_count.lo < 0)
        throw std::invalid_argument("generate_toy: ranges out of bounds");
    if (spec.jitter_std < 0.0) throw std::invalid_argument("generate_toy: jitter_std must be >= 0");
    if (spec.test_fraction <= 0.0 || spec.test_fraction >= 1.0) throw std::invalid_argument("generate_toy: test_fraction must be in (0, 1)");

    Corpus out;
    out.class_names = spec.classes;
    for (const auto& cls : spec.classes) detail::toy_core_polylines(cls);  // reject unknown ids up front

    for (std::size_t k = 0; k < spec.classes.size(); ++k) {
        auto rng = make_rng(spec.seed, k);
        std::normal_distribution<double> noise(0.0, std::max(spec.jitter_std, 1e-12));
        auto jitter = [&](auto& gen) { return spec.jitter_std > 0.0 ? noise(gen) : 0.0; };
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const auto cores = detail::toy_core_polylines(spec.classes[k]);
        for (int i = 0; i < n_per_class; ++i) {
            std::vector<Polyline> strokes;
            for (const auto& core : cores) {
                Polyline p = detail::resample_polyline_count(core, detail::sample_range(spec.points_per_stroke, rng));
                for (auto& [x, y] : p) {
                    x += jitter(rng);
                    y += jitter(rng);
                }
                strokes.push_back(std::move(p));
            }
            const int core_n = static_cast<int>(strokes.size());
            const int deco_n = detail::sample_range(spec.decoration_count, rng);
            for (int d = 0; d < deco_n; ++d) {
                double x0 = 0.05 + 0.9 * unit(rng);
                double y0 = 0.05 + 0.9 * unit(rng);
                double ang = 2.0 * std::numbers::pi * unit(rng);
                double len = 0.08 + 0.10 * unit(rng);
                Polyline p = detail::resample_polyline_count(
                    {{x0, y0}, {x0 + len * std::cos(ang), y0 + len * std::sin(ang)}},
                    detail::sample_range(spec.decoration_points, rng));
                for (auto& [x, y] : p) {
                    x += jitter(rng);
                    y += jitter(rng);
                }
                strokes.push_back(std::move(p));
            }
            VectorSketch s = from_absolute(strokes, static_cast<int>(k));
            validate_sketch(s);
            out.sketches.push_back(normalize(s));
            out.core_strokes.push_back(core_n);
            out.is_test.push_back(false);
        }
    }

    // Stratified split; generation order within a class is already random.
    const int n_test = detail::stratified_test_count(n_per_class, spec.test_fraction);
    for (std::size_t k = 0; k < spec.classes.size(); ++k) {
        std::vector<int> ids(static_cast<std::size_t>(n_per_class));
        std::iota(ids.begin(), ids.end(), static_cast<int>(k) * n_per_class);
        auto rng = make_rng(spec.seed, 0x5eed + k);
        std::shuffle(ids.begin(), ids.end(), rng);
        for (int j = 0; j < n_test; ++j) out.is_test[static_cast<std::size_t>(ids[static_cast<std::size_t>(j)])] = true;
    }
    validate_corpus(out);
    return out;
}

}  // namespace sketchlab
