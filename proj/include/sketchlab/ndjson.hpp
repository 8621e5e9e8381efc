#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchlab/sketch.hpp"

namespace sketchlab {

struct NdjsonError {
    int line = 0;
    std::string message;
};

struct SketchRecord {
    VectorSketch sketch;
    std::optional<std::string> word;       // class name, QuickDraw-style records
    std::optional<int> core_strokes;       // toy generator metadata, if present
};

struct NdjsonReadResult {
    std::vector<SketchRecord> records;
    std::vector<NdjsonError> errors;
};

namespace detail {

inline VectorSketch points_from_json(const nlohmann::json& arr) {
    VectorSketch s;
    for (const auto& item : arr) {
        if (!item.is_array() || item.size() != 3) throw std::runtime_error("point is not a [dx, dy, pen] triple");
        StrokePoint p;
        p.dx = item[0].get<double>();
        p.dy = item[1].get<double>();
        p.pen = item[2].get<int>();
        s.points.push_back(p);
    }
    validate_sketch(s);
    return s;
}

// QuickDraw "drawing" arrays hold per-stroke absolute coordinates
// [[x0, x1, ...], [y0, y1, ...]]; converted here to stroke-3 offsets.
inline VectorSketch points_from_quickdraw(const nlohmann::json& drawing) {
    std::vector<std::vector<std::pair<double, double>>> strokes;
    for (const auto& stroke : drawing) {
        if (!stroke.is_array() || stroke.size() < 2) throw std::runtime_error("drawing stroke is not an [xs, ys] pair");
        const auto& xs = stroke[0];
        const auto& ys = stroke[1];
        if (xs.size() != ys.size()) throw std::runtime_error("drawing stroke has mismatched x/y lengths");
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < xs.size(); ++i) pts.push_back({xs[i].get<double>(), ys[i].get<double>()});
        if (!pts.empty()) strokes.push_back(std::move(pts));
    }
    VectorSketch s = from_absolute(strokes);
    validate_sketch(s);
    return s;
}

}  // namespace detail

inline SketchRecord parse_sketch_line(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line);
    SketchRecord rec;
    if (j.contains("points")) {
        rec.sketch = detail::points_from_json(j.at("points"));
    } else if (j.contains("drawing")) {
        rec.sketch = detail::points_from_quickdraw(j.at("drawing"));
    } else {
        throw std::runtime_error("record has neither \"points\" nor \"drawing\"");
    }
    if (j.contains("label")) rec.sketch.label = j.at("label").get<int>();
    if (j.contains("word")) rec.word = j.at("word").get<std::string>();
    if (j.contains("core_strokes")) rec.core_strokes = j.at("core_strokes").get<int>();
    return rec;
}

inline std::string sketch_to_line(const VectorSketch& s, std::optional<int> core_strokes = std::nullopt, const std::optional<std::string>& word = std::nullopt) {
    nlohmann::json j;
    if (s.label) j["label"] = *s.label;
    if (core_strokes) j["core_strokes"] = *core_strokes;
    if (word) j["word"] = *word;
    auto& pts = j["points"];
    pts = nlohmann::json::array();
    for (const auto& p : s.points) pts.push_back({p.dx, p.dy, p.pen});
    return j.dump();
}

inline NdjsonReadResult read_ndjson_stream(std::istream& in) {
    NdjsonReadResult out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.records.push_back(parse_sketch_line(line));
        } catch (const std::exception& e) {
            out.errors.push_back({line_no, e.what()});
        }
    }
    return out;
}

inline NdjsonReadResult read_ndjson(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_ndjson_stream(in);
}

inline void write_ndjson(const std::string& path, const std::vector<VectorSketch>& sketches, const std::vector<int>& core_strokes = {}, const std::vector<std::string>& words = {}) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < sketches.size(); ++i) {
        std::optional<int> cs;
        if (i < core_strokes.size()) cs = core_strokes[i];
        std::optional<std::string> word;
        if (i < words.size()) word = words[i];
        out << sketch_to_line(sketches[i], cs, word) << "\n";
    }
}

}  // namespace sketchlab
