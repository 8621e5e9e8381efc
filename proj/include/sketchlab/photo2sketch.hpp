#pragma once

#include <string>
#include <vector>

#include "sketchlab/agent.hpp"
#include "sketchlab/distort.hpp"
#include "sketchlab/tracing.hpp"

namespace sketchlab {

struct PipelineOptions {
    int binarize_threshold = 128;
    double resample_step = 3.0;  // pixels
    double delta = 0.0;
};

// Stage names follow the pipeline order: traced vectors, distorted vectors,
// simplified (resampled) vectors, the normalized input to the agent, and the
// abstracted output.
struct PhotoToSketchResult {
    VectorSketch traced;      // v_p
    VectorSketch distorted;   // d_p
    VectorSketch simplified;  // s_p
    VectorSketch normalized;
    VectorSketch abstracted;  // a_p
    std::vector<int> kept_mask;
};

inline PhotoToSketchResult photo_to_sketch(const RasterImage& edges, const AgentModel& agent, const PipelineOptions& opts, const DistortionParams& params, std::mt19937_64& rng) {
    PhotoToSketchResult out;
    RasterImage bin = binarize(edges, opts.binarize_threshold);
    std::vector<Polyline> lines = trace(bin);
    if (lines.empty()) throw std::runtime_error("photo_to_sketch: no strokes traced");
    out.traced = polylines_to_sketch(lines, bin.height);
    out.distorted = distort(out.traced, params, rng);
    out.simplified = resample(out.distorted, opts.resample_step);
    out.normalized = normalize(out.simplified);
    AbstractResult abs = abstract_sketch(agent, out.normalized, opts.delta, rng);
    out.abstracted = std::move(abs.sketch);
    out.kept_mask = std::move(abs.kept_mask);
    return out;
}

// Builds a corpus of traced-and-simplified edge rasters from existing
// sketches, for continuing agent training on pipeline-style inputs. Each
// sketch is rendered to a raster, traced, distorted, resampled, and
// normalized; per-item seeds derive from the base seed.
inline Corpus traced_corpus(const Corpus& src, int raster_size, const PipelineOptions& opts, const DistortionParams& params, std::uint64_t seed) {
    Corpus out;
    out.class_names = src.class_names;
    for (std::size_t i = 0; i < src.sketches.size(); ++i) {
        const auto& s = src.sketches[i];
        RasterImage raster = render_raster(s, raster_size, raster_size);
        std::vector<Polyline> lines = trace(raster);
        if (lines.empty()) continue;
        auto rng = make_rng(seed, i);
        VectorSketch traced = polylines_to_sketch(lines, raster.height);
        traced.label = s.label;
        VectorSketch processed = normalize(resample(distort(traced, params, rng), opts.resample_step));
        if (processed.empty() || build_segment_table(processed).segment_count() < 1) continue;
        out.sketches.push_back(std::move(processed));
        out.is_test.push_back(src.is_test[i]);
        out.core_strokes.push_back(-1);  // tracing does not preserve stroke identity
    }
    validate_corpus(out);
    return out;
}

}  // namespace sketchlab
