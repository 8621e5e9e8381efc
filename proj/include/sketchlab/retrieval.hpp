#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>
#include <vector>

#include "sketchlab/agent.hpp"
#include "sketchlab/optim.hpp"
#include "sketchlab/raster.hpp"

namespace sketchlab {

inline constexpr int kEmbedSide = 16;
inline constexpr int kEmbedDim = kEmbedSide * kEmbedSide;

namespace detail {

// 64x64 binary raster -> 16x16 box means -> flat unit vector.
inline std::vector<double> embed_from_raster64(const RasterImage& img) {
    const int block = img.width / kEmbedSide;
    std::vector<double> e(static_cast<std::size_t>(kEmbedDim), 0.0);
    for (int cy = 0; cy < kEmbedSide; ++cy)
        for (int cx = 0; cx < kEmbedSide; ++cx) {
            double sum = 0.0;
            for (int y = 0; y < block; ++y)
                for (int x = 0; x < block; ++x) sum += img.at(cx * block + x, cy * block + y) > 0 ? 1.0 : 0.0;
            e[static_cast<std::size_t>(cy * kEmbedSide + cx)] = sum / (block * block);
        }
    double norm = 0.0;
    for (double v : e) norm += v * v;
    norm = std::sqrt(norm);
    if (norm <= 0.0) throw std::invalid_argument("raster_embed: blank input");
    for (double& v : e) v /= norm;
    return e;
}

}  // namespace detail

inline std::vector<double> raster_embed(const VectorSketch& sketch) {
    if (sketch.empty()) throw std::invalid_argument("raster_embed: empty sketch");
    return detail::embed_from_raster64(render_raster(sketch, 64, 64));
}

inline std::vector<double> raster_embed(const RasterImage& raster, int threshold = 128) {
    return detail::embed_from_raster64(resize_nn(binarize(raster, threshold), 64, 64));
}

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("euclidean: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline double triplet_loss(const std::vector<double>& s, const std::vector<double>& p_plus, const std::vector<double>& p_minus, double margin) {
    if (margin < 0.0) throw std::invalid_argument("triplet_loss: negative margin");
    return std::max(0.0, margin + euclidean(s, p_plus) - euclidean(s, p_minus));
}

struct RetrievalGallery {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> embeddings;

    void add(std::string id, std::vector<double> emb) {
        for (const auto& existing : ids)
            if (existing == id) throw std::invalid_argument("gallery: duplicate id " + id);
        ids.push_back(std::move(id));
        embeddings.push_back(std::move(emb));
    }
    int size() const { return static_cast<int>(ids.size()); }
};

// Fraction of queries whose true gallery item lands among the K smallest
// distances; ties broken by gallery index.
inline double topk_accuracy(const std::vector<std::vector<double>>& query_distances, const std::vector<int>& true_index, int gallery_size, int k) {
    if (query_distances.empty()) throw std::invalid_argument("topk_accuracy: no queries");
    if (query_distances.size() != true_index.size()) throw std::invalid_argument("topk_accuracy: queries and answers disagree");
    if (k < 1) throw std::invalid_argument("topk_accuracy: k must be >= 1");
    int hits = 0;
    for (std::size_t q = 0; q < query_distances.size(); ++q) {
        const auto& d = query_distances[q];
        if (static_cast<int>(d.size()) != gallery_size) throw std::invalid_argument("topk_accuracy: distance row size mismatch");
        const int truth = true_index[q];
        if (truth < 0 || truth >= gallery_size) throw std::invalid_argument("topk_accuracy: true match not in gallery");
        // Rank of the true item = number of gallery items strictly better,
        // with index as tie-break.
        int better = 0;
        for (int g = 0; g < gallery_size; ++g)
            if (d[static_cast<std::size_t>(g)] < d[static_cast<std::size_t>(truth)] || (d[static_cast<std::size_t>(g)] == d[static_cast<std::size_t>(truth)] && g < truth)) ++better;
        if (better < k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(query_distances.size());
}

enum class FusionKind { mean, min };

inline FusionKind fusion_from_name(const std::string& s) {
    if (s == "mean") return FusionKind::mean;
    if (s == "min") return FusionKind::min;
    throw std::invalid_argument("unknown fusion kind: " + s);
}

// The four query embeddings: the sketch itself plus abstractions at the
// given deltas (default -0.1 / 0.0 / +0.1). An abstraction that comes out
// empty falls back to the original embedding so fusion stays well defined.
inline std::vector<std::vector<double>> fuse_query(const VectorSketch& sketch, const AgentModel& agent, std::mt19937_64& rng, const std::vector<double>& deltas = {-0.1, 0.0, 0.1}) {
    std::vector<std::vector<double>> embs;
    embs.push_back(raster_embed(sketch));
    for (double d : deltas) {
        AbstractResult a = abstract_sketch(agent, sketch, d, rng);
        embs.push_back(a.sketch.empty() ? embs.front() : raster_embed(a.sketch));
    }
    return embs;
}

inline std::vector<double> fused_distances(const std::vector<std::vector<double>>& query_embs, const RetrievalGallery& gallery, FusionKind fusion) {
    if (query_embs.empty()) throw std::invalid_argument("fused_distances: no query embeddings");
    std::vector<double> out(static_cast<std::size_t>(gallery.size()), 0.0);
    for (int g = 0; g < gallery.size(); ++g) {
        double acc = fusion == FusionKind::min ? std::numeric_limits<double>::infinity() : 0.0;
        for (const auto& e : query_embs) {
            double d = euclidean(e, gallery.embeddings[static_cast<std::size_t>(g)]);
            if (fusion == FusionKind::min)
                acc = std::min(acc, d);
            else
                acc += d;
        }
        out[static_cast<std::size_t>(g)] = fusion == FusionKind::min ? acc : acc / static_cast<double>(query_embs.size());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Optional linear projection trained with the triplet loss
// ---------------------------------------------------------------------------

struct EmbeddingTriplet {
    std::vector<double> anchor;
    std::vector<double> positive;
    std::vector<double> negative;
};

struct ProjectionModel {
    int in_dim = kEmbedDim;
    int out_dim = 32;
    ParamStore params;  // proj.W, proj.b

    std::vector<double> apply(const std::vector<double>& e) const {
        if (static_cast<int>(e.size()) != in_dim) throw std::invalid_argument("projection: dimension mismatch");
        std::vector<double> out(static_cast<std::size_t>(out_dim), 0.0);
        plain::LinearRef lin(params, "proj.");
        lin.apply(e.data(), out.data());
        return out;
    }
};

struct ProjectionTrainConfig {
    int out_dim = 32;
    double margin = 0.2;
    double lr = 1e-3;
    int epochs = 5;
    std::uint64_t seed = 0;
};

// SGD-style Adam over shuffled triplets; anchors must differ from positives
// (zero anchor-positive distance has no usable gradient).
inline ProjectionModel train_projection(const std::vector<EmbeddingTriplet>& triplets, const ProjectionTrainConfig& cfg) {
    if (triplets.empty()) throw std::invalid_argument("train_projection: no triplets");
    const int in_dim = static_cast<int>(triplets.front().anchor.size());
    ProjectionModel m;
    m.in_dim = in_dim;
    m.out_dim = cfg.out_dim;
    auto rng = make_rng(cfg.seed, 0);
    init_linear(m.params, "proj.", in_dim, cfg.out_dim, rng);
    AdamState adam;
    adam.ensure(m.params);

    std::vector<int> order(triplets.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto erng = make_rng(cfg.seed, static_cast<std::uint64_t>(epoch) + 1);
        std::shuffle(order.begin(), order.end(), erng);
        for (int idx : order) {
            const auto& tri = triplets[static_cast<std::size_t>(idx)];
            Tape t(m.params);
            Var a = linear(t, "proj.", t.constant(Tensor::vec(tri.anchor)));
            Var p = linear(t, "proj.", t.constant(Tensor::vec(tri.positive)));
            Var n = linear(t, "proj.", t.constant(Tensor::vec(tri.negative)));
            auto dist = [&](Var u, Var v) {
                Var d = t.sub(u, v);
                return t.sqrt(t.sum(t.mul(d, d)));
            };
            Var loss = t.relu(t.affine(t.sub(dist(a, p), dist(a, n)), 1.0, cfg.margin));
            if (!std::isfinite(t.val(loss)[0])) throw std::runtime_error("train_projection: non-finite loss");
            m.params.zero_grads();
            t.backward(loss);
            adam_step(m.params, adam, cfg.lr);
        }
    }
    return m;
}

}  // namespace sketchlab
