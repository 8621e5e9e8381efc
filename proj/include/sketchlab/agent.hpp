#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "sketchlab/checkpoint.hpp"
#include "sketchlab/env.hpp"
#include "sketchlab/rnn.hpp"

namespace sketchlab {

struct AgentConfig {
    int hidden = 128;       // B-GRU cells per direction
    int mlp_hidden = 64;
    int window_radius = 0;  // stroke-segments of context on each side
    std::uint64_t seed = 0;
};

inline int agent_mlp_input_width(const AgentConfig& cfg) {
    return (2 * cfg.window_radius + 1) * kSegmentPoints * 2 * cfg.hidden;
}

// Single-layer bidirectional GRU over data-segments ("fwd."/"bwd.") plus a
// two-layer MLP head ("mlp1."/"mlp2.") over a window of stroke-segment
// features, softmaxed to (p_skip, p_keep).
struct AgentModel {
    AgentConfig cfg;
    ParamStore params;
};

inline AgentModel make_agent(const AgentConfig& cfg) {
    if (cfg.hidden < 1 || cfg.mlp_hidden < 1 || cfg.window_radius < 0) throw std::invalid_argument("agent: bad config");
    AgentModel m;
    m.cfg = cfg;
    auto rng = make_rng(cfg.seed, 0);
    init_gru(m.params, "fwd.", 3, cfg.hidden, rng);
    init_gru(m.params, "bwd.", 3, cfg.hidden, rng);
    init_linear(m.params, "mlp1.", agent_mlp_input_width(cfg), cfg.mlp_hidden, rng);
    init_linear(m.params, "mlp2.", cfg.mlp_hidden, 2, rng);
    return m;
}

struct ActionDistribution {
    double p_skip = 0.5;
    double p_keep = 0.5;
};

// ---------------------------------------------------------------------------
// Plain forward path
// ---------------------------------------------------------------------------

// One 2H-wide feature row per data-segment: forward state at that point in
// the first half, backward state in the second.
inline std::vector<std::vector<double>> encode(const AgentModel& m, const VectorSketch& sketch) {
    if (sketch.empty()) throw std::invalid_argument("encode: empty sketch");
    const int H = m.cfg.hidden;
    const int n = sketch.size();
    plain::GruRef fwd(m.params, "fwd."), bwd(m.params, "bwd.");
    plain::GruScratch scratch;
    scratch.resize(H);
    std::vector<std::vector<double>> feats(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(2 * H), 0.0));
    std::vector<double> h(static_cast<std::size_t>(H), 0.0);
    double x[3];
    for (int i = 0; i < n; ++i) {
        const auto& p = sketch.points[static_cast<std::size_t>(i)];
        x[0] = p.dx, x[1] = p.dy, x[2] = p.pen;
        plain::gru_step(fwd, x, h, scratch);
        std::copy(h.begin(), h.end(), feats[static_cast<std::size_t>(i)].begin());
    }
    h.assign(static_cast<std::size_t>(H), 0.0);
    for (int i = n - 1; i >= 0; --i) {
        const auto& p = sketch.points[static_cast<std::size_t>(i)];
        x[0] = p.dx, x[1] = p.dy, x[2] = p.pen;
        plain::gru_step(bwd, x, h, scratch);
        std::copy(h.begin(), h.end(), feats[static_cast<std::size_t>(i)].begin() + H);
    }
    return feats;
}

namespace detail {

// Data-segment index for window slot (seg_offset, point_slot), or -1 when the
// slot is padding (window clipped at a boundary or segment shorter than 5).
inline int window_point_index(const SegmentTable& table, int cursor, int seg_offset, int point_slot) {
    int seg = cursor + seg_offset;
    if (seg < 0 || seg >= table.segment_count()) return -1;
    const SegmentRange& r = table.ranges[static_cast<std::size_t>(seg)];
    if (point_slot >= r.size()) return -1;
    return r.begin + point_slot;
}

}  // namespace detail

inline ActionDistribution policy(const AgentModel& m, const std::vector<std::vector<double>>& feats, const SegmentTable& table, int cursor) {
    if (cursor < 0 || cursor >= table.segment_count()) throw std::out_of_range("policy: cursor outside segment table");
    const int H2 = 2 * m.cfg.hidden;
    const int r = m.cfg.window_radius;
    std::vector<double> flat(static_cast<std::size_t>(agent_mlp_input_width(m.cfg)), 0.0);
    int off = 0;
    for (int so = -r; so <= r; ++so) {
        for (int slot = 0; slot < kSegmentPoints; ++slot, off += H2) {
            int pi = detail::window_point_index(table, cursor, so, slot);
            if (pi >= 0) std::copy(feats[static_cast<std::size_t>(pi)].begin(), feats[static_cast<std::size_t>(pi)].end(), flat.begin() + off);
        }
    }
    plain::LinearRef mlp1(m.params, "mlp1."), mlp2(m.params, "mlp2.");
    std::vector<double> z(static_cast<std::size_t>(m.cfg.mlp_hidden), 0.0);
    mlp1.apply(flat.data(), z.data());
    for (auto& v : z) v = std::tanh(v);
    double logits[2], probs[2];
    mlp2.apply(z.data(), logits);
    kernel::softmax(logits, probs, 2);
    return {probs[0], probs[1]};
}

// (p_skip + d, p_keep - d), clamped to [0, 1] and renormalized; d > 0 biases
// skipping. Inference-only: training always samples the unshifted policy.
inline ActionDistribution shift(const ActionDistribution& phi, double delta) {
    if (delta < -1.0 || delta > 1.0) throw std::invalid_argument("shift: delta outside [-1, 1]");
    double ps = std::clamp(phi.p_skip + delta, 0.0, 1.0);
    double pk = std::clamp(phi.p_keep - delta, 0.0, 1.0);
    double sum = ps + pk;
    if (sum <= 0.0) return {0.5, 0.5};
    return {ps / sum, pk / sum};
}

struct SampledAction {
    int action = 0;      // 0 = skip, 1 = keep
    double log_prob = 0.0;  // of the taken action under the UNshifted phi
};

inline SampledAction sample_action(const ActionDistribution& phi, double delta, std::mt19937_64& rng) {
    ActionDistribution shifted = shift(phi, delta);
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    SampledAction out;
    out.action = u < shifted.p_skip ? 0 : 1;
    out.log_prob = std::log(out.action == 0 ? phi.p_skip : phi.p_keep);
    return out;
}

// ---------------------------------------------------------------------------
// Tape path (training)
// ---------------------------------------------------------------------------

inline std::vector<Var> tape_encode(Tape& t, const AgentModel& m, const VectorSketch& sketch) {
    std::vector<Var> xs;
    xs.reserve(sketch.points.size());
    for (const auto& p : sketch.points) xs.push_back(t.constant(Tensor::vec({p.dx, p.dy, static_cast<double>(p.pen)})));
    return bidirectional_gru(t, "fwd.", "bwd.", xs, m.cfg.hidden);
}

inline Var tape_policy(Tape& t, const AgentModel& m, const std::vector<Var>& feats, const SegmentTable& table, int cursor) {
    if (cursor < 0 || cursor >= table.segment_count()) throw std::out_of_range("tape_policy: cursor outside segment table");
    const int r = m.cfg.window_radius;
    Var pad;  // lazily created shared zero block
    std::vector<Var> parts;
    for (int so = -r; so <= r; ++so) {
        for (int slot = 0; slot < kSegmentPoints; ++slot) {
            int pi = detail::window_point_index(table, cursor, so, slot);
            if (pi >= 0) {
                parts.push_back(feats[static_cast<std::size_t>(pi)]);
            } else {
                if (!pad.valid()) pad = t.zeros({2 * m.cfg.hidden});
                parts.push_back(pad);
            }
        }
    }
    Var z = t.tanh(linear(t, "mlp1.", t.concat(parts)));
    return t.softmax(linear(t, "mlp2.", z));
}

inline Var tape_log_prob(Tape& t, Var probs, int action) { return t.log(t.pick(probs, action)); }

// ---------------------------------------------------------------------------
// Abstraction and saliency
// ---------------------------------------------------------------------------

struct AbstractResult {
    VectorSketch sketch;                 // final abstracted sketch
    std::vector<int> kept_mask;          // per original stroke-segment, 1 = kept
    std::vector<ActionDistribution> phis;  // unshifted policy at each step
};

// Runs one full episode with sampled shifted actions; the sketch geometry
// evolves through the same transition the trainer uses.
inline AbstractResult abstract_sketch(const AgentModel& m, const VectorSketch& sketch, double delta, std::mt19937_64& rng) {
    EnvState s = env_reset_mechanical(sketch);
    AbstractResult out;
    auto feats = encode(m, s.sketch);
    for (int step = 0; step < s.M; ++step) {
        ActionDistribution phi = policy(m, feats, s.table, s.cursor);
        SampledAction sa = sample_action(phi, delta, rng);
        out.phis.push_back(phi);
        out.kept_mask.push_back(sa.action);
        env_advance(s, sa.action);
        if (sa.action == 0 && !s.done() && !s.sketch.empty()) feats = encode(m, s.sketch);
    }
    out.sketch = std::move(s.sketch);
    return out;
}

using SaliencyMap = std::vector<double>;  // S_l per stroke, values in [0, 1]

// Forced-keep pass: the sketch never mutates, so one encoding serves every
// step. S_l = mean keep-probability over stroke l's segments.
inline SaliencyMap saliency(const AgentModel& m, const VectorSketch& sketch) {
    if (sketch.empty()) throw std::invalid_argument("saliency: empty sketch");
    SegmentTable table = build_segment_table(sketch);
    auto feats = encode(m, sketch);
    SaliencyMap sums(static_cast<std::size_t>(table.stroke_count), 0.0);
    std::vector<int> counts(static_cast<std::size_t>(table.stroke_count), 0);
    for (int seg = 0; seg < table.segment_count(); ++seg) {
        ActionDistribution phi = policy(m, feats, table, seg);
        int l = table.ranges[static_cast<std::size_t>(seg)].stroke;
        sums[static_cast<std::size_t>(l)] += phi.p_keep;
        counts[static_cast<std::size_t>(l)] += 1;
    }
    for (std::size_t l = 0; l < sums.size(); ++l) sums[l] /= counts[l];
    return sums;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline std::string agent_config_text(const AgentModel& m) {
    std::ostringstream os;
    os << "kind=agent\n";
    os << "hidden=" << m.cfg.hidden << "\n";
    os << "mlp_hidden=" << m.cfg.mlp_hidden << "\n";
    os << "window_radius=" << m.cfg.window_radius << "\n";
    os << "seed=" << m.cfg.seed << "\n";
    return os.str();
}

inline void save_agent(const std::string& path, const AgentModel& m) {
    save_checkpoint(path, agent_config_text(m), m.params);
}

inline AgentModel load_agent(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    auto cfg_map = parse_config_text(ck.config);
    if (config_get(cfg_map, "kind") != "agent") throw std::runtime_error("load_agent: checkpoint kind is not agent");
    AgentModel m;
    m.cfg.hidden = config_get_int(cfg_map, "hidden");
    m.cfg.mlp_hidden = config_get_int(cfg_map, "mlp_hidden");
    m.cfg.window_radius = config_get_int(cfg_map, "window_radius");
    m.cfg.seed = std::stoull(config_get(cfg_map, "seed"));
    m.params = std::move(ck.params);
    AgentModel fresh = make_agent(m.cfg);
    if (fresh.params.count() != m.params.count()) throw std::runtime_error("load_agent: parameter list mismatch");
    for (int id = 0; id < fresh.params.count(); ++id) {
        if (fresh.params.name(id) != m.params.name(id) || !fresh.params.value(id).same_shape(m.params.value(id)))
            throw std::runtime_error("load_agent: parameter mismatch at " + fresh.params.name(id));
    }
    return m;
}

}  // namespace sketchlab
