#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sketchlab/classifier.hpp"
#include "sketchlab/sketch.hpp"

namespace sketchlab {

enum class RewardScheme { basic, ranked };

inline std::string scheme_name(RewardScheme s) { return s == RewardScheme::basic ? "basic" : "ranked"; }
inline RewardScheme scheme_from_name(const std::string& s) {
    if (s == "basic") return RewardScheme::basic;
    if (s == "ranked") return RewardScheme::ranked;
    throw std::invalid_argument("unknown reward scheme: " + s);
}

struct RewardConfig {
    double skip_bonus = 1.0;
    double keep_penalty = -5.0;
    double terminal_correct = 100.0;
    double terminal_wrong = -100.0;
    double w_rf = 0.5;
    double w_c = 0.8;
    double w_v = 0.2;
    double gamma = 0.9;
    RewardScheme scheme = RewardScheme::ranked;
};

inline void validate_reward_config(const RewardConfig& c) {
    if (std::abs(c.w_c + c.w_v - 1.0) > 1e-9) throw std::invalid_argument("reward config: w_c + w_v must be 1");
    if (c.w_rf < 0.0 || c.w_rf > 1.0) throw std::invalid_argument("reward config: w_rf must be in [0, 1]");
    if (c.gamma < 0.0 || c.gamma > 1.0) throw std::invalid_argument("reward config: gamma must be in [0, 1]");
}

// Pre-terminal: +1 for skip, -5 for keep. Terminal (t = M): +-100 by whether
// the classifier got the final sketch right; the final action's own +-1/-5 is
// not added.
inline double basic_reward(int t, int M, int action, std::optional<bool> final_correct, const RewardConfig& cfg = {}) {
    if (t < 1 || t > M) throw std::invalid_argument("basic_reward: t outside [1, M]");
    if (t < M) return action == 0 ? cfg.skip_bonus : cfg.keep_penalty;
    if (!final_correct) throw std::invalid_argument("basic_reward: terminal step needs the classification outcome");
    return *final_correct ? cfg.terminal_correct : cfg.terminal_wrong;
}

struct RankTerms {
    double c = 0.0;  // 1 - (K - C_t)/K
    double v = 0.0;  // 1 - (K - (C_t - C_prev))/(2K)
};

inline RankTerms rank_terms(int C_t, int C_prev, int K) {
    if (K < 1 || C_t < 1 || C_t > K || C_prev < 1 || C_prev > K) throw std::invalid_argument("rank_terms: ranks must lie in [1, K]");
    RankTerms rt;
    rt.c = 1.0 - static_cast<double>(K - C_t) / K;
    rt.v = 1.0 - static_cast<double>(K - (C_t - C_prev)) / (2.0 * K);
    return rt;
}

struct RankedWeights {
    double w_b = 1.0;
    double w_r = 0.0;
};

// w_r grows linearly from 0 at t = 1 to w_rf at t = M.
inline RankedWeights ranked_weights(int t, int M, double w_rf) {
    if (t < 1 || t > M) throw std::invalid_argument("ranked_weights: t outside [1, M]");
    RankedWeights w;
    w.w_r = w_rf * static_cast<double>(t - 1) / static_cast<double>(std::max(1, M - 1));
    w.w_b = 1.0 - w.w_r;
    return w;
}

// R = w_b*b + w_r*r with r = (w_c*c + w_v*v)*b, except r = 0 at the terminal
// step. Exposed at value level so the c/v extremes are directly testable.
inline double ranked_reward_value(double b, double c, double v, double w_b, double w_r, double w_c, double w_v, bool terminal = false) {
    double r = terminal ? 0.0 : (w_c * c + w_v * v) * b;
    return w_b * b + w_r * r;
}

inline double ranked_reward(int t, int M, int action, int C_t, int C_prev, int K, const RewardConfig& cfg, std::optional<bool> final_correct = std::nullopt) {
    double b = basic_reward(t, M, action, final_correct, cfg);
    RankTerms rt = rank_terms(C_t, C_prev, K);
    RankedWeights w = ranked_weights(t, M, cfg.w_rf);
    return ranked_reward_value(b, rt.c, rt.v, w.w_b, w.w_r, cfg.w_c, cfg.w_v, t == M);
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

struct EnvState {
    VectorSketch sketch;
    SegmentTable table;
    int cursor = 0;  // current stroke-segment, 0-based
    int t = 1;       // decision counter, 1-based
    int M = 0;       // decisions per episode, fixed at reset
    int label = -1;
    int prev_rank = 0;  // C_{t-1}; C_0 is the rank of the full sketch

    bool done() const { return t > M; }
};

inline EnvState env_reset(const VectorSketch& sketch, int label, const ClassifierModel& classifier, const RewardConfig& cfg) {
    validate_reward_config(cfg);
    if (sketch.empty()) throw std::invalid_argument("env_reset: empty sketch");
    if (label < 0 || label >= classifier.cfg.classes) throw std::invalid_argument("env_reset: label out of range");
    EnvState s;
    s.sketch = sketch;
    s.table = build_segment_table(s.sketch);
    s.M = s.table.segment_count();
    if (s.M < 1) throw std::invalid_argument("env_reset: sketch has no stroke-segments");
    s.label = label;
    s.prev_rank = rank_of(predict(classifier, s.sketch).probs, label);
    return s;
}

// State for reward-free episodes (abstraction at inference time).
inline EnvState env_reset_mechanical(const VectorSketch& sketch) {
    if (sketch.empty()) throw std::invalid_argument("env_reset: empty sketch");
    EnvState s;
    s.sketch = sketch;
    s.table = build_segment_table(s.sketch);
    s.M = s.table.segment_count();
    if (s.M < 1) throw std::invalid_argument("env_reset: sketch has no stroke-segments");
    return s;
}

// The mechanical part of a transition: skip removes the cursor's segment and
// rebuilds the table (the cursor index then already points at the next
// unprocessed segment); keep advances the cursor.
inline void env_advance(EnvState& s, int action) {
    if (s.done()) throw std::logic_error("env_advance: episode is done");
    if (action != 0 && action != 1) throw std::invalid_argument("env_advance: action must be 0 or 1");
    if (action == 0) {
        s.sketch = remove_segment(s.sketch, s.table, s.cursor);
        s.table = build_segment_table(s.sketch);
    } else {
        s.cursor += 1;
    }
    s.t += 1;
}

struct StepResult {
    double reward = 0.0;
    int rank = 0;  // C_t; 0 when the scheme never computed it
    bool done = false;
};

inline StepResult env_step(EnvState& s, int action, const ClassifierModel& classifier, const RewardConfig& cfg) {
    const int t = s.t;
    const bool terminal = t == s.M;
    env_advance(s, action);
    StepResult out;
    out.done = terminal;
    if (cfg.scheme == RewardScheme::basic) {
        if (terminal) {
            PredictResult p = predict(classifier, s.sketch);
            out.reward = basic_reward(t, s.M, action, p.predicted == s.label, cfg);
        } else {
            out.reward = basic_reward(t, s.M, action, std::nullopt, cfg);
        }
        return out;
    }
    PredictResult p = predict(classifier, s.sketch);
    out.rank = rank_of(p.probs, s.label);
    std::optional<bool> correct;
    if (terminal) correct = p.predicted == s.label;
    out.reward = ranked_reward(t, s.M, action, out.rank, s.prev_rank, classifier.cfg.classes, cfg, correct);
    s.prev_rank = out.rank;
    return out;
}

// ---------------------------------------------------------------------------
// Episode traces
// ---------------------------------------------------------------------------

struct TransitionRecord {
    int t = 0;
    int action = 0;
    double reward = 0.0;
    double log_prob = 0.0;
    int rank = 0;
    bool done = false;
};

struct EpisodeTrace {
    int episode = 0;
    int label = 0;
    RewardConfig config;
    VectorSketch sketch;  // the episode's initial sketch
    std::vector<TransitionRecord> steps;
};

inline void write_traces(std::ostream& os, const std::vector<EpisodeTrace>& traces) {
    for (const auto& tr : traces) {
        nlohmann::json head;
        head["episode"] = tr.episode;
        head["label"] = tr.label;
        head["config"] = {{"scheme", scheme_name(tr.config.scheme)}, {"skip_bonus", tr.config.skip_bonus},
                          {"keep_penalty", tr.config.keep_penalty}, {"terminal_correct", tr.config.terminal_correct},
                          {"terminal_wrong", tr.config.terminal_wrong}, {"w_rf", tr.config.w_rf},
                          {"w_c", tr.config.w_c}, {"w_v", tr.config.w_v}, {"gamma", tr.config.gamma}};
        auto& pts = head["points"];
        pts = nlohmann::json::array();
        for (const auto& p : tr.sketch.points) pts.push_back({p.dx, p.dy, p.pen});
        os << head.dump() << "\n";
        for (const auto& st : tr.steps) {
            nlohmann::json j = {{"t", st.t},       {"action", st.action}, {"reward", st.reward},
                                {"log_prob", st.log_prob}, {"rank", st.rank},     {"done", st.done}};
            os << j.dump() << "\n";
        }
    }
}

inline std::vector<EpisodeTrace> read_traces(std::istream& is) {
    std::vector<EpisodeTrace> out;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.contains("episode")) {
            EpisodeTrace tr;
            tr.episode = j.at("episode").get<int>();
            tr.label = j.at("label").get<int>();
            const auto& c = j.at("config");
            tr.config.scheme = scheme_from_name(c.at("scheme").get<std::string>());
            tr.config.skip_bonus = c.at("skip_bonus").get<double>();
            tr.config.keep_penalty = c.at("keep_penalty").get<double>();
            tr.config.terminal_correct = c.at("terminal_correct").get<double>();
            tr.config.terminal_wrong = c.at("terminal_wrong").get<double>();
            tr.config.w_rf = c.at("w_rf").get<double>();
            tr.config.w_c = c.at("w_c").get<double>();
            tr.config.w_v = c.at("w_v").get<double>();
            tr.config.gamma = c.at("gamma").get<double>();
            for (const auto& p : j.at("points")) tr.sketch.points.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<int>()});
            validate_sketch(tr.sketch);
            out.push_back(std::move(tr));
        } else {
            if (out.empty()) throw std::runtime_error("trace line " + std::to_string(line_no) + ": transition before any episode header");
            TransitionRecord st;
            st.t = j.at("t").get<int>();
            st.action = j.at("action").get<int>();
            st.reward = j.at("reward").get<double>();
            st.log_prob = j.at("log_prob").get<double>();
            st.rank = j.at("rank").get<int>();
            st.done = j.at("done").get<bool>();
            out.back().steps.push_back(st);
        }
    }
    return out;
}

// Re-steps the environment with the recorded actions; rewards and ranks must
// reproduce exactly (bitwise, via NDJSON double round-tripping).
inline void replay_trace(const EpisodeTrace& tr, const ClassifierModel& classifier) {
    EnvState s = env_reset(tr.sketch, tr.label, classifier, tr.config);
    if (static_cast<int>(tr.steps.size()) != s.M)
        throw std::runtime_error("replay: episode " + std::to_string(tr.episode) + " has " + std::to_string(tr.steps.size()) + " transitions, expected M=" + std::to_string(s.M));
    for (std::size_t i = 0; i < tr.steps.size(); ++i) {
        StepResult r = env_step(s, tr.steps[i].action, classifier, tr.config);
        const auto& st = tr.steps[i];
        if (r.reward != st.reward || r.rank != st.rank || r.done != st.done)
            throw std::runtime_error("replay: episode " + std::to_string(tr.episode) + " step " + std::to_string(st.t) +
                                     ": got reward=" + std::to_string(r.reward) + " rank=" + std::to_string(r.rank) +
                                     ", trace has reward=" + std::to_string(st.reward) + " rank=" + std::to_string(st.rank));
    }
}

}  // namespace sketchlab
