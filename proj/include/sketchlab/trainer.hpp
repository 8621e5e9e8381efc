#pragma once

#include <string>
#include <vector>

#include "sketchlab/agent.hpp"
#include "sketchlab/corpus.hpp"
#include "sketchlab/optim.hpp"

namespace sketchlab {

struct Trajectory {
    EpisodeTrace trace;  // initial sketch, label, config, per-step records
    int sketch_id = -1;
    double total_return = 0.0;  // undiscounted reward sum
};

enum class BaselineKind { none, moving_average };

struct TrainerConfig {
    double lr = 1e-4;
    int N = 16;  // trajectories per update
    int episodes = 3000;
    int eval_every = 500;
    BaselineKind baseline = BaselineKind::moving_average;
    double baseline_momentum = 0.9;
    int workers = 1;
    std::uint64_t seed = 0;
};

// Samples the unshifted policy through env_step, recording rewards, ranks,
// and log-probabilities.
inline Trajectory rollout(const AgentModel& agent, const ClassifierModel& classifier, const VectorSketch& sketch, int label, const RewardConfig& reward_cfg, std::mt19937_64& rng) {
    Trajectory tr;
    tr.trace.label = label;
    tr.trace.config = reward_cfg;
    tr.trace.sketch = sketch;
    EnvState s = env_reset(sketch, label, classifier, reward_cfg);
    auto feats = encode(agent, s.sketch);
    for (int step = 1; step <= s.M; ++step) {
        ActionDistribution phi = policy(agent, feats, s.table, s.cursor);
        SampledAction sa = sample_action(phi, 0.0, rng);
        StepResult r = env_step(s, sa.action, classifier, reward_cfg);
        tr.trace.steps.push_back({step, sa.action, r.reward, sa.log_prob, r.rank, r.done});
        tr.total_return += r.reward;
        if (sa.action == 0 && !s.done()) feats = encode(agent, s.sketch);
    }
    return tr;
}

// Discounted return-to-go: G_t = R_t + gamma * G_{t+1}.
inline std::vector<double> returns(const std::vector<double>& rewards, double gamma) {
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("returns: gamma outside [0, 1]");
    std::vector<double> g(rewards.size(), 0.0);
    double acc = 0.0;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        acc = rewards[i] + gamma * acc;
        g[i] = acc;
    }
    return g;
}

struct UpdateStats {
    double loss = 0.0;
    double mean_return = 0.0;      // undiscounted, over the batch
    double baseline_used = 0.0;
};

// One REINFORCE step on a batch: descends
//   loss = -(1/N) * sum_traj sum_t log pi(a_t|s_t) * (G_t - baseline).
// The forward pass is rebuilt on a tape from each trajectory's initial
// sketch and recorded actions; the moving-average baseline updates from the
// batch mean discounted return after it is used.
inline UpdateStats reinforce_update(AgentModel& agent, const std::vector<Trajectory>& batch, const TrainerConfig& cfg, double gamma, AdamState& adam, double& baseline) {
    if (batch.empty()) throw std::invalid_argument("reinforce_update: empty batch");
    const double n = static_cast<double>(batch.size());
    UpdateStats stats;
    stats.baseline_used = cfg.baseline == BaselineKind::moving_average ? baseline : 0.0;
    agent.params.zero_grads();
    double g1_sum = 0.0;
    for (const auto& tr : batch) {
        std::vector<double> rewards;
        for (const auto& st : tr.trace.steps) rewards.push_back(st.reward);
        std::vector<double> g = returns(rewards, gamma);
        g1_sum += g.empty() ? 0.0 : g.front();
        stats.mean_return += tr.total_return / n;

        Tape t(agent.params);
        EnvState s = env_reset_mechanical(tr.trace.sketch);
        auto feats = tape_encode(t, agent, s.sketch);
        Var loss;
        for (std::size_t i = 0; i < tr.trace.steps.size(); ++i) {
            const int action = tr.trace.steps[i].action;
            Var lp = tape_log_prob(t, tape_policy(t, agent, feats, s.table, s.cursor), action);
            Var term = t.scale(lp, -(g[i] - stats.baseline_used) / n);
            loss = loss.valid() ? t.add(loss, term) : term;
            env_advance(s, action);
            if (action == 0 && !s.done()) feats = tape_encode(t, agent, s.sketch);
        }
        double lv = t.val(loss)[0];
        if (!std::isfinite(lv)) throw std::runtime_error("reinforce_update: non-finite loss");
        stats.loss += lv;
        t.backward(loss);
    }
    adam_step(agent.params, adam, cfg.lr);
    if (cfg.baseline == BaselineKind::moving_average)
        baseline = cfg.baseline_momentum * baseline + (1.0 - cfg.baseline_momentum) * (g1_sum / n);
    return stats;
}

struct EvalStats {
    double mean_return = 0.0;
    double mean_kept_segments = 0.0;  // stroke-segments kept per sketch
    double accuracy = 0.0;            // recognizability of the abstracted sketches
};

// Fixed-seed rollouts at delta = 0 over the given indices; the same rng
// streams are reused at every eval point so curves are comparable.
inline EvalStats evaluate_agent(const AgentModel& agent, const ClassifierModel& classifier, const Corpus& corpus, const std::vector<int>& indices, const RewardConfig& reward_cfg, const TrainerConfig& cfg) {
    if (indices.empty()) throw std::invalid_argument("evaluate_agent: no sketches");
    EvalStats out;
    std::vector<EvalStats> partial(indices.size());
    parallel_for(static_cast<int>(indices.size()), cfg.workers, [&](int i) {
        const int idx = indices[static_cast<std::size_t>(i)];
        const auto& sk = corpus.sketches[static_cast<std::size_t>(idx)];
        auto rng = make_rng(cfg.seed, 0xE7A10000ULL + static_cast<std::uint64_t>(idx));
        Trajectory tr = rollout(agent, classifier, sk, *sk.label, reward_cfg, rng);
        EvalStats& p = partial[static_cast<std::size_t>(i)];
        p.mean_return = tr.total_return;
        for (const auto& st : tr.trace.steps) p.mean_kept_segments += st.action;
        // Reconstruct the final sketch from the actions to score recognizability.
        EnvState s = env_reset_mechanical(sk);
        for (const auto& st : tr.trace.steps) env_advance(s, st.action);
        p.accuracy = predict(classifier, s.sketch).predicted == *sk.label ? 1.0 : 0.0;
    });
    for (const auto& p : partial) {
        out.mean_return += p.mean_return;
        out.mean_kept_segments += p.mean_kept_segments;
        out.accuracy += p.accuracy;
    }
    const double n = static_cast<double>(indices.size());
    out.mean_return /= n;
    out.mean_kept_segments /= n;
    out.accuracy /= n;
    return out;
}

struct CurvePoint {
    int episode = 0;  // episodes completed when measured
    double mean_return = 0.0;
    double mean_kept_segments = 0.0;
    double eval_accuracy = 0.0;
};

struct TrainAgentReport {
    std::vector<CurvePoint> curve;
    int best_episode = 0;
    double best_mean_return = 0.0;
    std::vector<EpisodeTrace> traces;  // filled when keep_traces is set
};

// Episode loop over seeded-shuffled training sketches. Rollouts within one
// N-trajectory buffer window see the same parameter snapshot, so they can run
// on parallel workers without changing results. Returns the checkpoint with
// the best eval mean return.
inline TrainAgentReport train_agent(AgentModel& agent, const ClassifierModel& classifier, const Corpus& corpus, const TrainerConfig& cfg, const RewardConfig& reward_cfg, bool keep_traces = false) {
    validate_reward_config(reward_cfg);
    if (cfg.N < 1) throw std::invalid_argument("train_agent: N must be >= 1");
    if (cfg.lr < 0.0) throw std::invalid_argument("train_agent: negative learning rate");
    auto train = corpus.train_indices();
    auto test = corpus.test_indices();
    if (train.empty() || test.empty()) throw std::invalid_argument("train_agent: empty split");

    TrainAgentReport report;
    if (cfg.episodes <= 0) return report;

    AdamState adam;
    adam.ensure(agent.params);
    double baseline = 0.0;
    ParamStore best = agent.params;

    auto eval_point = [&](int episodes_done) {
        EvalStats ev = evaluate_agent(agent, classifier, corpus, test, reward_cfg, cfg);
        report.curve.push_back({episodes_done, ev.mean_return, ev.mean_kept_segments, ev.accuracy});
        if (report.curve.size() == 1 || ev.mean_return > report.best_mean_return) {
            report.best_mean_return = ev.mean_return;
            report.best_episode = episodes_done;
            best = agent.params;
        }
    };

    // Episode e draws sketch train[order(e)], reshuffled once per pass.
    std::vector<int> order = train;
    int pass = -1;
    auto sketch_for = [&](int e) -> int {
        int p = e / static_cast<int>(order.size());
        if (p != pass) {
            pass = p;
            order = train;
            auto rng = make_rng(cfg.seed, 0x0DDE0000ULL + static_cast<std::uint64_t>(p));
            std::shuffle(order.begin(), order.end(), rng);
        }
        return order[static_cast<std::size_t>(e % static_cast<int>(order.size()))];
    };

    eval_point(0);
    int next_eval = cfg.eval_every;
    std::vector<Trajectory> buffer;
    for (int e0 = 0; e0 < cfg.episodes; e0 += cfg.N) {
        const int batch_n = std::min(cfg.N, cfg.episodes - e0);
        buffer.assign(static_cast<std::size_t>(batch_n), {});
        std::vector<int> ids(static_cast<std::size_t>(batch_n));
        for (int i = 0; i < batch_n; ++i) ids[static_cast<std::size_t>(i)] = sketch_for(e0 + i);
        parallel_for(batch_n, cfg.workers, [&](int i) {
            const int idx = ids[static_cast<std::size_t>(i)];
            const auto& sk = corpus.sketches[static_cast<std::size_t>(idx)];
            auto rng = make_rng(cfg.seed, 0x0111E000ULL + static_cast<std::uint64_t>(e0 + i));
            buffer[static_cast<std::size_t>(i)] = rollout(agent, classifier, sk, *sk.label, reward_cfg, rng);
            buffer[static_cast<std::size_t>(i)].sketch_id = idx;
            buffer[static_cast<std::size_t>(i)].trace.episode = e0 + i;
        });
        if (keep_traces)
            for (const auto& tr : buffer) report.traces.push_back(tr.trace);
        reinforce_update(agent, buffer, cfg, reward_cfg.gamma, adam, baseline);
        const int done = e0 + batch_n;
        if ((cfg.eval_every > 0 && done >= next_eval) || done == cfg.episodes) {
            eval_point(done);
            if (cfg.eval_every > 0)
                while (next_eval <= done) next_eval += cfg.eval_every;
        }
    }
    agent.params = best;
    return report;
}

inline void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& curve) {
    os << "episode,mean_return,mean_kept_segments,eval_accuracy\n";
    for (const auto& p : curve)
        os << p.episode << "," << p.mean_return << "," << p.mean_kept_segments << "," << p.eval_accuracy << "\n";
}

}  // namespace sketchlab
