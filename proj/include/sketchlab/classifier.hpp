#pragma once

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "sketchlab/checkpoint.hpp"
#include "sketchlab/common.hpp"
#include "sketchlab/corpus.hpp"
#include "sketchlab/optim.hpp"
#include "sketchlab/rnn.hpp"

namespace sketchlab {

struct ClassifierConfig {
    int classes = 0;
    int hidden = 64;
    int layers = 3;
    std::uint64_t seed = 0;
};

// Stacked LSTM over data-segment rows [dx, dy, pen] with a linear head over
// the final hidden state. Layer prefixes are lstm0., lstm1., ...; the head
// is out.W / out.b.
struct ClassifierModel {
    ClassifierConfig cfg;
    std::vector<std::string> class_names;
    ParamStore params;
};

inline ClassifierModel make_classifier(const ClassifierConfig& cfg, std::vector<std::string> class_names = {}) {
    if (cfg.classes < 2) throw std::invalid_argument("classifier: need K >= 2");
    if (cfg.layers < 1 || cfg.hidden < 1) throw std::invalid_argument("classifier: bad layer/hidden config");
    ClassifierModel m;
    m.cfg = cfg;
    m.class_names = std::move(class_names);
    auto rng = make_rng(cfg.seed, 0);
    for (int l = 0; l < cfg.layers; ++l)
        init_lstm(m.params, "lstm" + std::to_string(l) + ".", l == 0 ? 3 : cfg.hidden, cfg.hidden, rng);
    init_linear(m.params, "out.", cfg.hidden, cfg.classes, rng);
    return m;
}

struct PredictResult {
    std::vector<double> probs;
    int predicted = 0;
    bool degenerate = false;  // empty input, probs are uniform
};

namespace detail {
inline std::vector<std::vector<double>> sketch_rows(const VectorSketch& s) {
    std::vector<std::vector<double>> rows;
    rows.reserve(s.points.size());
    for (const auto& p : s.points) rows.push_back({p.dx, p.dy, static_cast<double>(p.pen)});
    return rows;
}
}  // namespace detail

inline PredictResult predict(const ClassifierModel& m, const VectorSketch& sketch) {
    const int K = m.cfg.classes;
    PredictResult out;
    if (sketch.empty()) {
        out.probs.assign(static_cast<std::size_t>(K), 1.0 / K);
        out.predicted = 0;
        out.degenerate = true;
        return out;
    }
    const int H = m.cfg.hidden;
    std::vector<plain::LstmRef> layers;
    for (int l = 0; l < m.cfg.layers; ++l) layers.emplace_back(m.params, "lstm" + std::to_string(l) + ".");
    plain::LinearRef head(m.params, "out.");

    auto rows = detail::sketch_rows(sketch);
    std::vector<std::vector<double>> seq = std::move(rows);
    plain::LstmScratch scratch;
    scratch.resize(H);
    std::vector<double> h, c;
    for (const auto& layer : layers) {
        h.assign(static_cast<std::size_t>(H), 0.0);
        c.assign(static_cast<std::size_t>(H), 0.0);
        for (auto& x : seq) {
            plain::lstm_step(layer, x.data(), h, c, scratch);
            x = h;
        }
    }
    std::vector<double> logits(static_cast<std::size_t>(K), 0.0);
    head.apply(h.data(), logits.data());
    out.probs.assign(static_cast<std::size_t>(K), 0.0);
    kernel::softmax(logits.data(), out.probs.data(), K);
    out.predicted = static_cast<int>(std::max_element(out.probs.begin(), out.probs.end()) - out.probs.begin());
    return out;
}

// Reverse rank of the ground-truth class: sort by probability descending
// (ties by ascending class index); label at 1-based position r gives
// C = K - r + 1, so top-1 scores K and last place scores 1.
inline int rank_of(const std::vector<double>& probs, int label) {
    const int K = static_cast<int>(probs.size());
    if (label < 0 || label >= K) throw std::invalid_argument("rank_of: label out of range");
    std::vector<int> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)]; });
    int r = static_cast<int>(std::find(order.begin(), order.end(), label) - order.begin()) + 1;
    return K - r + 1;
}

inline double evaluate_classifier(const ClassifierModel& m, const Corpus& corpus, const std::vector<int>& indices) {
    if (indices.empty()) throw std::invalid_argument("evaluate_classifier: no sketches");
    int hits = 0;
    for (int i : indices)
        if (predict(m, corpus.sketches[static_cast<std::size_t>(i)]).predicted == *corpus.sketches[static_cast<std::size_t>(i)].label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(indices.size());
}

struct ClassifierTrainConfig {
    int epochs = 20;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    double stop_accuracy = 2.0;
};

struct ClassifierTrainReport {
    std::vector<double> epoch_test_accuracy;
    std::vector<double> epoch_mean_loss;
    int best_epoch = -1;
    double best_accuracy = 0.0;
};

// Single-sketch Adam updates with per-epoch seeded shuffling; keeps the
// parameters from the epoch with the best test accuracy.
inline ClassifierTrainReport train_classifier(ClassifierModel& m, const Corpus& corpus, const ClassifierTrainConfig& cfg) {
    validate_corpus(corpus);
    if (corpus.class_count() != m.cfg.classes) throw std::invalid_argument("train_classifier: corpus K != model K");
    auto train = corpus.train_indices();
    auto test = corpus.test_indices();
    AdamState adam;
    adam.ensure(m.params);
    ClassifierTrainReport report;
    ParamStore best = m.params;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto rng = make_rng(cfg.seed, static_cast<std::uint64_t>(epoch) + 1);
        std::shuffle(train.begin(), train.end(), rng);
        double loss_sum = 0.0;
        for (int idx : train) {
            const auto& s = corpus.sketches[static_cast<std::size_t>(idx)];
            Tape t(m.params);
            std::vector<Var> xs;
            for (const auto& row : detail::sketch_rows(s)) xs.push_back(t.constant(Tensor::vec(row)));
            Var h = stacked_lstm(t, "lstm", m.cfg.layers, xs, m.cfg.hidden);
            Var loss = t.cross_entropy(t.softmax(linear(t, "out.", h)), *s.label);
            double lv = t.val(loss)[0];
            if (!std::isfinite(lv)) throw std::runtime_error("train_classifier: non-finite loss at epoch " + std::to_string(epoch) + " sketch " + std::to_string(idx));
            loss_sum += lv;
            m.params.zero_grads();
            t.backward(loss);
            adam_step(m.params, adam, cfg.lr);
        }
        double acc = evaluate_classifier(m, corpus, test);
        report.epoch_mean_loss.push_back(loss_sum / static_cast<double>(train.size()));
        report.epoch_test_accuracy.push_back(acc);
        if (acc > report.best_accuracy) {
            report.best_accuracy = acc;
            report.best_epoch = epoch + 1;
            best = m.params;
        }
        if (acc >= cfg.stop_accuracy) break;
    }
    if (cfg.epochs > 0) m.params = best;
    return report;
}

inline std::string classifier_config_text(const ClassifierModel& m) {
    std::ostringstream os;
    os << "kind=classifier\n";
    os << "classes=" << m.cfg.classes << "\n";
    os << "hidden=" << m.cfg.hidden << "\n";
    os << "layers=" << m.cfg.layers << "\n";
    os << "seed=" << m.cfg.seed << "\n";
    os << "class_names=";
    for (std::size_t i = 0; i < m.class_names.size(); ++i) os << (i ? "," : "") << m.class_names[i];
    os << "\n";
    return os.str();
}

inline void save_classifier(const std::string& path, const ClassifierModel& m) {
    save_checkpoint(path, classifier_config_text(m), m.params);
}

inline ClassifierModel load_classifier(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    auto cfg_map = parse_config_text(ck.config);
    if (config_get(cfg_map, "kind") != "classifier") throw std::runtime_error("load_classifier: checkpoint kind is not classifier");
    ClassifierModel m;
    m.cfg.classes = config_get_int(cfg_map, "classes");
    m.cfg.hidden = config_get_int(cfg_map, "hidden");
    m.cfg.layers = config_get_int(cfg_map, "layers");
    m.cfg.seed = std::stoull(config_get(cfg_map, "seed"));
    std::istringstream names(config_get(cfg_map, "class_names"));
    std::string name;
    while (std::getline(names, name, ',')) m.class_names.push_back(name);
    m.params = std::move(ck.params);
    ClassifierModel fresh = make_classifier(m.cfg, m.class_names);
    if (fresh.params.count() != m.params.count()) throw std::runtime_error("load_classifier: parameter list mismatch");
    for (int id = 0; id < fresh.params.count(); ++id) {
        if (fresh.params.name(id) != m.params.name(id) || !fresh.params.value(id).same_shape(m.params.value(id)))
            throw std::runtime_error("load_classifier: parameter mismatch at " + fresh.params.name(id));
    }
    return m;
}

}  // namespace sketchlab
