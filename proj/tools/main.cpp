#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "sketchlab/agent.hpp"
#include "sketchlab/checkpoint.hpp"
#include "sketchlab/classifier.hpp"
#include "sketchlab/common.hpp"
#include "sketchlab/corpus.hpp"
#include "sketchlab/distort.hpp"
#include "sketchlab/env.hpp"
#include "sketchlab/ndjson.hpp"
#include "sketchlab/photo2sketch.hpp"
#include "sketchlab/raster.hpp"
#include "sketchlab/retrieval.hpp"
#include "sketchlab/sketch.hpp"
#include "sketchlab/svg.hpp"
#include "sketchlab/tracing.hpp"
#include "sketchlab/trainer.hpp"

namespace fs = std::filesystem;
using namespace sketchlab;

namespace {

// Shortest decimal form that parses back to the exact double.
std::string fmt_value(double v) {
    char buf[64];
    for (int prec : {15, 16, 17}) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

// Effective-configuration echo written into every output directory so a run
// can be reproduced from its artifacts alone.
struct ConfigEcho {
    std::string command;
    std::vector<std::pair<std::string, std::string>> entries;

    explicit ConfigEcho(std::string cmd) : command(std::move(cmd)) {}
    void add(const std::string& k, const std::string& v) { entries.emplace_back(k, v); }
    void add(const std::string& k, const char* v) { entries.emplace_back(k, v); }
    void add(const std::string& k, double v) { add(k, fmt_value(v)); }
    void add(const std::string& k, int v) { add(k, std::to_string(v)); }
    void add(const std::string& k, std::uint64_t v) { add(k, std::to_string(v)); }
    void add(const std::string& k, const std::vector<std::string>& v) {
        std::string joined;
        for (const auto& s : v) joined += (joined.empty() ? "" : ",") + s;
        add(k, joined);
    }
    void add(const std::string& k, const std::vector<int>& v) {
        std::string joined;
        for (int x : v) joined += (joined.empty() ? "" : ",") + std::to_string(x);
        add(k, joined);
    }
};

fs::path dir_of(const std::string& file_path) {
    fs::path p(file_path);
    return p.has_parent_path() ? p.parent_path() : fs::path(".");
}

void ensure_parent(const std::string& file_path) {
    fs::path dir = dir_of(file_path);
    if (!dir.empty()) fs::create_directories(dir);
}

void write_run_config(const fs::path& dir, const ConfigEcho& echo) {
    fs::create_directories(dir);
    fs::path path = dir / ("run-config-" + echo.command + ".txt");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "version = " << kVersion << "\n";
    out << "command = " << echo.command << "\n\n";
    out << "[" << echo.command << "]\n";
    for (const auto& [k, v] : echo.entries) out << k << " = " << v << "\n";
}

std::string join_csv(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

// Strict NDJSON read: any malformed line aborts the command.
std::vector<SketchRecord> read_records(const std::string& path) {
    NdjsonReadResult r = read_ndjson(path);
    if (!r.errors.empty())
        throw std::runtime_error(path + " line " + std::to_string(r.errors.front().line) + ": " + r.errors.front().message);
    if (r.records.empty()) throw std::runtime_error(path + ": no sketches");
    return r.records;
}

void write_svg_file(const std::string& path, const VectorSketch& sketch, const std::vector<std::string>& colors = {}) {
    ensure_parent(path);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << render_svg(sketch, colors);
}

std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

void check_classifier_matches(const ClassifierModel& clf, const Corpus& corpus) {
    if (clf.cfg.classes != corpus.class_count())
        throw std::runtime_error("classifier has " + std::to_string(clf.cfg.classes) + " classes, corpus has " + std::to_string(corpus.class_count()));
    if (!clf.class_names.empty() && clf.class_names != corpus.class_names)
        throw std::runtime_error("classifier and corpus class names disagree");
}

// ---------------------------------------------------------------------------
// gen-toy
// ---------------------------------------------------------------------------

struct GenToyOpts {
    std::vector<std::string> classes{"square", "circle", "zigzag"};
    int n = 100;
    double jitter_std = 0.01;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
    std::string out;
};

void run_gen_toy(const GenToyOpts& o) {
    ToyGenSpec spec;
    spec.classes = o.classes;
    spec.jitter_std = o.jitter_std;
    spec.test_fraction = o.test_fraction;
    spec.seed = o.seed;
    Corpus corpus = generate_toy(spec, o.n);

    std::vector<std::string> words;
    words.reserve(corpus.sketches.size());
    for (const auto& s : corpus.sketches) words.push_back(corpus.class_names[static_cast<std::size_t>(*s.label)]);
    ensure_parent(o.out);
    write_ndjson(o.out, corpus.sketches, corpus.core_strokes, words);

    ConfigEcho echo("gen-toy");
    echo.add("classes", join_csv(o.classes));
    echo.add("n", o.n);
    echo.add("jitter-std", o.jitter_std);
    echo.add("test-fraction", o.test_fraction);
    echo.add("seed", o.seed);
    echo.add("out", o.out);
    write_run_config(dir_of(o.out), echo);

    std::cout << "wrote " << corpus.sketches.size() << " sketches across " << corpus.class_count() << " classes to " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// train-classifier
// ---------------------------------------------------------------------------

struct TrainClassifierOpts {
    std::vector<std::string> data;
    int cap = 0;
    double test_fraction = 0.2;
    int hidden = 64;
    int layers = 3;
    int epochs = 20;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::string out;
};

void run_train_classifier(const TrainClassifierOpts& o) {
    Corpus corpus = load_corpus(o.data, o.cap, o.test_fraction, o.seed);
    ClassifierConfig cc;
    cc.classes = corpus.class_count();
    cc.hidden = o.hidden;
    cc.layers = o.layers;
    cc.seed = o.seed;
    ClassifierModel model = make_classifier(cc, corpus.class_names);

    ClassifierTrainConfig tc;
    tc.epochs = o.epochs;
    tc.lr = o.lr;
    tc.seed = o.seed;
    ClassifierTrainReport report = train_classifier(model, corpus, tc);

    ensure_parent(o.out);
    save_classifier(o.out, model);

    ConfigEcho echo("train-classifier");
    echo.add("data", o.data);
    echo.add("cap", o.cap);
    echo.add("test-fraction", o.test_fraction);
    echo.add("hidden", o.hidden);
    echo.add("layers", o.layers);
    echo.add("epochs", o.epochs);
    echo.add("lr", o.lr);
    echo.add("seed", o.seed);
    echo.add("out", o.out);
    write_run_config(dir_of(o.out), echo);

    for (std::size_t e = 0; e < report.epoch_test_accuracy.size(); ++e)
        std::cout << "epoch " << (e + 1) << ": mean loss " << report.epoch_mean_loss[e] << ", test accuracy " << report.epoch_test_accuracy[e] << "\n";
    std::cout << "best epoch " << report.best_epoch << ": test accuracy " << report.best_accuracy << "\n";
    std::cout << "saved classifier to " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// eval-classifier
// ---------------------------------------------------------------------------

struct EvalClassifierOpts {
    std::vector<std::string> data;
    int cap = 0;
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
    std::string classifier;
    std::string split = "test";
    std::string out;
};

void run_eval_classifier(const EvalClassifierOpts& o) {
    Corpus corpus = load_corpus(o.data, o.cap, o.test_fraction, o.seed);
    ClassifierModel model = load_classifier(o.classifier);
    check_classifier_matches(model, corpus);

    std::vector<int> indices;
    if (o.split == "train") {
        indices = corpus.train_indices();
    } else if (o.split == "test") {
        indices = corpus.test_indices();
    } else {
        indices.resize(corpus.sketches.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = static_cast<int>(i);
    }
    double acc = evaluate_classifier(model, corpus, indices);
    std::cout << "accuracy " << acc << " on " << indices.size() << " sketches (split " << o.split << ")\n";

    if (!o.out.empty()) {
        ensure_parent(o.out);
        std::ofstream out(o.out);
        if (!out) throw std::runtime_error("cannot write " + o.out);
        out << "split,sketches,accuracy\n" << o.split << "," << indices.size() << "," << acc << "\n";

        ConfigEcho echo("eval-classifier");
        echo.add("data", o.data);
        echo.add("cap", o.cap);
        echo.add("test-fraction", o.test_fraction);
        echo.add("seed", o.seed);
        echo.add("classifier", o.classifier);
        echo.add("split", o.split);
        echo.add("out", o.out);
        write_run_config(dir_of(o.out), echo);
    }
}

// ---------------------------------------------------------------------------
// train-agent
// ---------------------------------------------------------------------------

struct TrainAgentOpts {
    std::vector<std::string> data;
    int cap = 0;
    double test_fraction = 0.2;
    std::string classifier;
    std::string scheme = "ranked";
    int episodes = 3000;
    int N = 16;
    double gamma = 0.9;
    double lr = 1e-4;
    int eval_every = 500;
    std::string baseline = "moving-average";
    double baseline_momentum = 0.9;
    int hidden = 128;
    int mlp_hidden = 64;
    int window_radius = 0;
    int workers = 1;
    double w_rf = 0.5;
    double w_c = 0.8;
    double w_v = 0.2;
    std::uint64_t seed = 0;
    std::string out;
    std::string curve;
    std::string traces;
};

void run_train_agent(const TrainAgentOpts& o) {
    Corpus corpus = load_corpus(o.data, o.cap, o.test_fraction, o.seed);
    ClassifierModel clf = load_classifier(o.classifier);
    check_classifier_matches(clf, corpus);

    AgentConfig ac;
    ac.hidden = o.hidden;
    ac.mlp_hidden = o.mlp_hidden;
    ac.window_radius = o.window_radius;
    ac.seed = o.seed;
    AgentModel agent = make_agent(ac);

    TrainerConfig tc;
    tc.lr = o.lr;
    tc.N = o.N;
    tc.episodes = o.episodes;
    tc.eval_every = o.eval_every;
    tc.baseline = o.baseline == "none" ? BaselineKind::none : BaselineKind::moving_average;
    tc.baseline_momentum = o.baseline_momentum;
    tc.workers = o.workers;
    tc.seed = o.seed;

    RewardConfig rc;
    rc.scheme = scheme_from_name(o.scheme);
    rc.gamma = o.gamma;
    rc.w_rf = o.w_rf;
    rc.w_c = o.w_c;
    rc.w_v = o.w_v;

    TrainAgentReport report = train_agent(agent, clf, corpus, tc, rc, !o.traces.empty());

    ensure_parent(o.out);
    save_agent(o.out, agent);

    std::string curve_path = o.curve.empty() ? (dir_of(o.out) / "curve.csv").string() : o.curve;
    ensure_parent(curve_path);
    std::ofstream curve(curve_path);
    if (!curve) throw std::runtime_error("cannot write " + curve_path);
    write_curve_csv(curve, report.curve);

    if (!o.traces.empty()) {
        ensure_parent(o.traces);
        std::ofstream tr(o.traces);
        if (!tr) throw std::runtime_error("cannot write " + o.traces);
        write_traces(tr, report.traces);
    }

    ConfigEcho echo("train-agent");
    echo.add("data", o.data);
    echo.add("cap", o.cap);
    echo.add("test-fraction", o.test_fraction);
    echo.add("classifier", o.classifier);
    echo.add("scheme", o.scheme);
    echo.add("episodes", o.episodes);
    echo.add("N", o.N);
    echo.add("gamma", o.gamma);
    echo.add("lr", o.lr);
    echo.add("eval-every", o.eval_every);
    echo.add("baseline", o.baseline);
    echo.add("baseline-momentum", o.baseline_momentum);
    echo.add("hidden", o.hidden);
    echo.add("mlp-hidden", o.mlp_hidden);
    echo.add("window-radius", o.window_radius);
    echo.add("workers", o.workers);
    echo.add("w-rf", o.w_rf);
    echo.add("w-c", o.w_c);
    echo.add("w-v", o.w_v);
    echo.add("seed", o.seed);
    echo.add("out", o.out);
    echo.add("curve", curve_path);
    echo.add("traces", o.traces);
    write_run_config(dir_of(o.out), echo);

    for (const auto& p : report.curve)
        std::cout << "episode " << p.episode << ": eval return " << p.mean_return << ", kept segments " << p.mean_kept_segments << ", accuracy " << p.eval_accuracy << "\n";
    std::cout << "best checkpoint at episode " << report.best_episode << " (eval return " << report.best_mean_return << ")\n";
    std::cout << "saved agent to " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// abstract
// ---------------------------------------------------------------------------

struct AbstractOpts {
    std::string in;
    std::string agent;
    double delta = 0.0;
    std::uint64_t seed = 0;
    std::string out;
    std::string svg;
};

void run_abstract(const AbstractOpts& o) {
    AgentModel agent = load_agent(o.agent);
    std::vector<SketchRecord> records = read_records(o.in);

    ensure_parent(o.out);
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error("cannot write " + o.out);
    if (!o.svg.empty()) fs::create_directories(o.svg);

    for (std::size_t i = 0; i < records.size(); ++i) {
        VectorSketch s = normalize(records[i].sketch);
        auto rng = make_rng(o.seed, i);
        AbstractResult res = abstract_sketch(agent, s, o.delta, rng);
        out << sketch_to_line(res.sketch, std::nullopt, records[i].word) << "\n";
        if (!o.svg.empty()) {
            std::string stem = (fs::path(o.svg) / ("sketch" + zero_pad(static_cast<int>(i), 4))).string();
            write_svg_file(stem + "-original.svg", s);
            write_svg_file(stem + "-abstracted.svg", res.sketch);
        }
        int kept = 0;
        for (int m : res.kept_mask) kept += m;
        std::cout << "sketch " << i << ": kept " << res.sketch.size() << "/" << s.size() << " points (" << kept << "/" << res.kept_mask.size() << " segments)\n";
    }

    ConfigEcho echo("abstract");
    echo.add("in", o.in);
    echo.add("agent", o.agent);
    echo.add("delta", o.delta);
    echo.add("seed", o.seed);
    echo.add("out", o.out);
    echo.add("svg", o.svg);
    write_run_config(dir_of(o.out), echo);
}

// ---------------------------------------------------------------------------
// saliency
// ---------------------------------------------------------------------------

struct SaliencyOpts {
    std::string in;
    std::string agent;
    std::string svg;
    std::string out;
};

void run_saliency(const SaliencyOpts& o) {
    AgentModel agent = load_agent(o.agent);
    std::vector<SketchRecord> records = read_records(o.in);

    std::ostringstream csv;
    csv << "sketch,stroke,saliency\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        VectorSketch s = normalize(records[i].sketch);
        SaliencyMap sal = saliency(agent, s);
        for (std::size_t l = 0; l < sal.size(); ++l) csv << i << "," << l << "," << sal[l] << "\n";
        if (!o.svg.empty()) {
            std::vector<std::string> colors;
            colors.reserve(sal.size());
            for (double v : sal) colors.push_back(saliency_color(v));
            std::string path = records.size() == 1 ? o.svg : (fs::path(o.svg) / ("saliency" + zero_pad(static_cast<int>(i), 4) + ".svg")).string();
            write_svg_file(path, s, colors);
        }
    }
    std::cout << csv.str();
    if (!o.out.empty()) {
        ensure_parent(o.out);
        std::ofstream f(o.out);
        if (!f) throw std::runtime_error("cannot write " + o.out);
        f << csv.str();
    }

    ConfigEcho echo("saliency");
    echo.add("in", o.in);
    echo.add("agent", o.agent);
    echo.add("svg", o.svg);
    echo.add("out", o.out);
    if (!o.out.empty())
        write_run_config(dir_of(o.out), echo);
    else if (!o.svg.empty())
        write_run_config(records.size() == 1 ? dir_of(o.svg) : fs::path(o.svg), echo);
}

// ---------------------------------------------------------------------------
// trace
// ---------------------------------------------------------------------------

struct TraceOpts {
    std::string edges;
    int threshold = 128;
    std::string out;
    std::string svg;
};

void run_trace(const TraceOpts& o) {
    RasterImage img = load_pgm(o.edges);
    RasterImage bin = binarize(img, o.threshold);
    std::vector<Polyline> lines = trace(bin);
    std::cout << "traced " << lines.size() << " polylines\n";

    ensure_parent(o.out);
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error("cannot write " + o.out);
    if (!lines.empty()) {
        VectorSketch sketch = polylines_to_sketch(lines, bin.height);
        out << sketch_to_line(sketch) << "\n";
        if (!o.svg.empty()) write_svg_file(o.svg, sketch);
    }

    ConfigEcho echo("trace");
    echo.add("edges", o.edges);
    echo.add("threshold", o.threshold);
    echo.add("out", o.out);
    echo.add("svg", o.svg);
    write_run_config(dir_of(o.out), echo);
}

// ---------------------------------------------------------------------------
// distort
// ---------------------------------------------------------------------------

struct DistortOpts {
    std::string in;
    std::string out;
    std::uint64_t seed = 0;
    double rotation_deg = 5.0;
    double translation = 0.02;
    double scale_lo = 0.95;
    double scale_hi = 1.05;
    double skew = 0.05;
    double stroke_translation = 0.01;
    double jitter_amp = 0.01;
    double wavelength = 0.2;
};

void run_distort(const DistortOpts& o) {
    DistortionParams params;
    double rot = o.rotation_deg * std::numbers::pi / 180.0;
    params.rotation = {-rot, rot};
    params.translation = {-o.translation, o.translation};
    params.scale = {o.scale_lo, o.scale_hi};
    params.skew_x = {-o.skew, o.skew};
    params.skew_y = {-o.skew, o.skew};
    params.stroke_translation = {-o.stroke_translation, o.stroke_translation};
    params.curvature_jitter_amp = o.jitter_amp;
    params.curvature_jitter_wavelength = o.wavelength;
    validate_distortion(params);

    std::vector<SketchRecord> records = read_records(o.in);
    ensure_parent(o.out);
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error("cannot write " + o.out);
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto rng = make_rng(o.seed, i);
        VectorSketch d = distort(records[i].sketch, params, rng);
        out << sketch_to_line(d, records[i].core_strokes, records[i].word) << "\n";
    }
    std::cout << "distorted " << records.size() << " sketches\n";

    ConfigEcho echo("distort");
    echo.add("in", o.in);
    echo.add("out", o.out);
    echo.add("seed", o.seed);
    echo.add("rotation-deg", o.rotation_deg);
    echo.add("translation", o.translation);
    echo.add("scale-lo", o.scale_lo);
    echo.add("scale-hi", o.scale_hi);
    echo.add("skew", o.skew);
    echo.add("stroke-translation", o.stroke_translation);
    echo.add("jitter-amp", o.jitter_amp);
    echo.add("wavelength", o.wavelength);
    write_run_config(dir_of(o.out), echo);
}

// ---------------------------------------------------------------------------
// resample
// ---------------------------------------------------------------------------

struct ResampleOpts {
    std::string in;
    std::string out;
    double step = 3.0;
};

void run_resample(const ResampleOpts& o) {
    std::vector<SketchRecord> records = read_records(o.in);
    ensure_parent(o.out);
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error("cannot write " + o.out);
    for (const auto& rec : records) {
        VectorSketch r = resample(rec.sketch, o.step);
        out << sketch_to_line(r, rec.core_strokes, rec.word) << "\n";
    }
    std::cout << "resampled " << records.size() << " sketches\n";

    ConfigEcho echo("resample");
    echo.add("in", o.in);
    echo.add("out", o.out);
    echo.add("step", o.step);
    write_run_config(dir_of(o.out), echo);
}

// ---------------------------------------------------------------------------
// p2s
// ---------------------------------------------------------------------------

struct P2sOpts {
    std::string edges;
    std::string agent;
    double delta = 0.0;
    int variants = 5;
    std::string dump_stages;
    int threshold = 128;
    double step = 3.0;
    std::uint64_t seed = 0;
};

void run_p2s(const P2sOpts& o) {
    if (o.variants < 1) throw std::runtime_error("p2s: variants must be >= 1");
    RasterImage img = load_pgm(o.edges);
    AgentModel agent = load_agent(o.agent);
    PipelineOptions opts;
    opts.binarize_threshold = o.threshold;
    opts.resample_step = o.step;
    opts.delta = o.delta;
    DistortionParams params;

    fs::path dump(o.dump_stages);
    fs::create_directories(dump);
    save_pgm((dump / "edges.pgm").string(), binarize(img, o.threshold));

    const char* stage_names[4] = {"traced", "distorted", "simplified", "abstracted"};
    std::vector<std::ofstream> stages;
    for (const char* name : stage_names) {
        stages.emplace_back(dump / (std::string(name) + ".ndjson"));
        if (!stages.back()) throw std::runtime_error("cannot write " + (dump / (std::string(name) + ".ndjson")).string());
    }

    for (int v = 0; v < o.variants; ++v) {
        auto rng = make_rng(o.seed, static_cast<std::uint64_t>(v));
        PhotoToSketchResult res = photo_to_sketch(img, agent, opts, params, rng);
        const VectorSketch* by_stage[4] = {&res.traced, &res.distorted, &res.simplified, &res.abstracted};
        for (int s = 0; s < 4; ++s) {
            stages[static_cast<std::size_t>(s)] << sketch_to_line(*by_stage[s]) << "\n";
            write_svg_file((dump / ("v" + std::to_string(v) + "-" + stage_names[s] + ".svg")).string(), *by_stage[s]);
        }
        int kept = 0;
        for (int m : res.kept_mask) kept += m;
        std::cout << "variant " << v << ": traced " << res.traced.size() << " points, resampled to " << res.simplified.size()
                  << ", kept " << kept << "/" << res.kept_mask.size() << " segments\n";
    }

    ConfigEcho echo("p2s");
    echo.add("edges", o.edges);
    echo.add("agent", o.agent);
    echo.add("delta", o.delta);
    echo.add("variants", o.variants);
    echo.add("dump-stages", o.dump_stages);
    echo.add("threshold", o.threshold);
    echo.add("step", o.step);
    echo.add("seed", o.seed);
    write_run_config(dump, echo);
}

// ---------------------------------------------------------------------------
// sbir-eval
// ---------------------------------------------------------------------------

struct SbirEvalOpts {
    std::string gallery;
    std::string queries;
    std::string agent;
    std::vector<int> k{1, 10};
    std::string fusion = "mean";
    int threshold = 128;
    std::uint64_t seed = 0;
    std::string out;
};

void run_sbir_eval(const SbirEvalOpts& o) {
    AgentModel agent = load_agent(o.agent);
    FusionKind fusion = fusion_from_name(o.fusion);

    std::vector<fs::path> pgms;
    for (const auto& entry : fs::directory_iterator(o.gallery))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") pgms.push_back(entry.path());
    std::sort(pgms.begin(), pgms.end());
    if (pgms.empty()) throw std::runtime_error("sbir-eval: no .pgm files in " + o.gallery);

    RetrievalGallery gallery;
    for (const auto& p : pgms) gallery.add(p.stem().string(), raster_embed(load_pgm(p.string()), o.threshold));

    std::vector<SketchRecord> records = read_records(o.queries);
    if (static_cast<int>(records.size()) != gallery.size())
        throw std::runtime_error("sbir-eval: " + std::to_string(records.size()) + " queries for " + std::to_string(gallery.size()) + " gallery items; query i must match gallery item i");

    std::vector<std::vector<double>> distances(records.size());
    std::vector<int> truth(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        VectorSketch s = normalize(records[i].sketch);
        auto rng = make_rng(o.seed, i);
        distances[i] = fused_distances(fuse_query(s, agent, rng), gallery, fusion);
        truth[i] = static_cast<int>(i);
    }

    ensure_parent(o.out);
    std::ofstream out(o.out);
    if (!out) throw std::runtime_error("cannot write " + o.out);
    out << "query,true_item,rank\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& d = distances[i];
        int better = 0;
        for (std::size_t j = 0; j < d.size(); ++j)
            if (d[j] < d[i] || (d[j] == d[i] && j < i)) ++better;
        out << i << "," << gallery.ids[i] << "," << (better + 1) << "\n";
    }
    out << "k,topk_accuracy\n";
    for (int k : o.k) {
        double acc = topk_accuracy(distances, truth, gallery.size(), k);
        out << k << "," << acc << "\n";
        std::cout << "top-" << k << " accuracy " << acc << " over " << records.size() << " queries (fusion " << o.fusion << ")\n";
    }

    ConfigEcho echo("sbir-eval");
    echo.add("gallery", o.gallery);
    echo.add("queries", o.queries);
    echo.add("agent", o.agent);
    echo.add("k", o.k);
    echo.add("fusion", o.fusion);
    echo.add("threshold", o.threshold);
    echo.add("seed", o.seed);
    echo.add("out", o.out);
    write_run_config(dir_of(o.out), echo);
}

// ---------------------------------------------------------------------------
// replay-check
// ---------------------------------------------------------------------------

struct ReplayCheckOpts {
    std::string trace;
    std::string classifier;
};

void run_replay_check(const ReplayCheckOpts& o) {
    ClassifierModel clf = load_classifier(o.classifier);
    std::ifstream in(o.trace);
    if (!in) throw std::runtime_error("cannot open " + o.trace);
    std::vector<EpisodeTrace> traces = read_traces(in);
    if (traces.empty()) throw std::runtime_error(o.trace + ": no episodes");
    for (const auto& tr : traces) replay_trace(tr, clf);
    std::cout << "rewards match (" << traces.size() << " episodes)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sketch abstraction laboratory"};
    app.set_version_flag("--version", std::string(kVersion));
    app.set_config("--config", "", "key = value config file with [subcommand] sections; command-line flags win");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    std::vector<std::pair<CLI::App*, std::function<void()>>> handlers;

    GenToyOpts gt;
    {
        auto* cmd = app.add_subcommand("gen-toy", "generate a labeled toy sketch corpus");
        cmd->add_option("--classes", gt.classes, "comma-separated shapes: square, circle, zigzag, tee, star")->delimiter(',')->capture_default_str();
        cmd->add_option("--n", gt.n, "sketches per class")->capture_default_str();
        cmd->add_option("--jitter-std", gt.jitter_std, "point jitter standard deviation")->capture_default_str();
        cmd->add_option("--test-fraction", gt.test_fraction, "held-out fraction per class")->capture_default_str();
        cmd->add_option("--seed", gt.seed, "rng seed")->envname("SKETCHLAB_SEED")->capture_default_str();
        cmd->add_option("--out", gt.out, "output NDJSON path")->required();
        handlers.emplace_back(cmd, [&] { run_gen_toy(gt); });
    }

    TrainClassifierOpts tcl;
    {
        auto* cmd = app.add_subcommand("train-classifier", "train the recognizability classifier");
        cmd->add_option("--data", tcl.data, "NDJSON corpus paths")->required()->delimiter(',');
        cmd->add_option("--cap", tcl.cap, "per-class sketch cap, 0 = none")->capture_default_str();
        cmd->add_option("--test-fraction", tcl.test_fraction, "held-out fraction per class")->capture_default_str();
        cmd->add_option("--hidden", tcl.hidden, "LSTM hidden units")->capture_default_str();
        cmd->add_option("--layers", tcl.layers, "stacked LSTM layers")->capture_default_str();
        cmd->add_option("--epochs", tcl.epochs, "training epochs")->capture_default_str();
        cmd->add_option("--lr", tcl.lr, "Adam learning rate")->capture_default_str();
        cmd->add_option("--seed", tcl.seed, "rng seed")->envname("SKETCHLAB_SEED")->capture_default_str();
        cmd->add_option("--out", tcl.out, "output checkpoint path")->required();
        handlers.emplace_back(cmd, [&] { run_train_classifier(tcl); });
    }

    EvalClassifierOpts ecl;
    {
        auto* cmd = app.add_subcommand("eval-classifier", "evaluate a classifier checkpoint on a corpus");
        cmd->add_option("--data", ecl.data, "NDJSON corpus paths")->required()->delimiter(',');
        cmd->add_option("--cap", ecl.cap, "per-class sketch cap, 0 = none")->capture_default_str();
        cmd->add_option("--test-fraction", ecl.test_fraction, "held-out fraction per class")->capture_default_str();
        cmd->add_option("--seed", ecl.seed, "rng seed for the split")->envname("SKETCHLAB_SEED")->capture_default_str();
        cmd->add_option("--classifier", ecl.classifier, "classifier checkpoint")->required();
        cmd->add_option("--split", ecl.split, "which split to score")->check(CLI::IsMember({"train", "test", "all"}))->capture_default_str();
        cmd->add_option("--out", ecl.out, "optional metrics CSV path");
        handlers.emplace_back(cmd, [&] { run_eval_classifier(ecl); });
    }

    TrainAgentOpts ta;
    {
        auto* cmd = app.add_subcommand("train-agent", "train the abstraction agent with REINFORCE");
        cmd->add_option("--data", ta.data, "NDJSON corpus paths")->required()->delimiter(',');
        cmd->add_option("--cap", ta.cap, "per-class sketch cap, 0 = none")->capture_default_str();
        cmd->add_option("--test-fraction", ta.test_fraction, "held-out fraction per class")->capture_default_str();
        cmd->add_option("--classifier", ta.classifier, "classifier checkpoint providing rewards")->required();
        cmd->add_option("--scheme", ta.scheme, "reward scheme")->check(CLI::IsMember({"basic", "ranked"}))->capture_default_str();
        cmd->add_option("--episodes", ta.episodes, "training episodes")->capture_default_str();
        cmd->add_option("--N", ta.N, "trajectories per policy update")->capture_default_str();
        cmd->add_option("--gamma", ta.gamma, "discount factor")->capture_default_str();
        cmd->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
        cmd->add_option("--eval-every", ta.eval_every, "episodes between eval points, 0 = final only")->capture_default_str();
        cmd->add_option("--baseline", ta.baseline, "return baseline")->check(CLI::IsMember({"none", "moving-average"}))->capture_default_str();
        cmd->add_option("--baseline-momentum", ta.baseline_momentum, "moving-average momentum")->capture_default_str();
        cmd->add_option("--hidden", ta.hidden, "encoder cells per direction")->capture_default_str();
        cmd->add_option("--mlp-hidden", ta.mlp_hidden, "policy head hidden units")->capture_default_str();
        cmd->add_option("--window-radius", ta.window_radius, "stroke-segments of context per side")->capture_default_str();
        cmd->add_option("--workers", ta.workers, "rollout worker threads")->capture_default_str();
        cmd->add_option("--w-rf", ta.w_rf, "rank reward weight cap")->capture_default_str();
        cmd->add_option("--w-c", ta.w_c, "rank term weight")->capture_default_str();
        cmd->add_option("--w-v", ta.w_v, "rank change term weight")->capture_default_str();
        cmd->add_option("--seed", ta.seed, "rng seed")->envname("SKETCHLAB_SEED")->capture_default_str();
        cmd->add_option("--out", ta.out, "output agent checkpoint path")->required();
        cmd->add_option("--curve", ta.curve, "training curve CSV path, default curve.csv next to --out");
        cmd->add_option("--traces", ta.traces, "optional NDJSON path recording every training episode");
        handlers.emplace_back(cmd, [&] { run_train_agent(ta); });
    }

    AbstractOpts ab;
    {
        auto* cmd = app.add_subcommand("abstract", "abstract sketches with a trained agent");
        cmd->add_option("--in", ab.in, "input NDJSON sketches")->required();
        cmd->add_option("--agent", ab.agent, "agent checkpoint")->required();
        cmd->add_option("--delta", ab.delta, "abstraction-level shift on the skip probability")->capture_default_str();
        cmd->add_option("--seed", ab.seed, "rng seed")->envname("SKETCHLAB_SEED")->capture_default_str();
        cmd->add_option("--out", ab.out, "output NDJSON path")->required();
        cmd->add_option("--svg", ab.svg, "optional directory for before/after SVG pairs");
        handlers.emplace_back(cmd, [&] { run_abstract(ab); });
    }

    SaliencyOpts sal;
    {
        auto* cmd = app.add_subcommand("saliency", "per-stroke keep-probability saliency");
        cmd->add_option("--in", sal.in, "input NDJSON sketches")->required();
        cmd->add_option("--agent", sal.agent, "agent checkpoint")->required();
        cmd->add_option("--svg", sal.svg, "heatmap SVG path (a directory when the input has several sketches)");
        cmd->add_option("--out", sal.out, "optional saliency CSV path");
        handlers.emplace_back(cmd, [&] { run_saliency(sal); });
    }

    TraceOpts tr;
    {
        auto* cmd = app.add_subcommand("trace", "thin a raster edge map and trace it to polylines");
        cmd->add_option("--edges", tr.edges, "input PGM edge map")->required();
        cmd->add_option("--threshold", tr.threshold, "binarization threshold")->capture_default_str();
        cmd->add_option("--out", tr.out, "output NDJSON path")->required();
        cmd->add_option("--svg", tr.svg, "optional SVG path");
        handlers.emplace_back(cmd, [&] { run_trace(tr); });
    }

    DistortOpts di;
    {
        auto* cmd = app.add_subcommand("distort", "apply sketch-style geometric distortion");
        cmd->add_option("--in", di.in, "input NDJSON sketches")->required();
        cmd->add_option("--out", di.out, "output NDJSON path")->required();
        cmd->add_option("--seed", di.seed, "rng seed")->envname("SKETCHLAB_SEED")->capture_default_str();
        cmd->add_option("--rotation-deg", di.rotation_deg, "max rotation in degrees")->capture_default_str();
        cmd->add_option("--translation", di.translation, "max translation, fraction of bbox side")->capture_default_str();
        cmd->add_option("--scale-lo", di.scale_lo, "scale range low")->capture_default_str();
        cmd->add_option("--scale-hi", di.scale_hi, "scale range high")->capture_default_str();
        cmd->add_option("--skew", di.skew, "max skew factor")->capture_default_str();
        cmd->add_option("--stroke-translation", di.stroke_translation, "max per-stroke translation, fraction of bbox side")->capture_default_str();
        cmd->add_option("--jitter-amp", di.jitter_amp, "max curvature jitter amplitude, fraction of bbox side")->capture_default_str();
        cmd->add_option("--wavelength", di.wavelength, "curvature jitter wavelength, fraction of bbox side")->capture_default_str();
        handlers.emplace_back(cmd, [&] { run_distort(di); });
    }

    ResampleOpts rs;
    {
        auto* cmd = app.add_subcommand("resample", "resample strokes at a fixed arc-length step");
        cmd->add_option("--in", rs.in, "input NDJSON sketches")->required();
        cmd->add_option("--out", rs.out, "output NDJSON path")->required();
        cmd->add_option("--step", rs.step, "arc-length step")->capture_default_str();
        handlers.emplace_back(cmd, [&] { run_resample(rs); });
    }

    P2sOpts p2;
    {
        auto* cmd = app.add_subcommand("p2s", "photo edge map to abstracted sketch pipeline");
        cmd->add_option("--edges", p2.edges, "input PGM edge map")->required();
        cmd->add_option("--agent", p2.agent, "agent checkpoint")->required();
        cmd->add_option("--delta", p2.delta, "abstraction-level shift")->capture_default_str();
        cmd->add_option("--variants", p2.variants, "distorted variants to emit")->capture_default_str();
        cmd->add_option("--dump-stages", p2.dump_stages, "output directory for every pipeline stage")->required();
        cmd->add_option("--threshold", p2.threshold, "binarization threshold")->capture_default_str();
        cmd->add_option("--step", p2.step, "resample arc-length step in pixels")->capture_default_str();
        cmd->add_option("--seed", p2.seed, "rng seed")->envname("SKETCHLAB_SEED")->capture_default_str();
        handlers.emplace_back(cmd, [&] { run_p2s(p2); });
    }

    SbirEvalOpts sb;
    {
        auto* cmd = app.add_subcommand("sbir-eval", "retrieval evaluation with multi-abstraction score fusion");
        cmd->add_option("--gallery", sb.gallery, "directory of PGM edge maps; item i is query i's target")->required();
        cmd->add_option("--queries", sb.queries, "NDJSON query sketches")->required();
        cmd->add_option("--agent", sb.agent, "agent checkpoint")->required();
        cmd->add_option("--k", sb.k, "top-K cutoffs")->delimiter(',')->capture_default_str();
        cmd->add_option("--fusion", sb.fusion, "distance fusion across abstraction levels")->check(CLI::IsMember({"mean", "min"}))->capture_default_str();
        cmd->add_option("--threshold", sb.threshold, "gallery binarization threshold")->capture_default_str();
        cmd->add_option("--seed", sb.seed, "rng seed")->envname("SKETCHLAB_SEED")->capture_default_str();
        cmd->add_option("--out", sb.out, "output CSV of per-query ranks and top-K summary")->required();
        handlers.emplace_back(cmd, [&] { run_sbir_eval(sb); });
    }

    ReplayCheckOpts rp;
    {
        auto* cmd = app.add_subcommand("replay-check", "re-run recorded episodes and verify rewards");
        cmd->add_option("--trace", rp.trace, "episode trace NDJSON")->required();
        cmd->add_option("--classifier", rp.classifier, "classifier checkpoint the trace was recorded with")->required();
        handlers.emplace_back(cmd, [&] { run_replay_check(rp); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        for (auto& [cmd, fn] : handlers)
            if (cmd->parsed()) fn();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
