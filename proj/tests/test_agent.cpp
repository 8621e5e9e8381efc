#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "helpers.hpp"
#include "sketchlab/agent.hpp"
#include "sketchlab/common.hpp"
#include "sketchlab/env.hpp"

using namespace sketchlab;

namespace {

AgentModel tiny_agent(int hidden = 4, int mlp = 4, int radius = 0, std::uint64_t seed = 1) {
    AgentConfig cfg;
    cfg.hidden = hidden;
    cfg.mlp_hidden = mlp;
    cfg.window_radius = radius;
    cfg.seed = seed;
    return make_agent(cfg);
}

void zero_params(AgentModel& m) {
    for (int id = 0; id < m.params.count(); ++id) m.params.value(id).fill(0.0);
}

}  // namespace

TEST_CASE("encode emits one feature row per data-segment") {
    AgentModel m = tiny_agent();
    auto rng = make_rng(100, 0);
    VectorSketch s = testutil::random_sketch(rng, 17);
    auto feats = encode(m, s);
    REQUIRE(feats.size() == 17);
    for (const auto& f : feats) REQUIRE(f.size() == 8);
    CHECK_THROWS(encode(m, VectorSketch{}));
}

TEST_CASE("a zero-parameter encoder produces all-zero features") {
    AgentModel m = tiny_agent();
    zero_params(m);
    auto rng = make_rng(101, 0);
    auto feats = encode(m, testutil::random_sketch(rng, 9));
    for (const auto& f : feats)
        for (double v : f) CHECK(v == 0.0);
}

TEST_CASE("features after a removal differ from slicing the old features") {
    AgentModel m = tiny_agent(6, 4, 0, 3);
    auto rng = make_rng(102, 0);
    VectorSketch s = testutil::random_sketch(rng, 15, 0.0);  // segments [5, 5, 5]
    SegmentTable table = build_segment_table(s);
    REQUIRE(table.segment_count() == 3);
    auto before = encode(m, s);
    VectorSketch cut = remove_segment(s, table, 1);
    auto after = encode(m, cut);
    REQUIRE(after.size() == 10);
    // The kept tail points see a different left context, so at least one
    // feature must change relative to the stale slice.
    double max_diff = 0.0;
    for (int i = 0; i < 5; ++i)
        for (int k = 0; k < 12; ++k)
            max_diff = std::max(max_diff, std::abs(after[static_cast<std::size_t>(5 + i)][static_cast<std::size_t>(k)] -
                                                   before[static_cast<std::size_t>(10 + i)][static_cast<std::size_t>(k)]));
    CHECK(max_diff > 1e-9);
}

TEST_CASE("the encoder matches its tape twin") {
    AgentModel m = tiny_agent(5, 4, 0, 7);
    auto rng = make_rng(103, 0);
    VectorSketch s = testutil::random_sketch(rng, 11);
    auto feats = encode(m, s);
    Tape t(m.params);
    auto tape_feats = tape_encode(t, m, s);
    REQUIRE(tape_feats.size() == feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i)
        for (int k = 0; k < 10; ++k) REQUIRE(feats[i][static_cast<std::size_t>(k)] == t.val(tape_feats[i])[k]);
}

TEST_CASE("the policy matches its tape twin") {
    AgentModel m = tiny_agent(4, 5, 1, 9);
    auto rng = make_rng(104, 0);
    VectorSketch s = testutil::random_sketch(rng, 13);
    SegmentTable table = build_segment_table(s);
    auto feats = encode(m, s);
    Tape t(m.params);
    auto tape_feats = tape_encode(t, m, s);
    for (int cursor = 0; cursor < table.segment_count(); ++cursor) {
        ActionDistribution phi = policy(m, feats, table, cursor);
        Var probs = tape_policy(t, m, tape_feats, table, cursor);
        REQUIRE(std::abs(phi.p_skip - t.val(probs)[0]) <= 1e-15);
        REQUIRE(std::abs(phi.p_keep - t.val(probs)[1]) <= 1e-15);
    }
}

TEST_CASE("a zero mlp head is indifferent") {
    AgentModel m = tiny_agent();
    m.params.value("mlp1.W").fill(0.0);
    m.params.value("mlp1.b").fill(0.0);
    m.params.value("mlp2.W").fill(0.0);
    m.params.value("mlp2.b").fill(0.0);
    auto rng = make_rng(105, 0);
    VectorSketch s = testutil::random_sketch(rng, 10);
    SegmentTable table = build_segment_table(s);
    auto feats = encode(m, s);
    ActionDistribution phi = policy(m, feats, table, 0);
    CHECK(phi.p_skip == Catch::Approx(0.5).margin(1e-12));
    CHECK(phi.p_keep == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("the policy window clips at both sketch ends without failing") {
    AgentModel m = tiny_agent(4, 4, 2, 5);
    CHECK(agent_mlp_input_width(m.cfg) == 5 * 5 * 8);
    auto rng = make_rng(106, 0);
    VectorSketch s = testutil::random_sketch(rng, 22);
    SegmentTable table = build_segment_table(s);
    auto feats = encode(m, s);
    for (int cursor : {0, table.segment_count() - 1}) {
        ActionDistribution phi = policy(m, feats, table, cursor);
        CHECK(phi.p_skip + phi.p_keep == Catch::Approx(1.0).margin(1e-9));
    }
    CHECK_THROWS(policy(m, feats, table, table.segment_count()));
    CHECK_THROWS(policy(m, feats, table, -1));
}

TEST_CASE("shift follows the worked examples") {
    ActionDistribution even{0.5, 0.5};
    ActionDistribution s1 = shift(even, 0.1);
    CHECK(s1.p_skip == Catch::Approx(0.6).margin(1e-12));
    CHECK(s1.p_keep == Catch::Approx(0.4).margin(1e-12));

    ActionDistribution skewed{0.95, 0.05};
    ActionDistribution s2 = shift(skewed, 0.1);
    CHECK(s2.p_skip == Catch::Approx(1.0).margin(1e-12));
    CHECK(s2.p_keep == Catch::Approx(0.0).margin(1e-12));

    ActionDistribution id = shift(skewed, 0.0);
    CHECK(id.p_skip == skewed.p_skip);
    CHECK(id.p_keep == skewed.p_keep);

    CHECK_THROWS(shift(even, 1.5));
    CHECK_THROWS(shift(even, -1.5));
}

TEST_CASE("shift always returns a valid distribution and biases monotonically") {
    auto rng = make_rng(107, 0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        double ps = u(rng);
        ActionDistribution phi{ps, 1.0 - ps};
        double prev = -1.0;
        for (double delta : {-1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0}) {
            ActionDistribution out = shift(phi, delta);
            REQUIRE(out.p_skip >= 0.0);
            REQUIRE(out.p_keep >= 0.0);
            REQUIRE(out.p_skip + out.p_keep == Catch::Approx(1.0).margin(1e-9));
            REQUIRE(out.p_skip >= prev - 1e-12);
            prev = out.p_skip;
        }
    }
}

TEST_CASE("sampling from a deterministic distribution always skips") {
    auto rng = make_rng(108, 0);
    ActionDistribution all_skip{1.0, 0.0};
    for (int rep = 0; rep < 100; ++rep) CHECK(sample_action(all_skip, 0.0, rng).action == 0);
}

TEST_CASE("sampling matches the skip probability over many draws") {
    auto rng = make_rng(109, 0);
    ActionDistribution phi{0.7, 0.3};
    int skips = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) skips += sample_action(phi, 0.0, rng).action == 0;
    double rate = static_cast<double>(skips) / n;
    CHECK(rate == Catch::Approx(0.7).margin(0.02));
}

TEST_CASE("log probabilities come from the unshifted distribution") {
    auto rng = make_rng(110, 0);
    ActionDistribution phi{0.25, 0.75};
    for (int rep = 0; rep < 50; ++rep) {
        SampledAction sa = sample_action(phi, 0.6, rng);
        double expected = std::log(sa.action == 0 ? 0.25 : 0.75);
        REQUIRE(sa.log_prob == Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("sampling is seed deterministic") {
    ActionDistribution phi{0.5, 0.5};
    auto a = make_rng(111, 0);
    auto b = make_rng(111, 0);
    for (int i = 0; i < 20; ++i) CHECK(sample_action(phi, 0.0, a).action == sample_action(phi, 0.0, b).action);
}

TEST_CASE("delta -1 keeps everything and delta +1 skips everything") {
    AgentModel m = tiny_agent();
    auto rng = make_rng(112, 0);
    VectorSketch s = testutil::random_sketch(rng, 19);

    auto r1 = make_rng(113, 0);
    AbstractResult keep_all = abstract_sketch(m, s, -1.0, r1);
    REQUIRE(keep_all.sketch.size() == s.size());
    for (int i = 0; i < s.size(); ++i) {
        CHECK(keep_all.sketch.points[static_cast<std::size_t>(i)].dx == s.points[static_cast<std::size_t>(i)].dx);
        CHECK(keep_all.sketch.points[static_cast<std::size_t>(i)].dy == s.points[static_cast<std::size_t>(i)].dy);
    }
    for (int kept : keep_all.kept_mask) CHECK(kept == 1);

    auto r2 = make_rng(114, 0);
    AbstractResult skip_all = abstract_sketch(m, s, 1.0, r2);
    CHECK(skip_all.sketch.empty());
    for (int kept : skip_all.kept_mask) CHECK(kept == 0);
}

TEST_CASE("the kept mask replays to the returned sketch") {
    AgentModel m = tiny_agent(4, 4, 0, 21);
    auto rng = make_rng(115, 0);
    for (int rep = 0; rep < 20; ++rep) {
        VectorSketch s = testutil::random_sketch(rng, 8 + rep);
        auto arng = make_rng(116, static_cast<std::uint64_t>(rep));
        AbstractResult res = abstract_sketch(m, s, 0.0, arng);
        REQUIRE(res.kept_mask.size() == static_cast<std::size_t>(build_segment_table(s).segment_count()));
        REQUIRE(res.phis.size() == res.kept_mask.size());

        EnvState st = env_reset_mechanical(s);
        for (int a : res.kept_mask) env_advance(st, a);
        REQUIRE(st.sketch.size() == res.sketch.size());
        for (int i = 0; i < st.sketch.size(); ++i) {
            REQUIRE(st.sketch.points[static_cast<std::size_t>(i)].dx == res.sketch.points[static_cast<std::size_t>(i)].dx);
            REQUIRE(st.sketch.points[static_cast<std::size_t>(i)].dy == res.sketch.points[static_cast<std::size_t>(i)].dy);
            REQUIRE(st.sketch.points[static_cast<std::size_t>(i)].pen == res.sketch.points[static_cast<std::size_t>(i)].pen);
        }
    }
}

TEST_CASE("a zero-parameter agent scores every stroke at one half") {
    AgentModel m = tiny_agent();
    zero_params(m);
    auto rng = make_rng(117, 0);
    VectorSketch s = testutil::random_sketch(rng, 21);
    SaliencyMap sal = saliency(m, s);
    REQUIRE(sal.size() == static_cast<std::size_t>(stroke_count(s)));
    for (double v : sal) CHECK(v == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("saliency of a single-segment stroke is its keep probability") {
    AgentModel m = tiny_agent(4, 4, 0, 31);
    VectorSketch s;
    // Stroke 0: 3 points; stroke 1: 7 points (two segments).
    for (int i = 0; i < 3; ++i) s.points.push_back({0.1 * i, 0.2, i == 2 ? 1 : 0});
    for (int i = 0; i < 7; ++i) s.points.push_back({0.3, 0.1 * i, i == 6 ? 1 : 0});
    SegmentTable table = build_segment_table(s);
    REQUIRE(table.segment_count() == 3);
    auto feats = encode(m, s);
    SaliencyMap sal = saliency(m, s);
    REQUIRE(sal.size() == 2);
    CHECK(sal[0] == Catch::Approx(policy(m, feats, table, 0).p_keep).margin(1e-12));
    double mean = 0.5 * (policy(m, feats, table, 1).p_keep + policy(m, feats, table, 2).p_keep);
    CHECK(sal[1] == Catch::Approx(mean).margin(1e-12));
    for (double v : sal) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("agent checkpoints round-trip") {
    testutil::TempDir dir;
    AgentModel m = tiny_agent(5, 6, 1, 41);
    save_agent(dir.file("agent.ckpt"), m);
    AgentModel back = load_agent(dir.file("agent.ckpt"));
    CHECK(back.cfg.hidden == 5);
    CHECK(back.cfg.mlp_hidden == 6);
    CHECK(back.cfg.window_radius == 1);
    REQUIRE(testutil::params_equal(back.params, m.params));
    auto rng = make_rng(118, 0);
    VectorSketch s = testutil::random_sketch(rng, 12);
    auto f1 = encode(m, s);
    auto f2 = encode(back, s);
    CHECK(f1 == f2);
}
