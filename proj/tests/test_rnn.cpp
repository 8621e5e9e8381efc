#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "sketchlab/common.hpp"
#include "sketchlab/rnn.hpp"

using namespace sketchlab;

namespace {

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-loop GRU step reading the tensors directly.
std::vector<double> gru_oracle(const ParamStore& ps, const std::string& prefix, const std::vector<double>& x, const std::vector<double>& h) {
    const Tensor& Wz = ps.value(prefix + "Wz");
    const int H = Wz.shape[0], I = Wz.shape[1];
    auto gate = [&](const char* g) {
        const Tensor& W = ps.value(prefix + "W" + g);
        const Tensor& U = ps.value(prefix + "U" + g);
        const Tensor& b = ps.value(prefix + "b" + g);
        std::vector<double> pre(static_cast<std::size_t>(H), 0.0);
        for (int i = 0; i < H; ++i) {
            double acc = b[i];
            for (int j = 0; j < I; ++j) acc += W.at(i, j) * x[static_cast<std::size_t>(j)];
            for (int j = 0; j < H; ++j) acc += U.at(i, j) * h[static_cast<std::size_t>(j)];
            pre[static_cast<std::size_t>(i)] = acc;
        }
        return pre;
    };
    auto z = gate("z");
    auto r = gate("r");
    for (auto& v : z) v = sigmoid_ref(v);
    for (auto& v : r) v = sigmoid_ref(v);
    const Tensor& Wh = ps.value(prefix + "Wh");
    const Tensor& Uh = ps.value(prefix + "Uh");
    const Tensor& bh = ps.value(prefix + "bh");
    std::vector<double> out(static_cast<std::size_t>(H), 0.0);
    for (int i = 0; i < H; ++i) {
        double acc = bh[i];
        for (int j = 0; j < I; ++j) acc += Wh.at(i, j) * x[static_cast<std::size_t>(j)];
        for (int j = 0; j < H; ++j) acc += Uh.at(i, j) * r[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(j)];
        double hc = std::tanh(acc);
        out[static_cast<std::size_t>(i)] = (1.0 - z[static_cast<std::size_t>(i)]) * h[static_cast<std::size_t>(i)] + z[static_cast<std::size_t>(i)] * hc;
    }
    return out;
}

// Scalar-loop LSTM step.
void lstm_oracle(const ParamStore& ps, const std::string& prefix, const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c) {
    const Tensor& Wi = ps.value(prefix + "Wi");
    const int H = Wi.shape[0], I = Wi.shape[1];
    auto gate = [&](const char* g, bool use_tanh) {
        const Tensor& W = ps.value(prefix + "W" + g);
        const Tensor& U = ps.value(prefix + "U" + g);
        const Tensor& b = ps.value(prefix + "b" + g);
        std::vector<double> out(static_cast<std::size_t>(H), 0.0);
        for (int i = 0; i < H; ++i) {
            double acc = b[i];
            for (int j = 0; j < I; ++j) acc += W.at(i, j) * x[static_cast<std::size_t>(j)];
            for (int j = 0; j < H; ++j) acc += U.at(i, j) * h[static_cast<std::size_t>(j)];
            out[static_cast<std::size_t>(i)] = use_tanh ? std::tanh(acc) : sigmoid_ref(acc);
        }
        return out;
    };
    auto i = gate("i", false);
    auto f = gate("f", false);
    auto o = gate("o", false);
    auto g = gate("g", true);
    for (int k = 0; k < H; ++k) {
        c[static_cast<std::size_t>(k)] = f[static_cast<std::size_t>(k)] * c[static_cast<std::size_t>(k)] + i[static_cast<std::size_t>(k)] * g[static_cast<std::size_t>(k)];
        h[static_cast<std::size_t>(k)] = o[static_cast<std::size_t>(k)] * std::tanh(c[static_cast<std::size_t>(k)]);
    }
}

void zero_params(ParamStore& ps) {
    for (int id = 0; id < ps.count(); ++id) ps.value(id).fill(0.0);
}

std::vector<std::vector<double>> random_rows(std::mt19937_64& rng, int n, int dim) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(dim)));
    for (auto& r : rows)
        for (auto& v : r) v = d(rng);
    return rows;
}

}  // namespace

TEST_CASE("gru cell with zero parameters halves its state") {
    auto rng = make_rng(50, 0);
    ParamStore ps;
    init_gru(ps, "g.", 3, 4, rng);
    zero_params(ps);
    Tape t(ps);
    Var h0 = t.constant(Tensor::vec({1.0, -2.0, 0.5, 4.0}));
    Var h1 = gru_cell(t, "g.", t.constant(Tensor::vec({9.0, 9.0, 9.0})), h0);
    CHECK(t.val(h1)[0] == Catch::Approx(0.5).margin(1e-12));
    CHECK(t.val(h1)[1] == Catch::Approx(-1.0).margin(1e-12));
    CHECK(t.val(h1)[2] == Catch::Approx(0.25).margin(1e-12));
    CHECK(t.val(h1)[3] == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("gru cell from zero state with zero parameters stays at zero") {
    auto rng = make_rng(51, 0);
    ParamStore ps;
    init_gru(ps, "g.", 3, 4, rng);
    zero_params(ps);
    Tape t(ps);
    Var h1 = gru_cell(t, "g.", t.constant(Tensor::vec({1.0, 2.0, 3.0})), t.zeros({4}));
    for (int i = 0; i < 4; ++i) CHECK(t.val(h1)[i] == 0.0);
}

TEST_CASE("gru cell matches the scalar oracle") {
    auto rng = make_rng(52, 0);
    ParamStore ps;
    init_gru(ps, "g.", 3, 5, rng);
    std::normal_distribution<double> d(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> x(3), h(5);
        for (auto& v : x) v = d(rng);
        for (auto& v : h) v = d(rng);
        Tape t(ps);
        Var out = gru_cell(t, "g.", t.constant(Tensor::vec(x)), t.constant(Tensor::vec(h)));
        auto want = gru_oracle(ps, "g.", x, h);
        for (int i = 0; i < 5; ++i) REQUIRE(std::abs(t.val(out)[i] - want[static_cast<std::size_t>(i)]) <= 1e-12);
    }
}

TEST_CASE("plain gru_step reproduces the tape cell bitwise") {
    auto rng = make_rng(53, 0);
    ParamStore ps;
    init_gru(ps, "g.", 3, 6, rng);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> x(3), h(6);
    for (auto& v : x) v = d(rng);
    for (auto& v : h) v = d(rng);

    Tape t(ps);
    Var out = gru_cell(t, "g.", t.constant(Tensor::vec(x)), t.constant(Tensor::vec(h)));

    plain::GruRef ref(ps, "g.");
    plain::GruScratch scratch;
    scratch.resize(6);
    std::vector<double> hp = h;
    plain::gru_step(ref, x.data(), hp, scratch);
    for (int i = 0; i < 6; ++i) REQUIRE(hp[static_cast<std::size_t>(i)] == t.val(out)[i]);
}

TEST_CASE("bidirectional gru with tied weights mirrors under sequence reversal") {
    auto seeded = make_rng(54, 0);
    ParamStore ps;
    init_gru(ps, "fwd.", 3, 4, seeded);
    auto seeded2 = make_rng(54, 0);
    init_gru(ps, "bwd.", 3, 4, seeded2);

    auto rng = make_rng(55, 0);
    auto rows = random_rows(rng, 6, 3);
    auto run = [&](const std::vector<std::vector<double>>& seq) {
        Tape t(ps);
        std::vector<Var> xs;
        for (const auto& r : seq) xs.push_back(t.constant(Tensor::vec(r)));
        auto feats = bidirectional_gru(t, "fwd.", "bwd.", xs, 4);
        std::vector<std::vector<double>> vals;
        for (Var f : feats) vals.push_back(t.val(f).v);
        return vals;
    };
    auto fwd = run(rows);
    auto rev_rows = rows;
    std::reverse(rev_rows.begin(), rev_rows.end());
    auto rev = run(rev_rows);

    const int n = 6, H = 4;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < H; ++k) {
            // Forward half of the reversed run equals the backward half of the
            // original at the mirrored position, and vice versa.
            REQUIRE(rev[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] ==
                    Catch::Approx(fwd[static_cast<std::size_t>(n - 1 - i)][static_cast<std::size_t>(H + k)]).margin(1e-12));
            REQUIRE(rev[static_cast<std::size_t>(i)][static_cast<std::size_t>(H + k)] ==
                    Catch::Approx(fwd[static_cast<std::size_t>(n - 1 - i)][static_cast<std::size_t>(k)]).margin(1e-12));
        }
}

TEST_CASE("bidirectional gru rejects an empty sequence") {
    auto rng = make_rng(56, 0);
    ParamStore ps;
    init_gru(ps, "fwd.", 3, 4, rng);
    init_gru(ps, "bwd.", 3, 4, rng);
    Tape t(ps);
    CHECK_THROWS(bidirectional_gru(t, "fwd.", "bwd.", {}, 4));
}

TEST_CASE("lstm cell with zero parameters halves the cell state") {
    auto rng = make_rng(57, 0);
    ParamStore ps;
    init_lstm(ps, "l.", 3, 3, rng);
    zero_params(ps);
    Tape t(ps);
    LstmState s{t.constant(Tensor::vec({0.2, -0.4, 1.0})), t.constant(Tensor::vec({1.0, -2.0, 0.5}))};
    LstmState out = lstm_cell(t, "l.", t.constant(Tensor::vec({7.0, 7.0, 7.0})), s);
    for (int i = 0; i < 3; ++i) {
        double c = t.val(s.c)[i];
        CHECK(t.val(out.c)[i] == Catch::Approx(0.5 * c).margin(1e-12));
        CHECK(t.val(out.h)[i] == Catch::Approx(0.5 * std::tanh(0.5 * c)).margin(1e-12));
    }
}

TEST_CASE("lstm cell matches the scalar oracle") {
    auto rng = make_rng(58, 0);
    ParamStore ps;
    init_lstm(ps, "l.", 4, 5, rng);
    std::normal_distribution<double> d(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> x(4), h(5), c(5);
        for (auto& v : x) v = d(rng);
        for (auto& v : h) v = d(rng);
        for (auto& v : c) v = d(rng);
        Tape t(ps);
        LstmState out = lstm_cell(t, "l.", t.constant(Tensor::vec(x)), {t.constant(Tensor::vec(h)), t.constant(Tensor::vec(c))});
        std::vector<double> ho = h, co = c;
        lstm_oracle(ps, "l.", x, ho, co);
        for (int i = 0; i < 5; ++i) {
            REQUIRE(std::abs(t.val(out.h)[i] - ho[static_cast<std::size_t>(i)]) <= 1e-12);
            REQUIRE(std::abs(t.val(out.c)[i] - co[static_cast<std::size_t>(i)]) <= 1e-12);
        }
    }
}

TEST_CASE("plain lstm_step reproduces the tape cell bitwise") {
    auto rng = make_rng(59, 0);
    ParamStore ps;
    init_lstm(ps, "l.", 3, 5, rng);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> x(3), h(5), c(5);
    for (auto& v : x) v = d(rng);
    for (auto& v : h) v = d(rng);
    for (auto& v : c) v = d(rng);

    Tape t(ps);
    LstmState out = lstm_cell(t, "l.", t.constant(Tensor::vec(x)), {t.constant(Tensor::vec(h)), t.constant(Tensor::vec(c))});
    plain::LstmRef ref(ps, "l.");
    plain::LstmScratch scratch;
    scratch.resize(5);
    plain::lstm_step(ref, x.data(), h, c, scratch);
    for (int i = 0; i < 5; ++i) {
        REQUIRE(h[static_cast<std::size_t>(i)] == t.val(out.h)[i]);
        REQUIRE(c[static_cast<std::size_t>(i)] == t.val(out.c)[i]);
    }
}

TEST_CASE("stacked lstm equals manual layer-by-layer composition") {
    auto rng = make_rng(60, 0);
    ParamStore ps;
    init_lstm(ps, "s0.", 3, 4, rng);
    init_lstm(ps, "s1.", 4, 4, rng);
    auto rng2 = make_rng(61, 0);
    auto rows = random_rows(rng2, 5, 3);

    Tape t(ps);
    std::vector<Var> xs;
    for (const auto& r : rows) xs.push_back(t.constant(Tensor::vec(r)));
    Var stacked = stacked_lstm(t, "s", 2, xs, 4);

    LstmState s0{t.zeros({4}), t.zeros({4})};
    std::vector<Var> mid;
    for (Var x : xs) {
        s0 = lstm_cell(t, "s0.", x, s0);
        mid.push_back(s0.h);
    }
    LstmState s1{t.zeros({4}), t.zeros({4})};
    for (Var x : mid) s1 = lstm_cell(t, "s1.", x, s1);

    for (int i = 0; i < 4; ++i) REQUIRE(t.val(stacked)[i] == t.val(s1.h)[i]);
}

TEST_CASE("gru sequence gradients pass a finite-difference check") {
    auto rng = make_rng(62, 0);
    ParamStore ps;
    init_gru(ps, "g.", 3, 4, rng);
    auto rng2 = make_rng(63, 0);
    auto rows = random_rows(rng2, 6, 3);

    auto build = [&](Tape& t) {
        Var h = t.zeros({4});
        for (const auto& r : rows) h = gru_cell(t, "g.", t.constant(Tensor::vec(r)), h);
        return t.sum(t.tanh(h));
    };
    auto forward = [&]() {
        Tape t(ps);
        return t.val(build(t))[0];
    };
    ps.zero_grads();
    {
        Tape t(ps);
        t.backward(build(t));
    }
    double err = testutil::max_gradient_error(ps, forward);
    INFO("max relative gradient error " << err);
    CHECK(err <= 1e-4);
}

TEST_CASE("bidirectional gru gradients pass a finite-difference check") {
    auto rng = make_rng(64, 0);
    ParamStore ps;
    init_gru(ps, "fwd.", 3, 3, rng);
    init_gru(ps, "bwd.", 3, 3, rng);
    auto rng2 = make_rng(65, 0);
    auto rows = random_rows(rng2, 5, 3);

    auto build = [&](Tape& t) {
        std::vector<Var> xs;
        for (const auto& r : rows) xs.push_back(t.constant(Tensor::vec(r)));
        auto feats = bidirectional_gru(t, "fwd.", "bwd.", xs, 3);
        Var loss = t.sum(feats[0]);
        for (std::size_t i = 1; i < feats.size(); ++i) loss = t.add(loss, t.sum(t.tanh(feats[i])));
        return loss;
    };
    auto forward = [&]() {
        Tape t(ps);
        return t.val(build(t))[0];
    };
    ps.zero_grads();
    {
        Tape t(ps);
        t.backward(build(t));
    }
    double err = testutil::max_gradient_error(ps, forward);
    INFO("max relative gradient error " << err);
    CHECK(err <= 1e-4);
}

TEST_CASE("three-layer lstm gradients pass a finite-difference check") {
    auto rng = make_rng(66, 0);
    ParamStore ps;
    init_lstm(ps, "s0.", 3, 3, rng);
    init_lstm(ps, "s1.", 3, 3, rng);
    init_lstm(ps, "s2.", 3, 3, rng);
    auto rng2 = make_rng(67, 0);
    auto rows = random_rows(rng2, 6, 3);

    auto build = [&](Tape& t) {
        std::vector<Var> xs;
        for (const auto& r : rows) xs.push_back(t.constant(Tensor::vec(r)));
        return t.sum(stacked_lstm(t, "s", 3, xs, 3));
    };
    auto forward = [&]() {
        Tape t(ps);
        return t.val(build(t))[0];
    };
    ps.zero_grads();
    {
        Tape t(ps);
        t.backward(build(t));
    }
    double err = testutil::max_gradient_error(ps, forward);
    INFO("max relative gradient error " << err);
    CHECK(err <= 1e-4);
}
