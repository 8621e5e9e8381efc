#pragma once

#include <string>
#include <vector>

#include "sketchlab/autodiff.hpp"

namespace sketchlab {

// Parameter naming: a cell with prefix "fwd." owns "fwd.Wz", "fwd.Uz", ...
// W* act on the input, U* on the recurrent state, b* are biases.

inline void init_linear(ParamStore& ps, const std::string& prefix, int in, int out, std::mt19937_64& rng) {
    ps.add(prefix + "W", uniform_init({out, in}, in, rng));
    ps.add(prefix + "b", Tensor({out}));
}

inline void init_gru(ParamStore& ps, const std::string& prefix, int in, int hidden, std::mt19937_64& rng) {
    for (const char* gate : {"z", "r", "h"}) {
        ps.add(prefix + "W" + gate, uniform_init({hidden, in}, in, rng));
        ps.add(prefix + "U" + gate, uniform_init({hidden, hidden}, hidden, rng));
        ps.add(prefix + "b" + gate, Tensor({hidden}));
    }
}

inline void init_lstm(ParamStore& ps, const std::string& prefix, int in, int hidden, std::mt19937_64& rng) {
    for (const char* gate : {"i", "f", "o", "g"}) {
        ps.add(prefix + "W" + gate, uniform_init({hidden, in}, in, rng));
        ps.add(prefix + "U" + gate, uniform_init({hidden, hidden}, hidden, rng));
        Tensor b({hidden});
        // Forget bias starts at 1 so cell memory survives long sequences.
        if (gate[0] == 'f') b.fill(1.0);
        ps.add(prefix + "b" + gate, b);
    }
}

// ---------------------------------------------------------------------------
// Tape builders (training path)
// ---------------------------------------------------------------------------

inline Var linear(Tape& t, const std::string& prefix, Var x) {
    return t.add(t.matvec(t.param(prefix + "W"), x), t.param(prefix + "b"));
}

namespace detail {
inline Var gate_preact(Tape& t, const std::string& prefix, const std::string& gate, Var x, Var h) {
    Var wx = t.matvec(t.param(prefix + "W" + gate), x);
    Var uh = t.matvec(t.param(prefix + "U" + gate), h);
    return t.add(t.add(wx, uh), t.param(prefix + "b" + gate));
}
}  // namespace detail

// z = sig(Wz x + Uz h + bz); r = sig(Wr x + Ur h + br);
// hc = tanh(Wh x + Uh (r.h) + bh); h' = (1-z).h + z.hc
inline Var gru_cell(Tape& t, const std::string& prefix, Var x, Var h) {
    Var z = t.sigmoid(detail::gate_preact(t, prefix, "z", x, h));
    Var r = t.sigmoid(detail::gate_preact(t, prefix, "r", x, h));
    Var rh = t.mul(r, h);
    Var hx = t.matvec(t.param(prefix + "Wh"), x);
    Var hu = t.matvec(t.param(prefix + "Uh"), rh);
    Var hc = t.tanh(t.add(t.add(hx, hu), t.param(prefix + "bh")));
    return t.add(t.mul(t.affine(z, -1.0, 1.0), h), t.mul(z, hc));
}

// Per-step features of a bidirectional GRU: concat(forward state at t,
// backward state at t). Both directions start from zero state.
inline std::vector<Var> bidirectional_gru(Tape& t, const std::string& fwd_prefix, const std::string& bwd_prefix, const std::vector<Var>& xs, int hidden) {
    if (xs.empty()) throw std::invalid_argument("bidirectional_gru: empty sequence");
    const int n = static_cast<int>(xs.size());
    std::vector<Var> fwd(static_cast<std::size_t>(n)), bwd(static_cast<std::size_t>(n));
    Var h = t.zeros({hidden});
    for (int i = 0; i < n; ++i) {
        h = gru_cell(t, fwd_prefix, xs[static_cast<std::size_t>(i)], h);
        fwd[static_cast<std::size_t>(i)] = h;
    }
    h = t.zeros({hidden});
    for (int i = n - 1; i >= 0; --i) {
        h = gru_cell(t, bwd_prefix, xs[static_cast<std::size_t>(i)], h);
        bwd[static_cast<std::size_t>(i)] = h;
    }
    std::vector<Var> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = t.concat(fwd[static_cast<std::size_t>(i)], bwd[static_cast<std::size_t>(i)]);
    return out;
}

struct LstmState {
    Var h;
    Var c;
};

// i,f,o = sig(...); g = tanh(...); c' = f.c + i.g; h' = o.tanh(c')
inline LstmState lstm_cell(Tape& t, const std::string& prefix, Var x, LstmState s) {
    Var i = t.sigmoid(detail::gate_preact(t, prefix, "i", x, s.h));
    Var f = t.sigmoid(detail::gate_preact(t, prefix, "f", x, s.h));
    Var o = t.sigmoid(detail::gate_preact(t, prefix, "o", x, s.h));
    Var g = t.tanh(detail::gate_preact(t, prefix, "g", x, s.h));
    Var c = t.add(t.mul(f, s.c), t.mul(i, g));
    Var h = t.mul(o, t.tanh(c));
    return {h, c};
}

// Feeds layer k's per-step outputs to layer k+1; returns the last layer's
// final hidden state. Prefixes are base + "0.", base + "1.", ...
inline Var stacked_lstm(Tape& t, const std::string& base, int layers, const std::vector<Var>& xs, int hidden) {
    if (xs.empty()) throw std::invalid_argument("stacked_lstm: empty sequence");
    std::vector<Var> seq = xs;
    Var last;
    for (int layer = 0; layer < layers; ++layer) {
        const std::string prefix = base + std::to_string(layer) + ".";
        LstmState s{t.zeros({hidden}), t.zeros({hidden})};
        std::vector<Var> next(seq.size());
        for (std::size_t i = 0; i < seq.size(); ++i) {
            s = lstm_cell(t, prefix, seq[i], s);
            next[i] = s.h;
        }
        seq = std::move(next);
        last = s.h;
    }
    return last;
}

// ---------------------------------------------------------------------------
// Plain forward path (inference). Mirrors the tape builders operation by
// operation so both paths produce identical values.
// ---------------------------------------------------------------------------

namespace plain {

struct GruRef {
    const Tensor *Wz, *Uz, *bz, *Wr, *Ur, *br, *Wh, *Uh, *bh;
    int hidden;

    GruRef(const ParamStore& ps, const std::string& prefix)
        : Wz(&ps.value(prefix + "Wz")), Uz(&ps.value(prefix + "Uz")), bz(&ps.value(prefix + "bz")),
          Wr(&ps.value(prefix + "Wr")), Ur(&ps.value(prefix + "Ur")), br(&ps.value(prefix + "br")),
          Wh(&ps.value(prefix + "Wh")), Uh(&ps.value(prefix + "Uh")), bh(&ps.value(prefix + "bh")),
          hidden(ps.value(prefix + "bz").size()) {}
};

struct LstmRef {
    const Tensor *Wi, *Ui, *bi, *Wf, *Uf, *bf, *Wo, *Uo, *bo, *Wg, *Ug, *bg;
    int hidden;

    LstmRef(const ParamStore& ps, const std::string& prefix)
        : Wi(&ps.value(prefix + "Wi")), Ui(&ps.value(prefix + "Ui")), bi(&ps.value(prefix + "bi")),
          Wf(&ps.value(prefix + "Wf")), Uf(&ps.value(prefix + "Uf")), bf(&ps.value(prefix + "bf")),
          Wo(&ps.value(prefix + "Wo")), Uo(&ps.value(prefix + "Uo")), bo(&ps.value(prefix + "bo")),
          Wg(&ps.value(prefix + "Wg")), Ug(&ps.value(prefix + "Ug")), bg(&ps.value(prefix + "bg")),
          hidden(ps.value(prefix + "bi").size()) {}
};

struct LinearRef {
    const Tensor *W, *b;

    LinearRef(const ParamStore& ps, const std::string& prefix)
        : W(&ps.value(prefix + "W")), b(&ps.value(prefix + "b")) {}

    void apply(const double* x, double* y) const {
        kernel::matvec(*W, x, y);
        for (int i = 0; i < b->size(); ++i) y[i] += (*b)[i];
    }
};

struct GruScratch {
    std::vector<double> zx, zh, rx, rh2, z, r, rh, hx, hu, hc;
    void resize(int h) {
        for (auto* v : {&zx, &zh, &rx, &rh2, &z, &r, &rh, &hx, &hu, &hc}) v->assign(static_cast<std::size_t>(h), 0.0);
    }
};

inline void gru_step(const GruRef& p, const double* x, std::vector<double>& h, GruScratch& s) {
    const int H = p.hidden;
    kernel::matvec(*p.Wz, x, s.zx.data());
    kernel::matvec(*p.Uz, h.data(), s.zh.data());
    for (int i = 0; i < H; ++i) s.z[i] = kernel::sigmoid((s.zx[i] + s.zh[i]) + (*p.bz)[i]);
    kernel::matvec(*p.Wr, x, s.rx.data());
    kernel::matvec(*p.Ur, h.data(), s.rh2.data());
    for (int i = 0; i < H; ++i) s.r[i] = kernel::sigmoid((s.rx[i] + s.rh2[i]) + (*p.br)[i]);
    for (int i = 0; i < H; ++i) s.rh[i] = s.r[i] * h[i];
    kernel::matvec(*p.Wh, x, s.hx.data());
    kernel::matvec(*p.Uh, s.rh.data(), s.hu.data());
    for (int i = 0; i < H; ++i) s.hc[i] = std::tanh((s.hx[i] + s.hu[i]) + (*p.bh)[i]);
    for (int i = 0; i < H; ++i) h[i] = (-1.0 * s.z[i] + 1.0) * h[i] + s.z[i] * s.hc[i];
}

struct LstmScratch {
    std::vector<double> ax, ah, i, f, o, g;
    void resize(int h) {
        for (auto* v : {&ax, &ah, &i, &f, &o, &g}) v->assign(static_cast<std::size_t>(h), 0.0);
    }
};

inline void lstm_step(const LstmRef& p, const double* x, std::vector<double>& h, std::vector<double>& c, LstmScratch& s) {
    const int H = p.hidden;
    auto gate = [&](const Tensor& W, const Tensor& U, const Tensor& b, std::vector<double>& out, bool is_tanh) {
        kernel::matvec(W, x, s.ax.data());
        kernel::matvec(U, h.data(), s.ah.data());
        for (int i = 0; i < H; ++i) {
            double pre = (s.ax[i] + s.ah[i]) + b[i];
            out[i] = is_tanh ? std::tanh(pre) : kernel::sigmoid(pre);
        }
    };
    gate(*p.Wi, *p.Ui, *p.bi, s.i, false);
    gate(*p.Wf, *p.Uf, *p.bf, s.f, false);
    gate(*p.Wo, *p.Uo, *p.bo, s.o, false);
    gate(*p.Wg, *p.Ug, *p.bg, s.g, true);
    for (int i = 0; i < H; ++i) c[i] = s.f[i] * c[i] + s.i[i] * s.g[i];
    for (int i = 0; i < H; ++i) h[i] = s.o[i] * std::tanh(c[i]);
}

}  // namespace plain

}  // namespace sketchlab
