#pragma once

#include <cmath>
#include <vector>

#include "sketchlab/autodiff.hpp"

namespace sketchlab {

// Adam with bias correction. Moment buffers are laid out per-parameter in
// the store's insertion order.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    void ensure(const ParamStore& params) {
        if (static_cast<int>(m.size()) == params.count()) return;
        m.clear();
        v.clear();
        for (int id = 0; id < params.count(); ++id) {
            m.emplace_back(params.value(id).shape);
            v.emplace_back(params.value(id).shape);
        }
    }
};

inline void adam_step(ParamStore& params, AdamState& state, double lr) {
    state.ensure(params);
    ++state.step;
    const double b1 = state.beta1, b2 = state.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (int id = 0; id < params.count(); ++id) {
        Tensor& w = params.value(id);
        const Tensor& g = params.grad(id);
        Tensor& m = state.m[static_cast<std::size_t>(id)];
        Tensor& v = state.v[static_cast<std::size_t>(id)];
        for (int i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            double mh = m[i] / c1;
            double vh = v[i] / c2;
            w[i] -= lr * mh / (std::sqrt(vh) + state.eps);
        }
    }
}

}  // namespace sketchlab
