#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sketchlab/tensor.hpp"

namespace sketchlab {

// Named parameter tensors with gradient accumulators of matching shape.
// Iteration follows insertion order so updates and checkpoints are stable.
class ParamStore {
public:
    int add(const std::string& name, Tensor init) {
        if (index_.count(name)) throw std::invalid_argument("param already exists: " + name);
        int id = static_cast<int>(values_.size());
        index_[name] = id;
        names_.push_back(name);
        grads_.emplace_back(init.shape);
        values_.push_back(std::move(init));
        return id;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }
    int id_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no such param: " + name);
        return it->second;
    }

    int count() const { return static_cast<int>(values_.size()); }
    const std::string& name(int id) const { return names_[static_cast<std::size_t>(id)]; }
    Tensor& value(int id) { return values_[static_cast<std::size_t>(id)]; }
    const Tensor& value(int id) const { return values_[static_cast<std::size_t>(id)]; }
    Tensor& grad(int id) { return grads_[static_cast<std::size_t>(id)]; }
    const Tensor& grad(int id) const { return grads_[static_cast<std::size_t>(id)]; }
    Tensor& value(const std::string& name) { return value(id_of(name)); }
    const Tensor& value(const std::string& name) const { return value(id_of(name)); }
    Tensor& grad(const std::string& name) { return grad(id_of(name)); }

    void zero_grads() {
        for (auto& g : grads_) g.fill(0.0);
    }

    long long scalar_count() const {
        long long n = 0;
        for (const auto& t : values_) n += t.size();
        return n;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    std::vector<Tensor> values_;
    std::vector<Tensor> grads_;
};

// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; biases start at zero.
inline Tensor uniform_init(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    double s = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
    std::uniform_real_distribution<double> dist(-s, s);
    for (auto& x : t.v) x = dist(rng);
    return t;
}

// Handle to a node on a Tape.
struct Var {
    int node = -1;
    bool valid() const { return node >= 0; }
};

// Reverse-mode tape. Ops append nodes that hold forward values; backward()
// walks the nodes in reverse creation order, which is a valid reverse
// topological order because ops only consume earlier nodes.
class Tape {
public:
    explicit Tape(ParamStore& params) : params_(&params) {}

    const Tensor& val(Var x) const { return nodes_[static_cast<std::size_t>(x.node)].val; }
    Tensor& grad(Var x) { return nodes_[static_cast<std::size_t>(x.node)].grad; }
    std::size_t node_count() const { return nodes_.size(); }

    Var constant(Tensor t) {
        return push(std::move(t), {}, nullptr);
    }

    Var zeros(std::vector<int> shape) { return constant(Tensor(std::move(shape))); }

    // Leaf bound to a named parameter; memoized so each parameter appears
    // once per tape and repeated uses accumulate into one gradient.
    Var param(const std::string& name) {
        auto it = param_vars_.find(name);
        if (it != param_vars_.end()) return it->second;
        int pid = params_->id_of(name);
        Var v = push(params_->value(pid), {}, nullptr);
        nodes_[static_cast<std::size_t>(v.node)].param_id = pid;
        param_vars_[name] = v;
        return v;
    }

    Var matvec(Var w, Var x) {
        const Tensor& W = val(w);
        const Tensor& X = val(x);
        if (W.shape.size() != 2 || X.shape.size() != 1 || W.shape[1] != X.shape[0]) throw std::invalid_argument("matvec: shapes " + shape_str(W) + " * " + shape_str(X));
        Tensor out({W.shape[0]});
        kernel::matvec(W, X.v.data(), out.v.data());
        return push(std::move(out), {w, x}, [](Tape& t, const Node& n) {
            Node& wn = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            Node& xn = t.nodes_[static_cast<std::size_t>(n.parents[1])];
            kernel::add_outer(wn.grad.v.data(), n.grad.v.data(), wn.val.shape[0], xn.val.v.data(), wn.val.shape[1]);
            kernel::matvec_add_wt(wn.val, n.grad.v.data(), xn.grad.v.data());
        });
    }

    Var matmul(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (A.shape.size() != 2 || B.shape.size() != 2 || A.shape[1] != B.shape[0]) throw std::invalid_argument("matmul: shapes " + shape_str(A) + " * " + shape_str(B));
        const int m = A.shape[0], k = A.shape[1], n = B.shape[1];
        Tensor out({m, n});
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                const double aip = A.at(i, p);
                for (int j = 0; j < n; ++j) out.at(i, j) += aip * B.at(p, j);
            }
        return push(std::move(out), {a, b}, [m, k, n](Tape& t, const Node& nd) {
            Node& an = t.nodes_[static_cast<std::size_t>(nd.parents[0])];
            Node& bn = t.nodes_[static_cast<std::size_t>(nd.parents[1])];
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = nd.grad.at(i, j);
                    for (int p = 0; p < k; ++p) {
                        an.grad.at(i, p) += g * bn.val.at(p, j);
                        bn.grad.at(p, j) += g * an.val.at(i, p);
                    }
                }
        });
    }

    Var add(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (!A.same_shape(B)) throw std::invalid_argument("add: shapes " + shape_str(A) + " vs " + shape_str(B));
        Tensor out = A;
        for (int i = 0; i < out.size(); ++i) out[i] += B[i];
        return push(std::move(out), {a, b}, [](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            Node& bn = t.nodes_[static_cast<std::size_t>(n.parents[1])];
            for (int i = 0; i < n.grad.size(); ++i) {
                an.grad[i] += n.grad[i];
                bn.grad[i] += n.grad[i];
            }
        });
    }

    Var sub(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (!A.same_shape(B)) throw std::invalid_argument("sub: shapes " + shape_str(A) + " vs " + shape_str(B));
        Tensor out = A;
        for (int i = 0; i < out.size(); ++i) out[i] -= B[i];
        return push(std::move(out), {a, b}, [](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            Node& bn = t.nodes_[static_cast<std::size_t>(n.parents[1])];
            for (int i = 0; i < n.grad.size(); ++i) {
                an.grad[i] += n.grad[i];
                bn.grad[i] -= n.grad[i];
            }
        });
    }

    Var mul(Var a, Var b) {
        const Tensor& A = val(a);
        const Tensor& B = val(b);
        if (!A.same_shape(B)) throw std::invalid_argument("mul: shapes " + shape_str(A) + " vs " + shape_str(B));
        Tensor out = A;
        for (int i = 0; i < out.size(); ++i) out[i] *= B[i];
        return push(std::move(out), {a, b}, [](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            Node& bn = t.nodes_[static_cast<std::size_t>(n.parents[1])];
            for (int i = 0; i < n.grad.size(); ++i) {
                an.grad[i] += n.grad[i] * bn.val[i];
                bn.grad[i] += n.grad[i] * an.val[i];
            }
        });
    }

    Var scale(Var a, double c) {
        Tensor out = val(a);
        for (auto& x : out.v) x *= c;
        return push(std::move(out), {a}, [c](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            for (int i = 0; i < n.grad.size(); ++i) an.grad[i] += c * n.grad[i];
        });
    }

    // k * a + c, elementwise.
    Var affine(Var a, double k, double c) {
        Tensor out = val(a);
        for (auto& x : out.v) x = k * x + c;
        return push(std::move(out), {a}, [k](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            for (int i = 0; i < n.grad.size(); ++i) an.grad[i] += k * n.grad[i];
        });
    }

    Var tanh(Var a) {
        Tensor out = val(a);
        for (auto& x : out.v) x = std::tanh(x);
        return push(std::move(out), {a}, [](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            for (int i = 0; i < n.grad.size(); ++i) an.grad[i] += n.grad[i] * (1.0 - n.val[i] * n.val[i]);
        });
    }

    Var sigmoid(Var a) {
        Tensor out = val(a);
        for (auto& x : out.v) x = kernel::sigmoid(x);
        return push(std::move(out), {a}, [](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            for (int i = 0; i < n.grad.size(); ++i) an.grad[i] += n.grad[i] * n.val[i] * (1.0 - n.val[i]);
        });
    }

    Var sqrt(Var a) {
        Tensor out = val(a);
        for (auto& x : out.v) x = std::sqrt(x);
        return push(std::move(out), {a}, [](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            for (int i = 0; i < n.grad.size(); ++i)
                if (n.val[i] > 0.0) an.grad[i] += n.grad[i] * 0.5 / n.val[i];
        });
    }

    Var relu(Var a) {
        Tensor out = val(a);
        for (auto& x : out.v) x = std::max(0.0, x);
        return push(std::move(out), {a}, [](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            for (int i = 0; i < n.grad.size(); ++i)
                if (an.val[i] > 0.0) an.grad[i] += n.grad[i];
        });
    }

    Var softmax(Var a) {
        const Tensor& A = val(a);
        if (A.shape.size() != 1) throw std::invalid_argument("softmax: expected vector, got " + shape_str(A));
        Tensor out({A.shape[0]});
        kernel::softmax(A.v.data(), out.v.data(), A.shape[0]);
        return push(std::move(out), {a}, [](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            double dot = 0.0;
            for (int i = 0; i < n.grad.size(); ++i) dot += n.grad[i] * n.val[i];
            for (int i = 0; i < n.grad.size(); ++i) an.grad[i] += n.val[i] * (n.grad[i] - dot);
        });
    }

    Var log(Var a) {
        Tensor out = val(a);
        for (auto& x : out.v) x = std::log(x);
        return push(std::move(out), {a}, [](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            for (int i = 0; i < n.grad.size(); ++i) an.grad[i] += n.grad[i] / an.val[i];
        });
    }

    // Concatenation of 1-d vectors, in order.
    Var concat(const std::vector<Var>& parts) {
        if (parts.empty()) throw std::invalid_argument("concat: no inputs");
        int total = 0;
        for (Var p : parts) {
            const Tensor& t = val(p);
            if (t.shape.size() != 1) throw std::invalid_argument("concat: expected vectors");
            total += t.shape[0];
        }
        Tensor out({total});
        int off = 0;
        for (Var p : parts) {
            const Tensor& t = val(p);
            std::copy(t.v.begin(), t.v.end(), out.v.begin() + off);
            off += t.size();
        }
        return push(std::move(out), parts, [](Tape& t, const Node& n) {
            int off2 = 0;
            for (int pi : n.parents) {
                Node& pn = t.nodes_[static_cast<std::size_t>(pi)];
                for (int i = 0; i < pn.grad.size(); ++i) pn.grad[i] += n.grad[off2 + i];
                off2 += pn.grad.size();
            }
        });
    }

    Var concat(Var a, Var b) { return concat(std::vector<Var>{a, b}); }

    // Selects one element as a scalar (length-1 tensor).
    Var pick(Var a, int i) {
        const Tensor& A = val(a);
        if (i < 0 || i >= A.size()) throw std::out_of_range("pick: index " + std::to_string(i));
        Tensor out({1});
        out[0] = A[i];
        return push(std::move(out), {a}, [i](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            an.grad[i] += n.grad[0];
        });
    }

    Var sum(Var a) {
        const Tensor& A = val(a);
        Tensor out({1});
        for (double x : A.v) out[0] += x;
        return push(std::move(out), {a}, [](Tape& t, const Node& n) {
            Node& an = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            for (int i = 0; i < an.grad.size(); ++i) an.grad[i] += n.grad[0];
        });
    }

    // Cross-entropy against a hard label for an input that is already a
    // probability vector: -log p[label].
    Var cross_entropy(Var probs, int label) {
        const Tensor& P = val(probs);
        if (P.shape.size() != 1) throw std::invalid_argument("cross_entropy: expected probability vector");
        if (label < 0 || label >= P.shape[0]) throw std::out_of_range("cross_entropy: label " + std::to_string(label));
        double total = 0.0;
        for (double p : P.v) total += p;
        if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("cross_entropy: input does not sum to 1");
        Tensor out({1});
        out[0] = -std::log(P[label]);
        return push(std::move(out), {probs}, [label](Tape& t, const Node& n) {
            Node& pn = t.nodes_[static_cast<std::size_t>(n.parents[0])];
            pn.grad[label] += -n.grad[0] / pn.val[label];
        });
    }

    // Accumulates d(loss)/d(param) into the ParamStore for every parameter
    // leaf on this tape. loss must be scalar.
    void backward(Var loss) {
        if (!loss.valid()) throw std::invalid_argument("backward: invalid var");
        Node& ln = nodes_[static_cast<std::size_t>(loss.node)];
        if (ln.val.size() != 1) throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(ln.val));
        for (auto& n : nodes_) {
            n.grad = Tensor(n.val.shape);
        }
        ln.grad[0] = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            Node& n = nodes_[i];
            if (n.back) n.back(*this, n);
        }
        for (auto& n : nodes_) {
            if (n.param_id >= 0) {
                Tensor& g = params_->grad(n.param_id);
                for (int i = 0; i < g.size(); ++i) g[i] += n.grad[i];
            }
        }
    }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::vector<int> parents;
        std::function<void(Tape&, const Node&)> back;
        int param_id = -1;
    };

    Var push(Tensor val, const std::vector<Var>& parents, std::function<void(Tape&, const Node&)> back) {
        Node n;
        n.val = std::move(val);
        for (Var p : parents) {
            if (!p.valid()) throw std::invalid_argument("op consumes invalid var");
            n.parents.push_back(p.node);
        }
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    ParamStore* params_;
    std::vector<Node> nodes_;
    std::unordered_map<std::string, Var> param_vars_;
};

}  // namespace sketchlab
