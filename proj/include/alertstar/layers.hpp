#pragma once
// Small reusable blocks: linear layers, learned layer-norm affine, and the
// two-layer MLP shape (Linear -> LN -> ReLU -> Dropout -> Linear) used by
// scoring heads and feed-forward branches throughout.

#include <string>
#include <utility>
#include <vector>

#include "alertstar/diff.hpp"

namespace alertstar {

// Mode flag threaded through every forward pass. Dropout fires only in
// training mode and draws from the supplied RNG.
struct ModeCtx {
    bool training = false;
    double dropout = 0.0;
    Rng* rng = nullptr;

    static ModeCtx eval() { return {}; }
    static ModeCtx train(double rate, Rng& rng) { return {true, rate, &rng}; }
};

inline Array apply_dropout(const Array& x, const ModeCtx& mode) {
    if (!mode.training || mode.dropout == 0.0) return x;
    return dropout(x, mode.dropout, true, *mode.rng);
}

using NamedParams = std::vector<std::pair<std::string, Array>>;

struct Linear {
    Array w;  // [in, out]
    Array b;  // [1, out]

    static Linear init(int64_t in, int64_t out, Rng& rng) {
        Linear l;
        l.w = Array::randn({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)), true);
        l.b = Array::zeros({1, out}, true);
        return l;
    }
    Array apply(const Array& x) const { return add(matmul(x, w), b); }
    void collect(NamedParams& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".w", w);
        out.emplace_back(prefix + ".b", b);
    }
};

// Layer norm with learned scale/shift.
struct LayerNorm {
    Array gamma;  // [1, d]
    Array beta;   // [1, d]
    double eps = 1e-5;

    static LayerNorm init(int64_t d) {
        LayerNorm n;
        n.gamma = Array::full({1, d}, 1.0, true);
        n.beta = Array::zeros({1, d}, true);
        return n;
    }
    Array apply(const Array& x) const { return add(mul(layer_norm_rows(x, eps), gamma), beta); }
    void collect(NamedParams& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".scale", gamma);
        out.emplace_back(prefix + ".shift", beta);
    }
};

// -log softmax(logits)[gold] for a [1,C] logit row.
inline Array cross_entropy(const Array& logits, int64_t gold) {
    if (logits.rows() != 1) throw std::invalid_argument("cross_entropy: expected a single logit row");
    if (gold < 0 || gold >= logits.cols())
        throw std::out_of_range("cross_entropy: gold id " + std::to_string(gold) + " outside " +
                                std::to_string(logits.cols()) + " classes");
    Array p = softmax_rows(logits);
    Array picked = lookup_row(transpose(p), gold);  // [1,1]
    return reshape(scale(elem_log(picked), -1.0), {1});
}

// Linear(in->hidden) -> LN -> ReLU -> Dropout -> Linear(hidden->out)
struct MlpBlock {
    Linear l1;
    LayerNorm norm;
    Linear l2;

    static MlpBlock init(int64_t in, int64_t hidden, int64_t out, Rng& rng) {
        MlpBlock m;
        m.l1 = Linear::init(in, hidden, rng);
        m.norm = LayerNorm::init(hidden);
        m.l2 = Linear::init(hidden, out, rng);
        return m;
    }
    Array apply(const Array& x, const ModeCtx& mode) const {
        return l2.apply(apply_dropout(relu(norm.apply(l1.apply(x))), mode));
    }
    void collect(NamedParams& out, const std::string& prefix) const {
        l1.collect(out, prefix + ".l1");
        norm.collect(out, prefix + ".ln");
        l2.collect(out, prefix + ".l2");
    }
};

}  // namespace alertstar
