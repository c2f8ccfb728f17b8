#pragma once
// Qualifier composition blocks shared across models:
//  - additive key+value context rows with multi-head cross-attention
//    enrichment of a relation embedding (embedding-space models), and
//  - DistMult-style per-edge qualifier vectors merged into relation
//    embeddings through a learned convex gate (propagation models).

#include <cmath>
#include <string>
#include <vector>

#include "alertstar/data.hpp"
#include "alertstar/diff.hpp"
#include "alertstar/graph.hpp"
#include "alertstar/layers.hpp"

namespace alertstar {

struct EnrichParams {
    Array qual_key_table;    // [|Q_K|, d]
    Array qual_value_table;  // [|Q_V|, d]
    int heads = 4;
    std::vector<Array> w_query;  // per head, [d, d/M]
    std::vector<Array> w_key;
    std::vector<Array> w_value;
    Array w_out;  // [d, d]

    int64_t dim() const { return qual_key_table.shape()[1]; }
    int64_t head_dim() const { return dim() / heads; }

    static EnrichParams init(Id num_qual_keys, Id num_qual_values, int64_t d, int heads, Rng& rng) {
        if (heads < 1 || d % heads != 0)
            throw std::invalid_argument("qualifier attention: dimension " + std::to_string(d) +
                                        " not divisible by " + std::to_string(heads) + " heads");
        EnrichParams p;
        p.heads = heads;
        const double s = 1.0 / std::sqrt(static_cast<double>(d));
        p.qual_key_table = Array::randn({num_qual_keys, d}, rng, s, true);
        p.qual_value_table = Array::randn({num_qual_values, d}, rng, s, true);
        const int64_t hd = d / heads;
        for (int h = 0; h < heads; ++h) {
            p.w_query.push_back(Array::randn({d, hd}, rng, s, true));
            p.w_key.push_back(Array::randn({d, hd}, rng, s, true));
            p.w_value.push_back(Array::randn({d, hd}, rng, s, true));
        }
        p.w_out = Array::randn({d, d}, rng, s, true);
        return p;
    }

    void collect(NamedParams& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".qual_key", qual_key_table);
        out.emplace_back(prefix + ".qual_value", qual_value_table);
        for (int h = 0; h < heads; ++h) {
            const std::string hp = prefix + ".head" + std::to_string(h);
            out.emplace_back(hp + ".wq", w_query[static_cast<size_t>(h)]);
            out.emplace_back(hp + ".wk", w_key[static_cast<size_t>(h)]);
            out.emplace_back(hp + ".wv", w_value[static_cast<size_t>(h)]);
        }
        out.emplace_back(prefix + ".wo", w_out);
    }
};

// Rows u^i = e_{qk^i} + e_{qv^i} for a non-empty qualifier set -> [n, d].
inline Array build_qual_context(const std::vector<QualPair>& quals, const EnrichParams& p) {
    if (quals.empty()) throw std::invalid_argument("qual context: empty qualifier set; callers must branch");
    std::vector<Id> keys, values;
    for (const auto& q : quals) {
        keys.push_back(q.key);
        values.push_back(q.value);
    }
    return add(lookup_rows(p.qual_key_table, keys), lookup_rows(p.qual_value_table, values));
}

// Single-query multi-head cross-attention of a relation embedding over the
// qualifier context rows; an empty qualifier set bypasses the block.
inline Array mha_enrich(const Array& e_r, const Array& context_or_empty, const EnrichParams& p) {
    if (!context_or_empty.defined() || context_or_empty.shape()[0] == 0) return e_r;
    const Array& u = context_or_empty;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(p.head_dim()));
    Array heads_out;
    for (int h = 0; h < p.heads; ++h) {
        Array q = matmul(e_r, p.w_query[static_cast<size_t>(h)]);        // [1, hd]
        Array k = matmul(u, p.w_key[static_cast<size_t>(h)]);            // [n, hd]
        Array v = matmul(u, p.w_value[static_cast<size_t>(h)]);          // [n, hd]
        Array scores = scale(matmul(q, transpose(k)), inv_sqrt);         // [1, n]
        Array mixed = attn_mix(softmax_rows(scores), v);                 // [1, hd]
        heads_out = heads_out.defined() ? concat_cols(heads_out, mixed) : mixed;
    }
    return matmul(heads_out, p.w_out);
}

inline Array mha_enrich(const Array& e_r, const std::vector<QualPair>& quals, const EnrichParams& p) {
    if (quals.empty()) return e_r;
    return mha_enrich(e_r, build_qual_context(quals, p), p);
}

// ---------------------------------------------------------------------------
// DistMult qualifier vector + convex relation/qualifier merge
// ---------------------------------------------------------------------------

struct GammaParams {
    Array w_q;        // [d, d], applied as v * w_q
    Array alpha_raw;  // [1]; effective mixing weight is sigmoid(alpha_raw)

    static GammaParams init(int64_t d, Rng& rng) {
        GammaParams g;
        g.w_q = Array::randn({d, d}, rng, 1.0 / std::sqrt(static_cast<double>(d)), true);
        g.alpha_raw = Array::zeros({1}, true);  // sigmoid(0) = 0.5
        return g;
    }
    Array alpha() const { return sigmoid(alpha_raw); }
    void collect(NamedParams& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".wq", w_q);
        out.emplace_back(prefix + ".alpha", alpha_raw);
    }
};

// h_q = W_q * sum_{i<n} e_{qk^i} (.) e_{qv^i} over the live slots of a padded
// qualifier row; sentinel slots contribute exactly zero (they are never read).
inline Array distmult_qual(const HyperRelGraph& g, int64_t edge, const GammaParams& gp, const Array& key_table,
                           const Array& value_table) {
    const int64_t n = g.qual_count[static_cast<size_t>(edge)];
    const int64_t d = key_table.shape()[1];
    if (n == 0) return Array::zeros({1, d});
    std::vector<Id> keys, values;
    for (int64_t j = 0; j < n; ++j) {
        keys.push_back(g.qual_key_at(edge, j));
        values.push_back(g.qual_value_at(edge, j));
    }
    Array prod = mul(lookup_rows(key_table, keys), lookup_rows(value_table, values));  // [n, d]
    return matmul(sum_axis0(prod), gp.w_q);
}

inline Array distmult_pairs(const std::vector<QualPair>& quals, const Array& key_table, const Array& value_table) {
    const int64_t d = key_table.shape()[1];
    if (quals.empty()) return Array::zeros({1, d});
    std::vector<Id> keys, values;
    for (const auto& q : quals) {
        keys.push_back(q.key);
        values.push_back(q.value);
    }
    return sum_axis0(mul(lookup_rows(key_table, keys), lookup_rows(value_table, values)));
}

// alpha (.) h_r + (1-alpha) (.) h_q with the learned scalar gate.
inline Array gamma_merge(const Array& h_r, const Array& h_q, const GammaParams& gp) {
    Array a = gp.alpha();
    Array one_minus = add_const(scale(a, -1.0), 1.0);
    return add(mul(h_r, a), mul(h_q, one_minus));
}

}  // namespace alertstar
