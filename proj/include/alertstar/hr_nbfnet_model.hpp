#pragma once
// HR-NBFNet: qualifier-conditioned Bellman-Ford propagation. A query
// (h, q', Q_q) seeds the source row with the query relation embedding plus a
// projected DistMult encoding of the query qualifiers; each layer sends
// per-edge messages H[x] + gamma(h_r, h_q) along forward and inverse edges,
// scatter-sums them, and applies a gated update with a residual back to the
// boundary condition. Candidate tails are scored by an MLP over
// [H(L)[v] || e_qry].
//
// Edges are processed in chunks for memory shape only: messages land in one
// matrix and a single order-canonical scatter-add consumes them, so results
// are bit-identical for every chunk size.

#include <stdexcept>
#include <string>
#include <vector>

#include "alertstar/data.hpp"
#include "alertstar/diff.hpp"
#include "alertstar/enrich.hpp"
#include "alertstar/graph.hpp"
#include "alertstar/layers.hpp"
#include "alertstar/optim.hpp"

namespace alertstar {

struct HrConfig {
    int64_t dim = 200;
    int layers = 3;
    int64_t chunk = 5000;
    double dropout = 0.2;

    void validate() const {
        if (layers < 1) throw std::invalid_argument("hr-nbfnet: need at least one layer");
        if (chunk < 1) throw std::invalid_argument("hr-nbfnet: chunk size must be >= 1");
    }
};

struct PropagationState {
    Array h;   // [N, d]
    Array h0;  // boundary condition, kept for the per-layer residual
};

struct HrNbfModel {
    HrConfig cfg;
    Id num_entities = 0;
    Id num_relations = 0;        // forward |R|; tables span 2|R| for inverses
    Array qry_relation_table;    // [2|R|, d]
    Array qry_qual_key_table;    // [|Q_K|, d]
    Array qry_qual_value_table;  // [|Q_V|, d]
    Array edge_qual_key_table;   // [|Q_K|, d]
    Array edge_qual_value_table; // [|Q_V|, d]
    Array w_proj;                // [d, d]
    GammaParams gamma;
    std::vector<Array> w_layer;  // per layer [2d, d]
    std::vector<LayerNorm> ln_layer;
    MlpBlock scorer;  // 2d -> d -> 1
    mutable int64_t propagation_count = 0;

    static HrNbfModel init(Id num_entities, Id num_relations, Id num_qual_keys, Id num_qual_values,
                           const HrConfig& cfg, uint64_t seed) {
        cfg.validate();
        Rng rng(seed);
        HrNbfModel m;
        m.cfg = cfg;
        m.num_entities = num_entities;
        m.num_relations = num_relations;
        const int64_t d = cfg.dim;
        const double s = 1.0 / std::sqrt(static_cast<double>(d));
        m.qry_relation_table = Array::randn({2 * num_relations, d}, rng, s, true);
        m.qry_qual_key_table = Array::randn({num_qual_keys, d}, rng, s, true);
        m.qry_qual_value_table = Array::randn({num_qual_values, d}, rng, s, true);
        m.edge_qual_key_table = Array::randn({num_qual_keys, d}, rng, s, true);
        m.edge_qual_value_table = Array::randn({num_qual_values, d}, rng, s, true);
        m.w_proj = Array::randn({d, d}, rng, s, true);
        m.gamma = GammaParams::init(d, rng);
        for (int t = 0; t < cfg.layers; ++t) {
            m.w_layer.push_back(Array::randn({2 * d, d}, rng, 1.0 / std::sqrt(2.0 * static_cast<double>(d)), true));
            m.ln_layer.push_back(LayerNorm::init(d));
        }
        m.scorer = MlpBlock::init(2 * d, d, 1, rng);
        return m;
    }

    // Boundary condition: only the source row is nonzero.
    PropagationState init_state(Id source, Id query_rel, const std::vector<QualPair>& query_quals) const {
        if (source < 0 || source >= num_entities) throw std::out_of_range("init_state: source outside entity vocab");
        Array base = lookup_row(qry_relation_table, query_rel);
        if (!query_quals.empty()) {
            Array phi = distmult_pairs(query_quals, qry_qual_key_table, qry_qual_value_table);
            base = add(base, matmul(phi, w_proj));
        }
        PropagationState st;
        st.h = scatter_add_rows(base, {source}, num_entities);
        st.h0 = st.h;
        return st;
    }

    // Per-edge qualifier vectors for an edge range, batched over the flat
    // (edge, live-slot) list: h_q[e] = (sum_i k_i (.) v_i) * W_q.
    Array edge_qual_vectors(const HyperRelGraph& g, int64_t e0, int64_t e1) const {
        const int64_t c = e1 - e0;
        std::vector<Id> keys, values;
        std::vector<int64_t> owner;
        for (int64_t e = e0; e < e1; ++e) {
            const int64_t n = g.qual_count[static_cast<size_t>(e)];
            for (int64_t j = 0; j < n; ++j) {
                keys.push_back(g.qual_key_at(e, j));
                values.push_back(g.qual_value_at(e, j));
                owner.push_back(e - e0);
            }
        }
        if (keys.empty()) return Array::zeros({c, cfg.dim});
        Array prod = mul(lookup_rows(edge_qual_key_table, keys), lookup_rows(edge_qual_value_table, values));
        Array sums = scatter_add_rows(prod, owner, c);
        return matmul(sums, gamma.w_q);
    }

    PropagationState propagate_layer(const PropagationState& st, const HyperRelGraph& g, int layer,
                                     const ModeCtx& mode) const {
        if (layer < 1 || layer > cfg.layers) throw std::out_of_range("propagate_layer: layer index");
        const int64_t ne = g.num_edges();
        Array alpha = gamma.alpha();
        Array one_minus = add_const(scale(alpha, -1.0), 1.0);

        Array messages;
        std::vector<int64_t> dst(static_cast<size_t>(ne));
        for (int64_t e0 = 0; e0 < ne; e0 += cfg.chunk) {
            const int64_t e1 = std::min(ne, e0 + cfg.chunk);
            std::vector<int64_t> src_ids, rel_ids;
            for (int64_t e = e0; e < e1; ++e) {
                src_ids.push_back(g.edges[static_cast<size_t>(e)].src);
                rel_ids.push_back(g.edges[static_cast<size_t>(e)].rel);
                dst[static_cast<size_t>(e)] = g.edges[static_cast<size_t>(e)].dst;
            }
            Array h_src = lookup_rows(st.h, src_ids);
            Array h_rel = lookup_rows(qry_relation_table, rel_ids);
            Array h_q = edge_qual_vectors(g, e0, e1);
            Array merged = add(mul(h_rel, alpha), mul(h_q, one_minus));
            Array chunk_msgs = add(h_src, merged);
            messages = messages.defined() ? vstack({messages, chunk_msgs}) : chunk_msgs;
        }

        PropagationState out;
        out.h0 = st.h0;
        Array agg = ne > 0 ? scatter_add_rows(messages, dst, num_entities)
                           : Array::zeros({num_entities, cfg.dim});
        Array cat = concat_cols(st.h, agg);
        Array lin = matmul(cat, w_layer[static_cast<size_t>(layer - 1)]);
        Array updated = apply_dropout(relu(ln_layer[static_cast<size_t>(layer - 1)].apply(lin)), mode);
        out.h = add(updated, st.h0);
        return out;
    }

    PropagationState propagate_full(Id source, Id query_rel, const std::vector<QualPair>& query_quals,
                                    const HyperRelGraph& g, const ModeCtx& mode) const {
        ++propagation_count;
        PropagationState st = init_state(source, query_rel, query_quals);
        for (int t = 1; t <= cfg.layers; ++t) st = propagate_layer(st, g, t, mode);
        return st;
    }

    // Scores for every candidate tail: MLP([H(L)[v] || e_qry]) -> [1, N].
    Array score_tails(const PropagationState& st, Id query_rel, const ModeCtx& mode) const {
        Array e_q = lookup_row(qry_relation_table, query_rel);
        Array ones = Array::full({num_entities, 1}, 1.0);
        Array cat = concat_cols(st.h, matmul(ones, e_q));
        return transpose(scorer.apply(cat, mode));
    }

    Array score_tail(const PropagationState& st, Id query_rel, Id tail, const ModeCtx& mode) const {
        Array e_q = lookup_row(qry_relation_table, query_rel);
        Array cat = concat_cols(lookup_rows(st.h, {tail}), e_q);
        return reshape(scorer.apply(cat, mode), {1});
    }

    Array infer(Id source, Id query_rel, const std::vector<QualPair>& query_quals, const HyperRelGraph& g) const {
        PropagationState st = propagate_full(source, query_rel, query_quals, g, ModeCtx::eval());
        return score_tails(st, query_rel, ModeCtx::eval());
    }

    struct StepResult {
        double loss = 0.0;
        double grad_norm = 0.0;
    };

    // Single-task margin step for one (h, q') group: shared propagation,
    // mean hinge over the sampled positives against uniform negatives.
    StepResult training_step(Id source, Id query_rel, const std::vector<Id>& positives,
                             const std::vector<QualPair>& rep_quals, const HyperRelGraph& g,
                             std::vector<Array>& params, Adam& opt, Rng& rng, const ModeCtx& mode,
                             double margin, double clip_norm) const {
        if (positives.empty()) throw std::invalid_argument("training step: empty (h, q') group");
        PropagationState st = propagate_full(source, query_rel, rep_quals, g, mode);
        Array loss;
        std::uniform_int_distribution<Id> uniform_entity(0, num_entities - 1);
        for (Id t : positives) {
            const Id neg = uniform_entity(rng);
            Array pos_s = score_tail(st, query_rel, t, mode);
            Array neg_s = score_tail(st, query_rel, neg, mode);
            Array l = relu(add_const(add(scale(pos_s, -1.0), neg_s), margin));
            loss = loss.defined() ? add(loss, l) : l;
        }
        loss = scale(loss, 1.0 / static_cast<double>(positives.size()));
        StepResult res;
        res.loss = loss.item();
        for (auto& p : params) p.zero_grad();
        backward(loss);
        res.grad_norm = clip_global_norm(params, clip_norm);
        opt.step(params);
        return res;
    }

    NamedParams named_params(const std::string& prefix = "hrnbf") const {
        NamedParams out;
        out.emplace_back(prefix + ".qry_relation", qry_relation_table);
        out.emplace_back(prefix + ".qry_qual_key", qry_qual_key_table);
        out.emplace_back(prefix + ".qry_qual_value", qry_qual_value_table);
        out.emplace_back(prefix + ".edge_qual_key", edge_qual_key_table);
        out.emplace_back(prefix + ".edge_qual_value", edge_qual_value_table);
        out.emplace_back(prefix + ".w_proj", w_proj);
        gamma.collect(out, prefix + ".gamma");
        for (size_t t = 0; t < w_layer.size(); ++t) {
            out.emplace_back(prefix + ".layer" + std::to_string(t) + ".w", w_layer[t]);
            ln_layer[t].collect(out, prefix + ".layer" + std::to_string(t) + ".ln");
        }
        scorer.collect(out, prefix + ".scorer");
        return out;
    }

    std::vector<Array> trainable() const {
        std::vector<Array> out;
        for (auto& [name, a] : named_params()) out.push_back(a);
        return out;
    }
};

}  // namespace alertstar
