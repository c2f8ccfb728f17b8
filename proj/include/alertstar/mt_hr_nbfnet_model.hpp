#pragma once
// MT-HR-NBFNet: three prediction heads (tail, relation, qualifier value)
// sharing one Bellman-Ford pass per (h, q') group. The tail head scores
// [H(L)[t] || e_qry], the relation head reads the propagated source row, and
// the qualifier-value head gates the source row on a dedicated key embedding
// before classification.

#include <stdexcept>
#include <vector>

#include "alertstar/hr_nbfnet_model.hpp"
#include "alertstar/optim.hpp"

namespace alertstar {

struct MtHrConfig {
    HrConfig hr;
    double lambda_tail = 1.0;
    double lambda_rel = 0.8;
    double lambda_qv = 0.8;
    double margin = 1.0;
    double clip_norm = 1.0;
};

struct MtHrModel {
    MtHrConfig cfg;
    HrNbfModel backbone;
    MlpBlock head_tail;         // 2d -> d -> 1
    MlpBlock head_rel;          // d -> d -> |R|
    Array w_gate;               // [2d, d]
    Array head_qual_key_table;  // dedicated [|Q_K|, d]
    MlpBlock head_qv;           // d -> d -> |Q_V|

    static MtHrModel init(Id num_entities, Id num_relations, Id num_qual_keys, Id num_qual_values,
                          const MtHrConfig& cfg, uint64_t seed) {
        MtHrModel m;
        m.cfg = cfg;
        m.backbone = HrNbfModel::init(num_entities, num_relations, num_qual_keys, num_qual_values, cfg.hr, seed);
        Rng rng(mix64(seed ^ 0x6d74687200000000ull));
        const int64_t d = cfg.hr.dim;
        m.head_tail = MlpBlock::init(2 * d, d, 1, rng);
        m.head_rel = MlpBlock::init(d, d, num_relations, rng);
        m.w_gate = Array::randn({2 * d, d}, rng, 1.0 / std::sqrt(2.0 * static_cast<double>(d)), true);
        m.head_qual_key_table = Array::randn({num_qual_keys, d}, rng, 1.0 / std::sqrt(static_cast<double>(d)), true);
        m.head_qv = MlpBlock::init(d, d, num_qual_values, rng);
        return m;
    }

    Array tail_score(const PropagationState& st, Id query_rel, Id tail, const ModeCtx& mode) const {
        Array e_q = lookup_row(backbone.qry_relation_table, query_rel);
        Array cat = concat_cols(lookup_rows(st.h, {tail}), e_q);
        return reshape(head_tail.apply(cat, mode), {1});
    }

    Array tail_scores_all(const PropagationState& st, Id query_rel, const ModeCtx& mode) const {
        Array e_q = lookup_row(backbone.qry_relation_table, query_rel);
        Array ones = Array::full({backbone.num_entities, 1}, 1.0);
        Array cat = concat_cols(st.h, matmul(ones, e_q));
        return transpose(head_tail.apply(cat, mode));
    }

    Array relation_logits(const PropagationState& st, Id source, const ModeCtx& mode) const {
        return head_rel.apply(lookup_rows(st.h, {source}), mode);
    }

    // Requires the target qualifier key; the source representation is gated
    // on its dedicated embedding before classification.
    Array qual_value_logits(const PropagationState& st, Id source, Id target_key, const ModeCtx& mode) const {
        if (target_key < 0 || target_key >= head_qual_key_table.shape()[0])
            throw std::invalid_argument("qual-value head: missing or invalid target qualifier key");
        Array h_src = lookup_rows(st.h, {source});
        Array e_k = lookup_row(head_qual_key_table, target_key);
        Array gate = sigmoid(matmul(concat_cols(h_src, e_k), w_gate));
        return head_qv.apply(mul(gate, h_src), mode);
    }

    struct StepResult {
        double total = 0.0;
        double tail = 0.0;
        double relation = 0.0;
        double qual_value = 0.0;
        bool qual_value_active = false;
        double grad_norm = 0.0;
    };

    // One training step for a (h, q') group: a single shared propagation,
    // margin ranking over the sampled positives against uniform negatives,
    // cross-entropy on the query relation, and cross-entropy on one sampled
    // qualifier pair of the group representative (skipped when empty).
    StepResult training_step(Id source, Id query_rel, const std::vector<Id>& positives,
                             const std::vector<QualPair>& rep_quals, const HyperRelGraph& g,
                             std::vector<Array>& params, Adam& opt, Rng& rng, const ModeCtx& mode) const {
        if (positives.empty()) throw std::invalid_argument("training step: empty (h, q') group");
        StepResult res;
        PropagationState st = backbone.propagate_full(source, query_rel, rep_quals, g, mode);

        Array loss_tail;
        std::uniform_int_distribution<Id> uniform_entity(0, backbone.num_entities - 1);
        for (Id t : positives) {
            const Id neg = uniform_entity(rng);
            Array pos_s = tail_score(st, query_rel, t, mode);
            Array neg_s = tail_score(st, query_rel, neg, mode);
            Array l = relu(add_const(add(scale(pos_s, -1.0), neg_s), cfg.margin));
            loss_tail = loss_tail.defined() ? add(loss_tail, l) : l;
        }
        loss_tail = scale(loss_tail, 1.0 / static_cast<double>(positives.size()));
        Array total = scale(loss_tail, cfg.lambda_tail);
        res.tail = loss_tail.item();

        if (cfg.lambda_rel != 0.0) {
            if (query_rel >= backbone.num_relations)
                throw std::invalid_argument("training step: relation head needs a forward relation id");
            Array l_rel = cross_entropy(relation_logits(st, source, mode), query_rel);
            res.relation = l_rel.item();
            total = add(total, scale(l_rel, cfg.lambda_rel));
        }
        if (cfg.lambda_qv != 0.0 && !rep_quals.empty()) {
            std::uniform_int_distribution<size_t> pick(0, rep_quals.size() - 1);
            const auto& pair = rep_quals[pick(rng)];
            Array l_qv = cross_entropy(qual_value_logits(st, source, pair.key, mode), pair.value);
            res.qual_value = l_qv.item();
            res.qual_value_active = true;
            total = add(total, scale(l_qv, cfg.lambda_qv));
        }
        res.total = total.item();

        for (auto& p : params) p.zero_grad();
        backward(total);
        res.grad_norm = clip_global_norm(params, cfg.clip_norm);
        opt.step(params);
        return res;
    }

    NamedParams named_params() const {
        NamedParams out = backbone.named_params("mthr.bf");
        head_tail.collect(out, "mthr.head_tail");
        head_rel.collect(out, "mthr.head_rel");
        out.emplace_back("mthr.qv_gate", w_gate);
        out.emplace_back("mthr.qv_key", head_qual_key_table);
        head_qv.collect(out, "mthr.head_qv");
        return out;
    }

    std::vector<Array> trainable() const {
        std::vector<Array> out;
        for (auto& [name, a] : named_params()) out.push_back(a);
        return out;
    }
};

}  // namespace alertstar
