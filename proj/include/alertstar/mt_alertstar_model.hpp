#pragma once
// MT-AlertStar: the statement becomes a token sequence
// [e_h, e_r, e_t, e_qk1, e_qv1, ...], task-specific masking removes the
// target, a Transformer encoder produces a shared context at the relation
// position, and three MLP heads predict tail, relation and qualifier value
// under a weighted joint loss.

#include <stdexcept>
#include <string>
#include <vector>

#include "alertstar/data.hpp"
#include "alertstar/diff.hpp"
#include "alertstar/layers.hpp"

namespace alertstar {

enum class MtTask { tail, relation, qual_value };

struct MtAlertStarConfig {
    int64_t dim = 200;
    int enc_layers = 3;
    int heads = 4;
    int64_t ffn_width = 800;
    double dropout = 0.2;
    double lambda_tail = 1.0;
    double lambda_rel = 0.8;
    double lambda_qv = 0.8;
};

// Post-norm encoder layer: self-attention and position-wise FFN, each behind
// a residual connection and layer norm. No positional encodings; token roles
// are distinguished by content and masking.
struct EncoderLayer {
    std::vector<Array> w_query, w_key, w_value;  // per head [d, d/M]
    Array w_out;                                 // [d, d]
    LayerNorm ln1, ln2;
    Linear ffn1, ffn2;
    int heads;

    static EncoderLayer init(int64_t d, int heads, int64_t ffn_width, Rng& rng) {
        if (heads < 1 || d % heads != 0)
            throw std::invalid_argument("encoder: dimension not divisible by head count");
        EncoderLayer l;
        l.heads = heads;
        const double s = 1.0 / std::sqrt(static_cast<double>(d));
        const int64_t hd = d / heads;
        for (int h = 0; h < heads; ++h) {
            l.w_query.push_back(Array::randn({d, hd}, rng, s, true));
            l.w_key.push_back(Array::randn({d, hd}, rng, s, true));
            l.w_value.push_back(Array::randn({d, hd}, rng, s, true));
        }
        l.w_out = Array::randn({d, d}, rng, s, true);
        l.ln1 = LayerNorm::init(d);
        l.ln2 = LayerNorm::init(d);
        l.ffn1 = Linear::init(d, ffn_width, rng);
        l.ffn2 = Linear::init(ffn_width, d, rng);
        return l;
    }

    Array apply(const Array& x, const ModeCtx& mode) const {
        const int64_t d = x.shape()[1];
        const int64_t hd = d / heads;
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
        Array heads_out;
        for (int h = 0; h < heads; ++h) {
            Array q = matmul(x, w_query[static_cast<size_t>(h)]);
            Array k = matmul(x, w_key[static_cast<size_t>(h)]);
            Array v = matmul(x, w_value[static_cast<size_t>(h)]);
            Array scores = scale(matmul(q, transpose(k)), inv_sqrt);
            Array mixed = attn_mix(softmax_rows(scores), v);
            heads_out = heads_out.defined() ? concat_cols(heads_out, mixed) : mixed;
        }
        Array attn = apply_dropout(matmul(heads_out, w_out), mode);
        Array h1 = ln1.apply(add(x, attn));
        Array f = ffn2.apply(apply_dropout(relu(ffn1.apply(h1)), mode));
        return ln2.apply(add(h1, apply_dropout(f, mode)));
    }

    void collect(NamedParams& out, const std::string& prefix) const {
        for (int h = 0; h < heads; ++h) {
            const std::string hp = prefix + ".head" + std::to_string(h);
            out.emplace_back(hp + ".wq", w_query[static_cast<size_t>(h)]);
            out.emplace_back(hp + ".wk", w_key[static_cast<size_t>(h)]);
            out.emplace_back(hp + ".wv", w_value[static_cast<size_t>(h)]);
        }
        out.emplace_back(prefix + ".wo", w_out);
        ln1.collect(out, prefix + ".ln1");
        ln2.collect(out, prefix + ".ln2");
        ffn1.collect(out, prefix + ".ffn1");
        ffn2.collect(out, prefix + ".ffn2");
    }
};

struct MtAlertStarModel {
    MtAlertStarConfig cfg;
    Array entity_table;      // [N, d]
    Array relation_table;    // [|R|, d]
    Array qual_key_table;    // [|Q_K|, d]
    Array qual_value_table;  // [|Q_V|, d]
    std::vector<EncoderLayer> layers;
    MlpBlock head_tail;  // d -> d -> N
    MlpBlock head_rel;   // d -> d -> |R|
    MlpBlock head_qv;    // d -> d -> |Q_V|

    static MtAlertStarModel init(Id num_entities, Id num_relations, Id num_qual_keys, Id num_qual_values,
                                 const MtAlertStarConfig& cfg, uint64_t seed) {
        Rng rng(seed);
        MtAlertStarModel m;
        m.cfg = cfg;
        const int64_t d = cfg.dim;
        const double s = 1.0 / std::sqrt(static_cast<double>(d));
        m.entity_table = Array::randn({num_entities, d}, rng, s, true);
        m.relation_table = Array::randn({num_relations, d}, rng, s, true);
        m.qual_key_table = Array::randn({num_qual_keys, d}, rng, s, true);
        m.qual_value_table = Array::randn({num_qual_values, d}, rng, s, true);
        for (int l = 0; l < cfg.enc_layers; ++l)
            m.layers.push_back(EncoderLayer::init(d, cfg.heads, cfg.ffn_width, rng));
        m.head_tail = MlpBlock::init(d, d, num_entities, rng);
        m.head_rel = MlpBlock::init(d, d, num_relations, rng);
        m.head_qv = MlpBlock::init(d, d, num_qual_values, rng);
        return m;
    }

    // Token sequence with the task target masked out. Tail/relation masking
    // zero their row; the qualifier-value task removes the whole target pair.
    Array build_sequence(const QualifiedStatement& s, MtTask task, int64_t qv_pair = 0) const {
        const int64_t d = cfg.dim;
        std::vector<Array> rows;
        rows.push_back(lookup_row(entity_table, s.head));
        rows.push_back(task == MtTask::relation ? Array::zeros({1, d}) : lookup_row(relation_table, s.relation));
        rows.push_back(task == MtTask::tail ? Array::zeros({1, d}) : lookup_row(entity_table, s.tail));
        if (task == MtTask::qual_value) {
            if (s.qualifiers.empty()) throw std::invalid_argument("qual-value task needs at least one qualifier");
            if (qv_pair < 0 || qv_pair >= static_cast<int64_t>(s.qualifiers.size()))
                throw std::out_of_range("qual-value target pair out of range");
        }
        for (size_t i = 0; i < s.qualifiers.size(); ++i) {
            if (task == MtTask::qual_value && static_cast<int64_t>(i) == qv_pair) continue;
            rows.push_back(lookup_row(qual_key_table, s.qualifiers[i].key));
            rows.push_back(lookup_row(qual_value_table, s.qualifiers[i].value));
        }
        return vstack(rows);
    }

    // Encoder output at the relation position (row 1).
    Array encode_context(const Array& seq, const ModeCtx& mode) const {
        if (seq.shape()[0] < 3) throw std::invalid_argument("encode: sequence must hold at least h, r, t rows");
        Array h = seq;
        for (const auto& l : layers) h = l.apply(h, mode);
        return lookup_row(h, 1);
    }

    Array tail_logits(const QualifiedStatement& s, const ModeCtx& mode) const {
        return head_tail.apply(encode_context(build_sequence(s, MtTask::tail), mode), mode);
    }
    Array relation_logits(const QualifiedStatement& s, const ModeCtx& mode) const {
        return head_rel.apply(encode_context(build_sequence(s, MtTask::relation), mode), mode);
    }
    Array qual_value_logits(const QualifiedStatement& s, int64_t pair, const ModeCtx& mode) const {
        return head_qv.apply(encode_context(build_sequence(s, MtTask::qual_value, pair), mode), mode);
    }

    struct LossBreakdown {
        Array total;
        Array tail;
        Array relation;
        Array qual_value;  // undefined when inactive
    };

    // Weighted joint objective; the qualifier-value task is inactive when the
    // statement has no qualifiers. qv_pair picks the target pair (sampled per
    // epoch by the trainer when n > 1).
    LossBreakdown multitask_loss(const QualifiedStatement& s, const ModeCtx& mode, int64_t qv_pair = 0) const {
        LossBreakdown out;
        out.tail = cross_entropy(tail_logits(s, mode), s.tail);
        out.relation = cross_entropy(relation_logits(s, mode), s.relation);
        out.total = add(scale(out.tail, cfg.lambda_tail), scale(out.relation, cfg.lambda_rel));
        if (!s.qualifiers.empty()) {
            out.qual_value = cross_entropy(qual_value_logits(s, qv_pair, mode),
                                           s.qualifiers[static_cast<size_t>(qv_pair)].value);
            out.total = add(out.total, scale(out.qual_value, cfg.lambda_qv));
        }
        return out;
    }

    NamedParams named_params() const {
        NamedParams out;
        out.emplace_back("mtas.entity", entity_table);
        out.emplace_back("mtas.relation", relation_table);
        out.emplace_back("mtas.qual_key", qual_key_table);
        out.emplace_back("mtas.qual_value", qual_value_table);
        for (size_t l = 0; l < layers.size(); ++l) layers[l].collect(out, "mtas.enc" + std::to_string(l));
        head_tail.collect(out, "mtas.head_tail");
        head_rel.collect(out, "mtas.head_rel");
        head_qv.collect(out, "mtas.head_qv");
        return out;
    }

    std::vector<Array> trainable() const {
        std::vector<Array> out;
        for (auto& [name, a] : named_params()) out.push_back(a);
        return out;
    }
};

}  // namespace alertstar
