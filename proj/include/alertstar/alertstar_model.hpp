#pragma once
// AlertStar: single-task embedding-space scorer. A qualifier-aware attention
// branch and a feed-forward path-composition branch are blended by a
// trainable sigmoid gate; candidates are scored by dot product against the
// entity table.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "alertstar/data.hpp"
#include "alertstar/diff.hpp"
#include "alertstar/enrich.hpp"
#include "alertstar/layers.hpp"

namespace alertstar {

struct AlertStarConfig {
    int64_t dim = 200;
    int heads = 4;
    double dropout = 0.2;
    // ablation switches
    bool no_qual = false;  // bypass qualifier attention entirely
    bool no_path = false;  // attention branch only (gate pinned to 1)
    bool no_gate = false;  // gate pinned to 0.5, non-trainable

    void validate() const {
        if (no_path && no_gate)
            throw std::invalid_argument("alertstar: no-path and no-gate are contradictory");
    }
};

struct AlertStarModel {
    AlertStarConfig cfg;
    Array entity_table;    // [N, d]
    Array relation_table;  // [|R|, d]
    EnrichParams enrich;
    LayerNorm ln_attn;
    MlpBlock ffn_path;  // 2d -> d -> d
    LayerNorm ln_path;
    Array gate_raw;  // [1]

    static AlertStarModel init(Id num_entities, Id num_relations, Id num_qual_keys, Id num_qual_values,
                               const AlertStarConfig& cfg, uint64_t seed) {
        cfg.validate();
        Rng rng(seed);
        AlertStarModel m;
        m.cfg = cfg;
        const int64_t d = cfg.dim;
        const double s = 1.0 / std::sqrt(static_cast<double>(d));
        m.entity_table = Array::randn({num_entities, d}, rng, s, true);
        m.relation_table = Array::randn({num_relations, d}, rng, s, true);
        m.enrich = EnrichParams::init(num_qual_keys, num_qual_values, d, cfg.heads, rng);
        m.ln_attn = LayerNorm::init(d);
        m.ffn_path = MlpBlock::init(2 * d, d, d, rng);
        m.ln_path = LayerNorm::init(d);
        m.gate_raw = Array::from({1}, {0.5}, !cfg.no_gate && !cfg.no_path);
        return m;
    }

    Array gate_alpha() const {
        if (cfg.no_path) return Array::scalar(1.0);
        if (cfg.no_gate) return Array::scalar(0.5);
        return sigmoid(gate_raw);
    }
    double gate_value() const { return gate_alpha().item(); }

    // Fused representation z for a (h, r, Q) query.
    Array forward(Id h, Id r, const std::vector<QualPair>& quals, const ModeCtx& mode) const {
        Array e_h = lookup_row(entity_table, h);
        Array e_r = lookup_row(relation_table, r);
        Array enriched = cfg.no_qual ? e_r : mha_enrich(e_r, quals, enrich);
        Array attn = ln_attn.apply(add(e_h, enriched));
        Array alpha = gate_alpha();
        if (cfg.no_path) return attn;
        Array path = ln_path.apply(add(e_h, ffn_path.apply(concat_cols(e_h, attn), mode)));
        Array one_minus = add_const(scale(alpha, -1.0), 1.0);
        return add(mul(attn, alpha), mul(path, one_minus));
    }

    // Training-mode scalar score against one tail (dropout applied to z).
    Array score_one(const Array& z, Id tail, const ModeCtx& mode) const {
        Array zd = apply_dropout(z, mode);
        Array e_t = lookup_row(entity_table, tail);
        return reshape(matmul(zd, transpose(e_t)), {1});
    }

    // Eval-mode scores against every entity; dropout disabled by contract.
    Array score_all(const Array& z) const { return matmul(z, transpose(entity_table)); }

    NamedParams named_params() const {
        NamedParams out;
        out.emplace_back("alertstar.entity", entity_table);
        out.emplace_back("alertstar.relation", relation_table);
        enrich.collect(out, "alertstar.enrich");
        ln_attn.collect(out, "alertstar.ln_attn");
        ffn_path.collect(out, "alertstar.ffn_path");
        ln_path.collect(out, "alertstar.ln_path");
        out.emplace_back("alertstar.gate", gate_raw);
        return out;
    }

    std::vector<Array> trainable() const {
        std::vector<Array> out;
        for (auto& [name, a] : named_params())
            if (a.tracked()) out.push_back(a);
        return out;
    }
};

}  // namespace alertstar
