#pragma once
// Complex first-order-logic queries over the alert graph: one-hop (1p),
// two-hop chain (2p), two-anchor intersection (2i) and union (2u). Query
// vectors are built from a residual path-composition operator over
// qualifier-enriched relations and scored by dot product against the entity
// table. Instances are mined from statements with gold-answer sets obtained
// by exhaustive index lookup.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "alertstar/data.hpp"
#include "alertstar/enrich.hpp"
#include "alertstar/graph.hpp"
#include "alertstar/layers.hpp"
#include "alertstar/metrics.hpp"
#include "alertstar/optim.hpp"

namespace alertstar {

enum class QueryKind { q1p, q2p, q2i, q2u };

inline const char* query_kind_name(QueryKind k) {
    switch (k) {
        case QueryKind::q1p: return "1p";
        case QueryKind::q2p: return "2p";
        case QueryKind::q2i: return "2i";
        case QueryKind::q2u: return "2u";
    }
    return "?";
}

inline QueryKind query_kind_from(const std::string& s) {
    if (s == "1p") return QueryKind::q1p;
    if (s == "2p") return QueryKind::q2p;
    if (s == "2i") return QueryKind::q2i;
    if (s == "2u") return QueryKind::q2u;
    throw std::invalid_argument("unknown query kind '" + s + "'");
}

struct QueryInstance {
    QueryKind kind = QueryKind::q1p;
    Id head1 = -1;
    Id rel1 = -1;
    std::vector<QualPair> quals;  // first anchor only; second hop/anchor is bare
    Id head2 = -1;                // 2i/2u
    Id rel2 = -1;                 // 2p/2i/2u
    std::vector<Id> golds;

    void validate() const {
        if (head1 < 0 || rel1 < 0) throw std::invalid_argument("query: missing first anchor");
        switch (kind) {
            case QueryKind::q1p:
                break;
            case QueryKind::q2p:
                if (rel2 < 0) throw std::invalid_argument("query: 2p needs a second relation");
                break;
            case QueryKind::q2i:
            case QueryKind::q2u:
                if (head2 < 0 || rel2 < 0) throw std::invalid_argument("query: 2i/2u need a second anchor");
                if (head2 == head1) throw std::invalid_argument("query: 2i/2u anchors must differ");
                break;
        }
    }
};

struct CqConfig {
    int64_t dim = 200;
    int heads = 4;
    double dropout = 0.2;
    double margin = 1.0;
    double clip_norm = 1.0;
    int64_t per_type_cap = 200;
};

struct CqModel {
    CqConfig cfg;
    Array entity_table;    // [N, d]
    Array relation_table;  // [|R|, d]
    EnrichParams enrich;
    MlpBlock ffn_phi;  // 2d -> d -> d
    Array w_intersect;  // [2d, d]

    static CqModel init(Id num_entities, Id num_relations, Id num_qual_keys, Id num_qual_values,
                        const CqConfig& cfg, uint64_t seed) {
        Rng rng(seed);
        CqModel m;
        m.cfg = cfg;
        const int64_t d = cfg.dim;
        const double s = 1.0 / std::sqrt(static_cast<double>(d));
        m.entity_table = Array::randn({num_entities, d}, rng, s, true);
        m.relation_table = Array::randn({num_relations, d}, rng, s, true);
        m.enrich = EnrichParams::init(num_qual_keys, num_qual_values, d, cfg.heads, rng);
        m.ffn_phi = MlpBlock::init(2 * d, d, d, rng);
        m.w_intersect = Array::randn({2 * d, d}, rng, 1.0 / std::sqrt(2.0 * static_cast<double>(d)), true);
        return m;
    }

    // One hop in embedding space: x0 + FFN([x || enriched relation]).
    Array compose(const Array& x, Id rel, const std::vector<QualPair>& quals, const Array& x0,
                  const ModeCtx& mode) const {
        Array e_r = lookup_row(relation_table, rel);
        Array enriched = mha_enrich(e_r, quals, enrich);
        return add(x0, ffn_phi.apply(concat_cols(x, enriched), mode));
    }

    Array build_query(const QueryInstance& q, const ModeCtx& mode) const {
        q.validate();
        Array e_h1 = lookup_row(entity_table, q.head1);
        Array first = compose(e_h1, q.rel1, q.quals, e_h1, mode);
        switch (q.kind) {
            case QueryKind::q1p:
                return first;
            case QueryKind::q2p:
                return compose(first, q.rel2, {}, e_h1, mode);
            case QueryKind::q2i: {
                Array e_h2 = lookup_row(entity_table, q.head2);
                Array second = compose(e_h2, q.rel2, {}, e_h2, mode);
                return matmul(concat_cols(first, second), w_intersect);
            }
            case QueryKind::q2u: {
                Array e_h2 = lookup_row(entity_table, q.head2);
                Array second = compose(e_h2, q.rel2, {}, e_h2, mode);
                return scale(add(first, second), 0.5);
            }
        }
        throw std::logic_error("unreachable");
    }

    Array score_one(const Array& query_vec, Id entity, const ModeCtx& mode) const {
        Array qd = apply_dropout(query_vec, mode);
        return reshape(matmul(qd, transpose(lookup_row(entity_table, entity))), {1});
    }
    Array score_all(const Array& query_vec) const { return matmul(query_vec, transpose(entity_table)); }

    NamedParams named_params() const {
        NamedParams out;
        out.emplace_back("cq.entity", entity_table);
        out.emplace_back("cq.relation", relation_table);
        enrich.collect(out, "cq.enrich");
        ffn_phi.collect(out, "cq.ffn_phi");
        out.emplace_back("cq.w_intersect", w_intersect);
        return out;
    }
    std::vector<Array> trainable() const {
        std::vector<Array> out;
        for (auto& [name, a] : named_params()) out.push_back(a);
        return out;
    }

    struct StepResult {
        double total = 0.0;
        int active_types = 0;
    };

    // Joint step for one statement: 1p always, 2p when a chain continues from
    // the gold tail, 2i when a second anchor reaches it; active hinge losses
    // are averaged, clipped and applied.
    StepResult training_step(const QualifiedStatement& s, const HyperRelGraph& g, std::vector<Array>& params,
                             Adam& opt, Rng& rng, const ModeCtx& mode) const {
        std::uniform_int_distribution<Id> uniform_entity(0, entity_table.shape()[0] - 1);
        const Id neg = uniform_entity(rng);

        QueryInstance q1;
        q1.kind = QueryKind::q1p;
        q1.head1 = s.head;
        q1.rel1 = s.relation;
        q1.quals = s.qualifiers;
        Array e_h = lookup_row(entity_table, s.head);
        Array q1p = build_query(q1, mode);
        Array loss = margin_loss(score_one(q1p, s.tail, mode), score_one(q1p, neg, mode), cfg.margin);
        int active = 1;

        const auto& out_edges = g.out_index[static_cast<size_t>(s.tail)];
        if (!out_edges.empty()) {
            std::uniform_int_distribution<size_t> pick(0, out_edges.size() - 1);
            const auto [r2, t2] = out_edges[pick(rng)];
            Array q2p = compose(q1p, r2, {}, e_h, mode);
            loss = add(loss, margin_loss(score_one(q2p, t2, mode), score_one(q2p, neg, mode), cfg.margin));
            ++active;
        }

        const auto& in_edges = g.in_index[static_cast<size_t>(s.tail)];
        std::vector<std::pair<Id, Id>> anchors;
        for (const auto& [h2, r2] : in_edges)
            if (h2 != s.head) anchors.emplace_back(h2, r2);
        if (!anchors.empty()) {
            std::uniform_int_distribution<size_t> pick(0, anchors.size() - 1);
            const auto [h2, r2] = anchors[pick(rng)];
            Array e_h2 = lookup_row(entity_table, h2);
            Array second = compose(e_h2, r2, {}, e_h2, mode);
            Array q2i = matmul(concat_cols(q1p, second), w_intersect);
            loss = add(loss, margin_loss(score_one(q2i, s.tail, mode), score_one(q2i, neg, mode), cfg.margin));
            ++active;
        }

        loss = scale(loss, 1.0 / static_cast<double>(active));
        StepResult res;
        res.total = loss.item();
        res.active_types = active;
        for (auto& p : params) p.zero_grad();
        backward(loss);
        clip_global_norm(params, cfg.clip_norm);
        opt.step(params);
        return res;
    }
};

// ---------------------------------------------------------------------------
// instance mining
// ---------------------------------------------------------------------------

struct MinedQueries {
    std::vector<QueryInstance> q1p, q2p, q2i, q2u;

    const std::vector<QueryInstance>& of(QueryKind k) const {
        switch (k) {
            case QueryKind::q1p: return q1p;
            case QueryKind::q2p: return q2p;
            case QueryKind::q2i: return q2i;
            case QueryKind::q2u: return q2u;
        }
        throw std::logic_error("unreachable");
    }
};

namespace detail {
inline std::vector<Id> sorted_unique(std::vector<Id> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}
inline std::vector<Id> group_tails(const HyperRelGraph& g, Id h, Id r) {
    auto it = g.group_index.find({h, r});
    if (it == g.group_index.end()) return {};
    return it->second;
}
}  // namespace detail

// Mines query instances from statements against the graph's indices. Gold
// sets come from exhaustive lookup: 1p golds are the (h, r) group; 2p golds
// chain through every intermediate; 2i/2u take intersection/union of the two
// anchors' answer sets.
inline MinedQueries mine_instances(const HyperRelGraph& g, const std::vector<QualifiedStatement>& statements,
                                   int64_t per_type_cap, uint64_t seed) {
    MinedQueries out;
    Rng rng(mix64(seed));
    for (const auto& s : statements) {
        if (static_cast<int64_t>(out.q1p.size()) < per_type_cap) {
            QueryInstance q;
            q.kind = QueryKind::q1p;
            q.head1 = s.head;
            q.rel1 = s.relation;
            q.quals = s.qualifiers;
            q.golds = detail::sorted_unique(detail::group_tails(g, s.head, s.relation));
            if (q.golds.empty()) q.golds = {s.tail};  // statement outside the index graph
            out.q1p.push_back(std::move(q));
        }

        const auto& out_edges = g.out_index[static_cast<size_t>(s.tail)];
        if (!out_edges.empty() && static_cast<int64_t>(out.q2p.size()) < per_type_cap) {
            std::uniform_int_distribution<size_t> pick(0, out_edges.size() - 1);
            const auto [r2, t2] = out_edges[pick(rng)];
            QueryInstance q;
            q.kind = QueryKind::q2p;
            q.head1 = s.head;
            q.rel1 = s.relation;
            q.quals = s.qualifiers;
            q.rel2 = r2;
            std::vector<Id> golds;
            for (Id mid : detail::group_tails(g, s.head, s.relation))
                for (Id z : detail::group_tails(g, mid, r2)) golds.push_back(z);
            q.golds = detail::sorted_unique(std::move(golds));
            if (!q.golds.empty()) out.q2p.push_back(std::move(q));
        }

        const auto& in_edges = g.in_index[static_cast<size_t>(s.tail)];
        std::vector<std::pair<Id, Id>> anchors;
        for (const auto& [h2, r2] : in_edges)
            if (h2 != s.head) anchors.emplace_back(h2, r2);
        if (!anchors.empty()) {
            std::uniform_int_distribution<size_t> pick(0, anchors.size() - 1);
            const auto [h2, r2] = anchors[pick(rng)];
            auto a_set = detail::sorted_unique(detail::group_tails(g, s.head, s.relation));
            auto b_set = detail::sorted_unique(detail::group_tails(g, h2, r2));
            if (static_cast<int64_t>(out.q2i.size()) < per_type_cap) {
                QueryInstance q;
                q.kind = QueryKind::q2i;
                q.head1 = s.head;
                q.rel1 = s.relation;
                q.quals = s.qualifiers;
                q.head2 = h2;
                q.rel2 = r2;
                std::set_intersection(a_set.begin(), a_set.end(), b_set.begin(), b_set.end(),
                                      std::back_inserter(q.golds));
                if (!q.golds.empty()) out.q2i.push_back(std::move(q));
            }
            if (static_cast<int64_t>(out.q2u.size()) < per_type_cap) {
                QueryInstance q;
                q.kind = QueryKind::q2u;
                q.head1 = s.head;
                q.rel1 = s.relation;
                q.quals = s.qualifiers;
                q.head2 = h2;
                q.rel2 = r2;
                std::set_union(a_set.begin(), a_set.end(), b_set.begin(), b_set.end(),
                               std::back_inserter(q.golds));
                if (!q.golds.empty()) out.q2u.push_back(std::move(q));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

struct CqReport {
    std::map<std::string, RankingReport> per_type;  // absent key = no instances
};

// Every gold of a query is ranked with the remaining golds of the same query
// filtered out.
inline CqReport evaluate_queries(const CqModel& m, const MinedQueries& queries) {
    CqReport rep;
    for (QueryKind k : {QueryKind::q1p, QueryKind::q2p, QueryKind::q2i, QueryKind::q2u}) {
        const auto& set = queries.of(k);
        if (set.empty()) continue;
        std::vector<int64_t> ranks;
        for (const auto& q : set) {
            Array scores = m.score_all(m.build_query(q, ModeCtx::eval()));
            const std::vector<double>& sv = scores.values();
            for (Id gold : q.golds) ranks.push_back(filtered_rank(sv, gold, q.golds));
        }
        rep.per_type[query_kind_name(k)] = aggregate(std::move(ranks));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// query-set serialization: kind, anchors and golds, tab separated
// ---------------------------------------------------------------------------

inline std::string format_query_line(const QueryInstance& q) {
    std::ostringstream os;
    os << query_kind_name(q.kind) << '\t' << q.head1 << '\t' << q.rel1 << '\t';
    if (q.quals.empty()) {
        os << '-';
    } else {
        for (size_t i = 0; i < q.quals.size(); ++i)
            os << (i ? "," : "") << q.quals[i].key << ':' << q.quals[i].value;
    }
    if (q.kind == QueryKind::q2p) os << "\t-\t" << q.rel2;
    if (q.kind == QueryKind::q2i || q.kind == QueryKind::q2u) os << '\t' << q.head2 << '\t' << q.rel2;
    for (Id g : q.golds) os << '\t' << g;
    return os.str();
}

inline QueryInstance parse_query_line(const std::string& line) {
    auto f = split_fields(line, '\t');
    if (f.size() < 4) throw std::runtime_error("query line: too few fields");
    QueryInstance q;
    q.kind = query_kind_from(f[0]);
    q.head1 = std::stoll(f[1]);
    q.rel1 = std::stoll(f[2]);
    if (f[3] != "-")
        for (const auto& pair : split_fields(f[3], ',')) {
            const auto colon = pair.find(':');
            if (colon == std::string::npos) throw std::runtime_error("query line: bad qualifier '" + pair + "'");
            q.quals.push_back({std::stoll(pair.substr(0, colon)), std::stoll(pair.substr(colon + 1))});
        }
    size_t gold_start = 4;
    if (q.kind != QueryKind::q1p) {
        if (f.size() < 6) throw std::runtime_error("query line: missing second anchor");
        if (f[4] != "-") q.head2 = std::stoll(f[4]);
        q.rel2 = std::stoll(f[5]);
        gold_start = 6;
    }
    for (size_t i = gold_start; i < f.size(); ++i)
        if (!f[i].empty()) q.golds.push_back(std::stoll(f[i]));
    q.validate();
    return q;
}

}  // namespace alertstar
