#pragma once
// The bidirectional hyper-relational alert graph: forward edges plus inverse
// edges (relation id shifted by |R|) carrying the same qualifier pairs,
// a padded per-edge qualifier table, and adjacency indices.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "alertstar/data.hpp"

namespace alertstar {

constexpr Id kQualSentinel = -1;

struct Edge {
    Id src;
    Id rel;  // in [0, 2|R|); ids >= |R| are inverses
    Id dst;
};

struct HyperRelGraph {
    std::vector<QualifiedStatement> statements;
    Id num_entities = 0;
    Id num_relations = 0;  // |R| before inverse doubling
    int64_t q_max = 8;

    std::vector<Edge> edges;           // 2*|statements|; edge i+|T| inverts edge i
    std::vector<Id> qual_pad;          // [num_edges, q_max, 2], sentinel-filled
    std::vector<int64_t> qual_count;   // per edge
    std::vector<std::string> warnings; // e.g. qualifier truncation

    // adjacency over forward statements
    std::vector<std::vector<std::pair<Id, Id>>> out_index;  // head -> (relation, tail)
    std::vector<std::vector<std::pair<Id, Id>>> in_index;   // tail -> (head, relation)
    std::map<std::pair<Id, Id>, std::vector<Id>> group_index;  // (head, relation) -> tails

    int64_t num_edges() const { return static_cast<int64_t>(edges.size()); }

    Id qual_key_at(int64_t edge, int64_t slot) const { return qual_pad[(edge * q_max + slot) * 2]; }
    Id qual_value_at(int64_t edge, int64_t slot) const { return qual_pad[(edge * q_max + slot) * 2 + 1]; }
};

inline HyperRelGraph build_graph(const std::vector<QualifiedStatement>& statements, Id num_entities,
                                 Id num_relations, int64_t q_max = 8) {
    if (q_max < 1) throw std::invalid_argument("build_graph: q_max must be >= 1");
    HyperRelGraph g;
    g.statements = statements;
    g.num_entities = num_entities;
    g.num_relations = num_relations;
    g.q_max = q_max;

    const int64_t t = static_cast<int64_t>(statements.size());
    g.edges.resize(static_cast<size_t>(2 * t));
    g.qual_pad.assign(static_cast<size_t>(2 * t * q_max * 2), kQualSentinel);
    g.qual_count.assign(static_cast<size_t>(2 * t), 0);

    for (int64_t i = 0; i < t; ++i) {
        const auto& s = statements[static_cast<size_t>(i)];
        if (s.head < 0 || s.head >= num_entities || s.tail < 0 || s.tail >= num_entities)
            throw std::out_of_range("build_graph: entity id outside vocab in statement " + std::to_string(i));
        if (s.relation < 0 || s.relation >= num_relations)
            throw std::out_of_range("build_graph: relation id outside vocab in statement " + std::to_string(i));
        g.edges[static_cast<size_t>(i)] = {s.head, s.relation, s.tail};
        g.edges[static_cast<size_t>(i + t)] = {s.tail, s.relation + num_relations, s.head};

        int64_t n = static_cast<int64_t>(s.qualifiers.size());
        if (n > q_max) {
            g.warnings.push_back("statement " + std::to_string(i) + ": " + std::to_string(n) +
                                 " qualifier pairs truncated to " + std::to_string(q_max));
            n = q_max;
        }
        for (int64_t j = 0; j < n; ++j) {
            const auto& q = s.qualifiers[static_cast<size_t>(j)];
            for (int64_t e : {i, i + t}) {
                g.qual_pad[(e * q_max + j) * 2] = q.key;
                g.qual_pad[(e * q_max + j) * 2 + 1] = q.value;
            }
        }
        g.qual_count[static_cast<size_t>(i)] = n;
        g.qual_count[static_cast<size_t>(i + t)] = n;
    }

    g.out_index.resize(static_cast<size_t>(num_entities));
    g.in_index.resize(static_cast<size_t>(num_entities));
    for (const auto& s : statements) {
        g.out_index[static_cast<size_t>(s.head)].emplace_back(s.relation, s.tail);
        g.in_index[static_cast<size_t>(s.tail)].emplace_back(s.head, s.relation);
        g.group_index[{s.head, s.relation}].push_back(s.tail);
    }
    return g;
}

inline HyperRelGraph build_graph(const std::vector<QualifiedStatement>& statements, const Vocab& vocab,
                                 int64_t q_max = 8) {
    return build_graph(statements, vocab.num_entities(), vocab.num_relations(), q_max);
}

}  // namespace alertstar
