#pragma once
// Margin loss, uniform negative sampling, filtered ranking and the
// MR / MRR / Hits@k aggregates.

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "alertstar/data.hpp"
#include "alertstar/diff.hpp"

namespace alertstar {

inline Array margin_loss(const Array& pos, const Array& neg, double margin) {
    if (margin <= 0.0) throw std::invalid_argument("margin_loss: margin must be positive");
    return relu(add_const(add(scale(pos, -1.0), neg), margin));
}

inline double margin_loss_value(double pos, double neg, double margin) {
    if (margin <= 0.0) throw std::invalid_argument("margin_loss: margin must be positive");
    return std::max(0.0, margin - pos + neg);
}

// Pure uniform draw over the entity vocabulary; may return the gold tail.
inline Id sample_negative(Id num_entities, Rng& rng) {
    if (num_entities < 2) throw std::invalid_argument("negative sampling: need at least two entities");
    std::uniform_int_distribution<Id> d(0, num_entities - 1);
    return d(rng);
}

inline Id sample_negative(Id num_entities, uint64_t seed) {
    Rng rng(mix64(seed));
    return sample_negative(num_entities, rng);
}

// Filtered rank: other known-true answers are removed from the candidate
// list, then rank = 1 + #candidates scoring >= the gold (pessimistic ties).
inline int64_t filtered_rank(const std::vector<double>& scores, Id gold, const std::vector<Id>& known_true) {
    if (gold < 0 || gold >= static_cast<Id>(scores.size()))
        throw std::out_of_range("filtered_rank: gold id outside score vector");
    std::set<Id> filtered(known_true.begin(), known_true.end());
    filtered.erase(gold);
    const double gold_score = scores[static_cast<size_t>(gold)];
    int64_t rank = 1;
    for (Id v = 0; v < static_cast<Id>(scores.size()); ++v) {
        if (v == gold || filtered.count(v)) continue;
        if (scores[static_cast<size_t>(v)] >= gold_score) ++rank;
    }
    return rank;
}

struct RankingReport {
    std::vector<int64_t> ranks;
    double mr = 0.0;
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits3 = 0.0;
    double hits10 = 0.0;
    std::string split_label;
    std::string regime_label;
};

inline RankingReport aggregate(std::vector<int64_t> ranks) {
    if (ranks.empty()) throw std::invalid_argument("aggregate: no ranks");
    RankingReport r;
    r.ranks = std::move(ranks);
    double sum = 0.0, rsum = 0.0;
    int64_t h1 = 0, h3 = 0, h10 = 0;
    for (int64_t rank : r.ranks) {
        sum += static_cast<double>(rank);
        rsum += 1.0 / static_cast<double>(rank);
        if (rank <= 1) ++h1;
        if (rank <= 3) ++h3;
        if (rank <= 10) ++h10;
    }
    const double n = static_cast<double>(r.ranks.size());
    r.mr = sum / n;
    r.mrr = rsum / n;
    r.hits1 = static_cast<double>(h1) / n;
    r.hits3 = static_cast<double>(h3) / n;
    r.hits10 = static_cast<double>(h10) / n;
    return r;
}

// Known-true tails per (head, relation) over a statement collection,
// qualifiers ignored.
using FilterSets = std::map<std::pair<Id, Id>, std::vector<Id>>;

inline FilterSets build_filter_sets(const std::vector<const std::vector<QualifiedStatement>*>& splits) {
    FilterSets out;
    for (const auto* sts : splits)
        for (const auto& s : *sts) out[{s.head, s.relation}].push_back(s.tail);
    return out;
}

}  // namespace alertstar
