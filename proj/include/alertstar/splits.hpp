#pragma once
// Qualifier-density regimes and train/valid/test splitting.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "alertstar/data.hpp"
#include "alertstar/diff.hpp"

namespace alertstar {

// Retains round(p*n) qualifier pairs per statement, sampled uniformly without
// replacement. The per-statement permutation depends only on (statement
// index, seed) and the kept set is a prefix of it, so regimes are nested:
// the pairs kept at p=0.33 are a subset of those kept at p=0.66.
inline std::vector<QualifiedStatement> apply_density_regime(const std::vector<QualifiedStatement>& statements,
                                                            double p, uint64_t seed) {
    if (p <= 0.0 || p > 1.0) throw std::invalid_argument("density regime: fraction must be in (0,1]");
    std::vector<QualifiedStatement> out;
    out.reserve(statements.size());
    for (size_t i = 0; i < statements.size(); ++i) {
        const auto& s = statements[i];
        QualifiedStatement r = s;
        const size_t n = s.qualifiers.size();
        const size_t keep = static_cast<size_t>(std::llround(p * static_cast<double>(n)));
        if (keep < n) {
            std::mt19937_64 rng(mix64(seed ^ mix64(static_cast<uint64_t>(i) + 1)));
            std::vector<size_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            perm.resize(keep);
            std::sort(perm.begin(), perm.end());
            r.qualifiers.clear();
            for (size_t j : perm) r.qualifiers.push_back(s.qualifiers[j]);
        }
        out.push_back(std::move(r));
    }
    return out;
}

enum class SplitMode { transductive, inductive };

struct SplitSpec {
    SplitMode mode = SplitMode::transductive;
    double train_fraction = 0.8;
    double valid_fraction = 0.1;
    double test_fraction = 0.1;
    uint64_t seed = 0;
};

struct SplitResult {
    std::vector<QualifiedStatement> train;
    std::vector<QualifiedStatement> valid;
    std::vector<QualifiedStatement> test;
};

inline SplitResult split(const std::vector<QualifiedStatement>& statements, const SplitSpec& spec) {
    if (std::fabs(spec.train_fraction + spec.valid_fraction + spec.test_fraction - 1.0) > 1e-9)
        throw std::invalid_argument("split: fractions must sum to 1");
    const size_t n = statements.size();
    SplitResult res;
    std::mt19937_64 rng(mix64(spec.seed));

    if (spec.mode == SplitMode::transductive) {
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        size_t n_train = static_cast<size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
        size_t n_valid = static_cast<size_t>(std::llround(spec.valid_fraction * static_cast<double>(n)));
        n_train = std::min(n_train, n);
        n_valid = std::min(n_valid, n - n_train);
        for (size_t i = 0; i < n; ++i) {
            const auto& s = statements[order[i]];
            if (i < n_train) res.train.push_back(s);
            else if (i < n_train + n_valid) res.valid.push_back(s);
            else res.test.push_back(s);
        }
        return res;
    }

    // Inductive: reserve a seeded entity subset; every statement touching a
    // reserved entity is held out, so reserved entities never occur in train.
    std::unordered_set<Id> entity_set;
    for (const auto& s : statements) {
        entity_set.insert(s.head);
        entity_set.insert(s.tail);
    }
    std::vector<Id> entities(entity_set.begin(), entity_set.end());
    std::sort(entities.begin(), entities.end());
    std::shuffle(entities.begin(), entities.end(), rng);

    const double held_fraction = spec.valid_fraction + spec.test_fraction;
    const size_t target = std::max<size_t>(1, static_cast<size_t>(std::llround(held_fraction * static_cast<double>(n))));

    std::unordered_set<Id> reserved;
    auto held_count = [&] {
        size_t c = 0;
        for (const auto& s : statements)
            if (reserved.count(s.head) || reserved.count(s.tail)) ++c;
        return c;
    };
    for (Id e : entities) {
        if (held_count() >= target) break;
        reserved.insert(e);
    }
    std::vector<size_t> held, kept;
    for (size_t i = 0; i < n; ++i) {
        if (reserved.count(statements[i].head) || reserved.count(statements[i].tail)) held.push_back(i);
        else kept.push_back(i);
    }
    if (held.empty() || kept.empty())
        throw std::runtime_error("split: inductive split infeasible, graph too small to reserve entities");

    std::shuffle(held.begin(), held.end(), rng);
    const double vt = spec.valid_fraction + spec.test_fraction;
    size_t n_valid = static_cast<size_t>(std::llround(spec.valid_fraction / vt * static_cast<double>(held.size())));
    n_valid = std::min(n_valid, held.size() - 1);  // keep test non-empty
    for (size_t i = 0; i < held.size(); ++i) {
        if (i < n_valid) res.valid.push_back(statements[held[i]]);
        else res.test.push_back(statements[held[i]]);
    }
    for (size_t i : kept) res.train.push_back(statements[i]);

    // definitional check on output
    std::unordered_set<Id> train_entities;
    for (const auto& s : res.train) {
        train_entities.insert(s.head);
        train_entities.insert(s.tail);
    }
    bool unseen = false;
    for (const auto& s : res.test)
        if (!train_entities.count(s.head) || !train_entities.count(s.tail)) unseen = true;
    if (!unseen) throw std::runtime_error("split: inductive split infeasible, no unseen test entity");
    return res;
}

}  // namespace alertstar
