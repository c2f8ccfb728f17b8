#pragma once
// Qualified alert statements and the string<->id vocabularies, plus the
// line-oriented statement / vocab file formats.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace alertstar {

using Id = int64_t;

struct QualPair {
    Id key;
    Id value;
    bool operator==(const QualPair&) const = default;
};

// One alert fact (h, r, t, Q). Head/tail are IPs, the relation is the attack
// category, qualifiers carry flow-level metadata.
struct QualifiedStatement {
    Id head = -1;
    Id relation = -1;
    Id tail = -1;
    std::vector<QualPair> qualifiers;

    bool operator==(const QualifiedStatement&) const = default;
};

class StringTable {
public:
    Id intern(const std::string& s) {
        auto it = index_.find(s);
        if (it != index_.end()) return it->second;
        const Id id = static_cast<Id>(names_.size());
        index_.emplace(s, id);
        names_.push_back(s);
        return id;
    }
    Id lookup(const std::string& s) const {
        auto it = index_.find(s);
        if (it == index_.end()) throw std::out_of_range("vocab: unknown string '" + s + "'");
        return it->second;
    }
    bool contains(const std::string& s) const { return index_.count(s) != 0; }
    const std::string& name(Id id) const {
        if (id < 0 || id >= static_cast<Id>(names_.size()))
            throw std::out_of_range("vocab: id " + std::to_string(id) + " outside table of " +
                                    std::to_string(names_.size()));
        return names_[static_cast<size_t>(id)];
    }
    Id size() const { return static_cast<Id>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

private:
    std::unordered_map<std::string, Id> index_;
    std::vector<std::string> names_;
};

struct Vocab {
    StringTable entities;
    StringTable relations;
    StringTable qual_keys;
    StringTable qual_values;

    Id num_entities() const { return entities.size(); }
    Id num_relations() const { return relations.size(); }
    Id num_qual_keys() const { return qual_keys.size(); }
    Id num_qual_values() const { return qual_values.size(); }

    // FNV-1a over every (kind, string, id) line; identifies a vocabulary for
    // checkpoint/data compatibility checks.
    uint64_t hash() const {
        uint64_t h = 1469598103934665603ull;
        auto feed = [&h](const std::string& s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 1099511628211ull;
            }
        };
        auto feed_table = [&](const char* kind, const StringTable& t) {
            for (Id i = 0; i < t.size(); ++i) {
                feed(kind);
                feed("\t");
                feed(t.name(i));
                feed("\t");
                feed(std::to_string(i));
                feed("\n");
            }
        };
        feed_table("entity", entities);
        feed_table("relation", relations);
        feed_table("qual_key", qual_keys);
        feed_table("qual_value", qual_values);
        return h;
    }
};

// ---------------------------------------------------------------------------
// file formats
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

// statement line: h \t r \t t \t qk1 \t qv1 \t qk2 \t qv2 ...
inline void write_statements(std::ostream& os, const std::vector<QualifiedStatement>& statements,
                             const Vocab& vocab) {
    for (const auto& s : statements) {
        os << vocab.entities.name(s.head) << '\t' << vocab.relations.name(s.relation) << '\t'
           << vocab.entities.name(s.tail);
        for (const auto& q : s.qualifiers)
            os << '\t' << vocab.qual_keys.name(q.key) << '\t' << vocab.qual_values.name(q.value);
        os << '\n';
    }
}

inline void write_statements_file(const std::string& path, const std::vector<QualifiedStatement>& statements,
                                  const Vocab& vocab) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_statements(os, statements, vocab);
}

// Re-parses statement lines against an existing vocabulary when strict, or
// growing the vocabulary otherwise.
inline std::vector<QualifiedStatement> read_statements(std::istream& is, Vocab& vocab, bool grow_vocab) {
    std::vector<QualifiedStatement> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_fields(line, '\t');
        if (f.size() < 3 || (f.size() - 3) % 2 != 0)
            throw std::runtime_error("statement line " + std::to_string(lineno) + ": expected h,r,t plus key/value pairs");
        QualifiedStatement s;
        if (grow_vocab) {
            s.head = vocab.entities.intern(f[0]);
            s.relation = vocab.relations.intern(f[1]);
            s.tail = vocab.entities.intern(f[2]);
        } else {
            s.head = vocab.entities.lookup(f[0]);
            s.relation = vocab.relations.lookup(f[1]);
            s.tail = vocab.entities.lookup(f[2]);
        }
        for (size_t i = 3; i + 1 < f.size(); i += 2) {
            QualPair q;
            if (grow_vocab) {
                q.key = vocab.qual_keys.intern(f[i]);
                q.value = vocab.qual_values.intern(f[i + 1]);
            } else {
                q.key = vocab.qual_keys.lookup(f[i]);
                q.value = vocab.qual_values.lookup(f[i + 1]);
            }
            s.qualifiers.push_back(q);
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<QualifiedStatement> read_statements_file(const std::string& path, Vocab& vocab,
                                                            bool grow_vocab = false) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return read_statements(is, vocab, grow_vocab);
}

// vocab line: kind \t string \t id
inline void write_vocab(std::ostream& os, const Vocab& vocab) {
    auto dump = [&os](const char* kind, const StringTable& t) {
        for (Id i = 0; i < t.size(); ++i) os << kind << '\t' << t.name(i) << '\t' << i << '\n';
    };
    dump("entity", vocab.entities);
    dump("relation", vocab.relations);
    dump("qual_key", vocab.qual_keys);
    dump("qual_value", vocab.qual_values);
}

inline void write_vocab_file(const std::string& path, const Vocab& vocab) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_vocab(os, vocab);
}

inline Vocab read_vocab(std::istream& is) {
    Vocab v;
    std::string line;
    size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = split_fields(line, '\t');
        if (f.size() != 3) throw std::runtime_error("vocab line " + std::to_string(lineno) + ": expected kind,string,id");
        StringTable* table = nullptr;
        if (f[0] == "entity") table = &v.entities;
        else if (f[0] == "relation") table = &v.relations;
        else if (f[0] == "qual_key") table = &v.qual_keys;
        else if (f[0] == "qual_value") table = &v.qual_values;
        else throw std::runtime_error("vocab line " + std::to_string(lineno) + ": unknown kind '" + f[0] + "'");
        const Id id = table->intern(f[1]);
        if (id != std::stoll(f[2]))
            throw std::runtime_error("vocab line " + std::to_string(lineno) + ": ids must be dense and in order");
    }
    return v;
}

inline Vocab read_vocab_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return read_vocab(is);
}

}  // namespace alertstar
