#pragma once
// Checkpoints: a plain-text manifest (metadata plus name/shape/offset per
// tensor) alongside a flat little-endian float64 file. Loading matches
// tensors by name into an existing parameter set.

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "alertstar/data.hpp"
#include "alertstar/layers.hpp"

namespace alertstar {

static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");

struct CheckpointMeta {
    std::string model_kind;
    std::map<std::string, std::string> fields;  // config, vocab hash, best val mrr, ...
};

inline std::string checkpoint_manifest_path(const std::string& stem) { return stem + ".manifest"; }
inline std::string checkpoint_values_path(const std::string& stem) { return stem + ".f64"; }

inline void save_checkpoint(const std::string& stem, const CheckpointMeta& meta, const NamedParams& params) {
    std::ofstream mf(checkpoint_manifest_path(stem));
    if (!mf) throw std::runtime_error("cannot write " + checkpoint_manifest_path(stem));
    mf << "alertstar-checkpoint v1\n";
    mf << "meta\tmodel\t" << meta.model_kind << '\n';
    for (const auto& [k, v] : meta.fields) mf << "meta\t" << k << '\t' << v << '\n';

    std::ofstream vf(checkpoint_values_path(stem), std::ios::binary);
    if (!vf) throw std::runtime_error("cannot write " + checkpoint_values_path(stem));
    int64_t offset = 0;
    for (const auto& [name, a] : params) {
        mf << "tensor\t" << name << '\t';
        const auto& s = a.shape();
        for (size_t i = 0; i < s.size(); ++i) mf << (i ? "," : "") << s[i];
        mf << '\t' << offset << '\n';
        vf.write(reinterpret_cast<const char*>(a.values().data()),
                 static_cast<std::streamsize>(a.values().size() * sizeof(double)));
        offset += a.size();
    }
}

struct CheckpointFile {
    CheckpointMeta meta;
    struct TensorEntry {
        std::string name;
        Shape shape;
        int64_t offset;
    };
    std::vector<TensorEntry> tensors;
    std::vector<double> values;
};

inline CheckpointFile read_checkpoint(const std::string& stem) {
    std::ifstream mf(checkpoint_manifest_path(stem));
    if (!mf) throw std::runtime_error("cannot read " + checkpoint_manifest_path(stem));
    CheckpointFile ck;
    std::string line;
    if (!std::getline(mf, line) || line.rfind("alertstar-checkpoint", 0) != 0)
        throw std::runtime_error("not a checkpoint manifest: " + stem);
    while (std::getline(mf, line)) {
        if (line.empty()) continue;
        auto f = split_fields(line, '\t');
        if (f[0] == "meta" && f.size() == 3) {
            if (f[1] == "model") ck.meta.model_kind = f[2];
            else ck.meta.fields[f[1]] = f[2];
        } else if (f[0] == "tensor" && f.size() == 4) {
            CheckpointFile::TensorEntry e;
            e.name = f[1];
            for (const auto& dim : split_fields(f[2], ',')) e.shape.push_back(std::stoll(dim));
            e.offset = std::stoll(f[3]);
            ck.tensors.push_back(std::move(e));
        } else {
            throw std::runtime_error("bad manifest line: " + line);
        }
    }
    std::ifstream vf(checkpoint_values_path(stem), std::ios::binary);
    if (!vf) throw std::runtime_error("cannot read " + checkpoint_values_path(stem));
    vf.seekg(0, std::ios::end);
    const auto bytes = static_cast<size_t>(vf.tellg());
    vf.seekg(0);
    ck.values.resize(bytes / sizeof(double));
    vf.read(reinterpret_cast<char*>(ck.values.data()), static_cast<std::streamsize>(bytes));
    return ck;
}

// Overwrites matching parameters in place; every parameter must be present
// with the right shape.
inline void load_checkpoint_into(const CheckpointFile& ck, NamedParams& params) {
    std::map<std::string, const CheckpointFile::TensorEntry*> index;
    for (const auto& t : ck.tensors) index[t.name] = &t;
    for (auto& [name, a] : params) {
        auto it = index.find(name);
        if (it == index.end()) throw std::runtime_error("checkpoint missing tensor '" + name + "'");
        const auto& e = *it->second;
        if (e.shape != a.shape())
            throw std::runtime_error("checkpoint tensor '" + name + "' has shape " + shape_str(e.shape) +
                                     ", expected " + shape_str(a.shape()));
        auto& vals = a.mutable_values();
        std::memcpy(vals.data(), ck.values.data() + e.offset, vals.size() * sizeof(double));
    }
}

}  // namespace alertstar
