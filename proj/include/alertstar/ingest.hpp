#pragma once
// Alert-record ingestion: header-bearing delimited text -> qualified
// statements plus vocab. Numeric qualifiers are bucketed so the qualifier
// value vocabulary stays bounded and values are shared across statements:
//   flow count  -> floor(log10) decade buckets
//   port        -> exact id below 1024, "ephemeral" above
//   detect time -> hour-of-day bucket
//   protocol    -> kept verbatim

#include <cctype>
#include <cmath>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "alertstar/data.hpp"

namespace alertstar {

struct SchemaConfig {
    bool include_detect_time = true;
    bool include_flow_count = true;
    bool include_port = true;
    bool include_protocol = true;
    int well_known_port_limit = 1024;
};

struct RejectedRecord {
    size_t line;
    std::string reason;
};

struct IngestResult {
    std::vector<QualifiedStatement> statements;
    Vocab vocab;
    std::vector<RejectedRecord> rejected;
};

namespace detail {

inline bool valid_ipv4(const std::string& s) {
    int dots = 0, octet = -1, digits = 0;
    for (char c : s) {
        if (c == '.') {
            if (digits == 0 || octet > 255) return false;
            ++dots;
            octet = -1;
            digits = 0;
        } else if (c >= '0' && c <= '9') {
            octet = (octet < 0 ? 0 : octet) * 10 + (c - '0');
            if (++digits > 3) return false;
        } else {
            return false;
        }
    }
    return dots == 3 && digits > 0 && octet <= 255;
}

inline std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace detail

inline std::string flow_count_bucket(long long v) {
    if (v <= 0) return "0";
    const int k = static_cast<int>(std::floor(std::log10(static_cast<double>(v))));
    return "1e" + std::to_string(k) + "-1e" + std::to_string(k + 1);
}

inline std::string port_bucket(long long port, const SchemaConfig& cfg) {
    if (port < cfg.well_known_port_limit) return std::to_string(port);
    return "ephemeral";
}

// Accepts "YYYY-MM-DD HH:MM[:SS]" and ISO "YYYY-MM-DDTHH:MM[:SS]"; the bucket
// is the hour of day.
inline std::optional<std::string> hour_bucket(const std::string& ts) {
    size_t sep = ts.find(' ');
    if (sep == std::string::npos) sep = ts.find('T');
    if (sep == std::string::npos || sep + 3 > ts.size()) return std::nullopt;
    const std::string hh = ts.substr(sep + 1, 2);
    if (hh.size() != 2 || !std::isdigit(static_cast<unsigned char>(hh[0])) ||
        !std::isdigit(static_cast<unsigned char>(hh[1])))
        return std::nullopt;
    const int h = std::stoi(hh);
    if (h < 0 || h > 23) return std::nullopt;
    return "h" + std::string(h < 10 ? "0" : "") + std::to_string(h);
}

inline IngestResult parse_alert_records(std::istream& in, const SchemaConfig& cfg = {}) {
    IngestResult res;
    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("alert input: no records");
    const char delim = header.find('\t') != std::string::npos ? '\t' : ',';

    auto cols = split_fields(header, delim);
    int c_time = -1, c_flow = -1, c_src = -1, c_dst = -1, c_port = -1, c_proto = -1, c_cat = -1;
    for (size_t i = 0; i < cols.size(); ++i) {
        const std::string name = detail::trim(cols[i]);
        if (name == "DetectTime") c_time = static_cast<int>(i);
        else if (name == "FlowCount") c_flow = static_cast<int>(i);
        else if (name == "SourceIP") c_src = static_cast<int>(i);
        else if (name == "TargetIP") c_dst = static_cast<int>(i);
        else if (name == "Port") c_port = static_cast<int>(i);
        else if (name == "Protocol") c_proto = static_cast<int>(i);
        else if (name == "Category") c_cat = static_cast<int>(i);
    }
    if (c_src < 0 || c_dst < 0 || c_cat < 0)
        throw std::runtime_error("alert input: header must name SourceIP, TargetIP and Category columns");

    const Id k_time = res.vocab.qual_keys.intern("detectTime");
    const Id k_flow = res.vocab.qual_keys.intern("flowCount");
    const Id k_port = res.vocab.qual_keys.intern("port");
    const Id k_proto = res.vocab.qual_keys.intern("protocol");

    std::string line;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        auto f = split_fields(line, delim);
        auto field = [&](int c) -> std::string {
            return (c >= 0 && c < static_cast<int>(f.size())) ? detail::trim(f[c]) : std::string();
        };
        const std::string src = field(c_src), dst = field(c_dst), cat = field(c_cat);
        if (src.empty() || dst.empty() || cat.empty()) {
            res.rejected.push_back({lineno, "missing mandatory field (SourceIP/TargetIP/Category)"});
            continue;
        }
        if (!detail::valid_ipv4(src)) {
            res.rejected.push_back({lineno, "malformed source IP '" + src + "'"});
            continue;
        }
        if (!detail::valid_ipv4(dst)) {
            res.rejected.push_back({lineno, "malformed target IP '" + dst + "'"});
            continue;
        }
        if (src == dst) {
            res.rejected.push_back({lineno, "source equals target; one role per IP per alert"});
            continue;
        }

        QualifiedStatement s;
        s.head = res.vocab.entities.intern(src);
        s.relation = res.vocab.relations.intern(cat);
        s.tail = res.vocab.entities.intern(dst);

        bool bad = false;
        const std::string ts = field(c_time);
        if (cfg.include_detect_time && !ts.empty()) {
            auto b = hour_bucket(ts);
            if (!b) {
                res.rejected.push_back({lineno, "unparseable DetectTime '" + ts + "'"});
                bad = true;
            } else {
                s.qualifiers.push_back({k_time, res.vocab.qual_values.intern(*b)});
            }
        }
        const std::string fc = field(c_flow);
        if (!bad && cfg.include_flow_count && !fc.empty()) {
            try {
                const long long v = std::stoll(fc);
                if (v < 0) throw std::invalid_argument("negative");
                s.qualifiers.push_back({k_flow, res.vocab.qual_values.intern(flow_count_bucket(v))});
            } catch (const std::exception&) {
                res.rejected.push_back({lineno, "unparseable FlowCount '" + fc + "'"});
                bad = true;
            }
        }
        const std::string pt = field(c_port);
        if (!bad && cfg.include_port && !pt.empty()) {
            try {
                const long long v = std::stoll(pt);
                if (v < 0 || v > 65535) throw std::invalid_argument("range");
                s.qualifiers.push_back({k_port, res.vocab.qual_values.intern(port_bucket(v, cfg))});
            } catch (const std::exception&) {
                res.rejected.push_back({lineno, "unparseable Port '" + pt + "'"});
                bad = true;
            }
        }
        const std::string pr = field(c_proto);
        if (!bad && cfg.include_protocol && !pr.empty())
            s.qualifiers.push_back({k_proto, res.vocab.qual_values.intern(pr)});

        if (!bad) res.statements.push_back(std::move(s));
    }
    if (res.statements.empty() && res.rejected.empty()) throw std::runtime_error("alert input: no records");
    return res;
}

}  // namespace alertstar
