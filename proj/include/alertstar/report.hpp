#pragma once
// Metric reports: a machine-readable TSV and an aligned plain-text table
// with the MR / MRR / H@1 / H@3 / H@10 column layout.

#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "alertstar/metrics.hpp"

namespace alertstar {

struct ReportRow {
    std::string label;
    RankingReport report;
    std::optional<double> accuracy;  // relation head only
    bool absent = false;             // e.g. a query type with no instances
};

inline std::string format_metric(double v, int width = 10) {
    std::ostringstream os;
    os << std::setw(width) << std::fixed << std::setprecision(4) << v;
    return os.str();
}

inline std::string render_report_table(const std::string& title, const std::vector<ReportRow>& rows,
                                       bool with_accuracy = false) {
    std::ostringstream os;
    size_t label_w = 5;
    for (const auto& r : rows) label_w = std::max(label_w, r.label.size());
    os << title << '\n';
    os << std::left << std::setw(static_cast<int>(label_w + 2)) << "model" << std::right << std::setw(10) << "MR"
       << std::setw(10) << "MRR" << std::setw(10) << "H@1" << std::setw(10) << "H@3" << std::setw(10) << "H@10";
    if (with_accuracy) os << std::setw(10) << "Acc";
    os << '\n';
    for (const auto& r : rows) {
        os << std::left << std::setw(static_cast<int>(label_w + 2)) << r.label << std::right;
        if (r.absent) {
            for (int i = 0; i < 5 + (with_accuracy ? 1 : 0); ++i) os << std::setw(10) << "absent";
        } else {
            os << format_metric(r.report.mr) << format_metric(r.report.mrr) << format_metric(r.report.hits1)
               << format_metric(r.report.hits3) << format_metric(r.report.hits10);
            if (with_accuracy) {
                if (r.accuracy) os << format_metric(*r.accuracy);
                else os << std::setw(10) << "-";
            }
        }
        os << '\n';
    }
    return os.str();
}

inline void write_report_tsv(const std::string& path, const std::vector<ReportRow>& rows,
                             const std::string& split_label, const std::string& regime_label) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "label\tsplit\tregime\tMR\tMRR\tH1\tH3\tH10\tAcc\tqueries\n";
    os.precision(17);
    for (const auto& r : rows) {
        os << r.label << '\t' << split_label << '\t' << regime_label << '\t';
        if (r.absent) {
            os << "absent\tabsent\tabsent\tabsent\tabsent\t-\t0\n";
            continue;
        }
        os << r.report.mr << '\t' << r.report.mrr << '\t' << r.report.hits1 << '\t' << r.report.hits3 << '\t'
           << r.report.hits10 << '\t';
        if (r.accuracy) os << *r.accuracy;
        else os << '-';
        os << '\t' << r.report.ranks.size() << '\n';
    }
}

}  // namespace alertstar
