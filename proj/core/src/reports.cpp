#include "dspec/reports.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "dspec/errors.hpp"

namespace dspec {

namespace {

std::string read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open report '" + path + "'");
    std::string text;
    char buf[1 << 16];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, got);
    std::fclose(f);
    return text;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        lines.push_back(text.substr(pos, eol - pos));
        pos = eol + 1;
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

struct File {
    std::FILE* f;
    explicit File(const std::string& path) : f(std::fopen(path.c_str(), "wb")) {
        if (!f) throw IoError("cannot write report '" + path + "'");
    }
    ~File() {
        if (f) std::fclose(f);
    }
    File(const File&) = delete;
    File& operator=(const File&) = delete;
};

const char* kSweepHeader = "dataset,q,ignored_rate,error_rate";

} // namespace

void write_confusion_csv(const EvalReport& report, const std::string& path) {
    File file(path);
    std::fprintf(file.f, "true\\pred");
    for (const std::string& c : report.classes) std::fprintf(file.f, ",%s", c.c_str());
    std::fprintf(file.f, "\n");
    for (std::size_t t = 0; t < report.classes.size(); ++t) {
        std::fprintf(file.f, "%s", report.classes[t].c_str());
        for (std::size_t p = 0; p < report.classes.size(); ++p) {
            if (report.structural[t][p])
                std::fprintf(file.f, ",");
            else
                std::fprintf(file.f, ",%lld", static_cast<long long>(report.counts[t][p]));
        }
        std::fprintf(file.f, "\n");
    }
}

EvalReport parse_confusion_csv(const std::string& path) {
    const std::vector<std::string> lines = lines_of(read_file(path));
    if (lines.empty()) throw DataError("confusion csv '" + path + "' is empty");
    EvalReport report;
    const std::vector<std::string> header = split(lines[0], ',');
    for (std::size_t i = 1; i < header.size(); ++i) report.classes.push_back(header[i]);
    const std::size_t k = report.classes.size();
    if (lines.size() != k + 1)
        throw DataError("confusion csv '" + path + "' has " + std::to_string(lines.size() - 1) +
                        " rows for " + std::to_string(k) + " classes");
    report.counts.assign(k, std::vector<std::int64_t>(k, 0));
    report.structural.assign(k, std::vector<bool>(k, false));
    report.row_totals.assign(k, 0);
    std::int64_t diag = 0;
    for (std::size_t t = 0; t < k; ++t) {
        const std::vector<std::string> cells = split(lines[t + 1], ',');
        if (cells.size() != k + 1 || cells[0] != report.classes[t])
            throw DataError("confusion csv '" + path + "' row " + std::to_string(t + 1) + " malformed");
        for (std::size_t p = 0; p < k; ++p) {
            const std::string& cell = cells[p + 1];
            if (cell.empty()) {
                report.structural[t][p] = true;
                continue;
            }
            report.counts[t][p] = std::strtoll(cell.c_str(), nullptr, 10);
            report.row_totals[t] += report.counts[t][p];
        }
        diag += report.counts[t][t];
        report.total += report.row_totals[t];
    }
    report.overall_accuracy = report.total > 0 ? static_cast<double>(diag) / static_cast<double>(report.total) : 0.0;
    report.per_class_accuracy.assign(k, 0.0);
    for (std::size_t t = 0; t < k; ++t)
        if (report.row_totals[t] > 0)
            report.per_class_accuracy[t] =
                static_cast<double>(report.counts[t][t]) / static_cast<double>(report.row_totals[t]);
    return report;
}

void write_confusion_norm_csv(const EvalReport& report, const std::string& path) {
    File file(path);
    std::fprintf(file.f, "true\\pred");
    for (const std::string& c : report.classes) std::fprintf(file.f, ",%s", c.c_str());
    std::fprintf(file.f, "\n");
    for (std::size_t t = 0; t < report.classes.size(); ++t) {
        std::fprintf(file.f, "%s", report.classes[t].c_str());
        const double denom = report.row_totals[t] > 0 ? static_cast<double>(report.row_totals[t]) : 1.0;
        for (std::size_t p = 0; p < report.classes.size(); ++p) {
            if (report.structural[t][p])
                std::fprintf(file.f, ",");
            else
                std::fprintf(file.f, ",%.2f", 100.0 * static_cast<double>(report.counts[t][p]) / denom);
        }
        std::fprintf(file.f, "\n");
    }
}

void write_metrics_csv(const EvalReport& report, const std::string& path) {
    File file(path);
    std::fprintf(file.f, "metric,class,value\n");
    std::fprintf(file.f, "overall_accuracy,,%.6f\n", report.overall_accuracy);
    std::fprintf(file.f, "total,,%lld\n", static_cast<long long>(report.total));
    std::fprintf(file.f, "hazard_count,,%lld\n", static_cast<long long>(report.hazard_count));
    for (std::size_t t = 0; t < report.classes.size(); ++t) {
        if (report.row_totals[t] == 0) continue;
        std::fprintf(file.f, "class_accuracy,%s,%.6f\n", report.classes[t].c_str(),
                     report.per_class_accuracy[t]);
    }
}

void write_confusion_svg(const EvalReport& report, const std::string& path) {
    const int k = static_cast<int>(report.classes.size());
    const int cell = 26, margin = 90;
    const int size = margin + k * cell + 10;
    File file(path);
    std::fprintf(file.f, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\">\n", size, size);
    std::fprintf(file.f, "<rect width=\"%d\" height=\"%d\" fill=\"white\"/>\n", size, size);
    for (int t = 0; t < k; ++t) {
        std::fprintf(file.f,
                     "<text x=\"%d\" y=\"%d\" font-size=\"8\" text-anchor=\"end\">%s</text>\n",
                     margin - 4, margin + t * cell + cell / 2 + 3, report.classes[static_cast<std::size_t>(t)].c_str());
        std::fprintf(file.f,
                     "<text x=\"%d\" y=\"%d\" font-size=\"8\" text-anchor=\"start\" "
                     "transform=\"rotate(-60 %d %d)\">%s</text>\n",
                     margin + t * cell + cell / 2, margin - 6, margin + t * cell + cell / 2, margin - 6,
                     report.classes[static_cast<std::size_t>(t)].c_str());
    }
    for (int t = 0; t < k; ++t) {
        const double denom = report.row_totals[static_cast<std::size_t>(t)] > 0
                                 ? static_cast<double>(report.row_totals[static_cast<std::size_t>(t)])
                                 : 1.0;
        for (int p = 0; p < k; ++p) {
            const int x = margin + p * cell, y = margin + t * cell;
            if (report.structural[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]) {
                std::fprintf(file.f,
                             "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"#d8d8d8\" "
                             "stroke=\"#aaa\"/>\n",
                             x, y, cell, cell);
                continue;
            }
            const double frac = static_cast<double>(report.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]) / denom;
            const int blue = static_cast<int>(255.0 - 180.0 * frac);
            std::fprintf(file.f,
                         "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"rgb(%d,%d,255)\" "
                         "stroke=\"#aaa\"/>\n",
                         x, y, cell, cell, blue, blue);
            if (report.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] > 0)
                std::fprintf(file.f,
                             "<text x=\"%d\" y=\"%d\" font-size=\"8\" text-anchor=\"middle\"%s>%lld</text>\n",
                             x + cell / 2, y + cell / 2 + 3, frac > 0.55 ? " fill=\"white\"" : "",
                             static_cast<long long>(report.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]));
        }
    }
    std::fprintf(file.f, "</svg>\n");
}

void write_sweep_csv(const std::vector<SweepRecord>& records, const std::string& path) {
    File file(path);
    std::fprintf(file.f, "%s\n", kSweepHeader);
    for (const SweepRecord& r : records) {
        std::fprintf(file.f, "%s,%.17g,%.17g,", r.dataset.c_str(), r.q, r.ignored_rate);
        if (r.error_rate) std::fprintf(file.f, "%.17g", *r.error_rate);
        std::fprintf(file.f, "\n");
    }
}

std::vector<SweepRecord> parse_sweep_csv(const std::string& path) {
    const std::vector<std::string> lines = lines_of(read_file(path));
    if (lines.empty() || lines[0] != kSweepHeader)
        throw DataError("sweep csv '" + path + "' missing header");
    std::vector<SweepRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> cells = split(lines[i], ',');
        if (cells.size() != 4)
            throw DataError("sweep csv '" + path + "' line " + std::to_string(i + 1) + " malformed");
        SweepRecord r;
        r.dataset = cells[0];
        r.q = std::strtod(cells[1].c_str(), nullptr);
        r.ignored_rate = std::strtod(cells[2].c_str(), nullptr);
        if (!cells[3].empty()) r.error_rate = std::strtod(cells[3].c_str(), nullptr);
        out.push_back(std::move(r));
    }
    return out;
}

void write_sweep_svg(const std::vector<SweepRecord>& records, const std::string& path) {
    // ignored rates on the left axis, error rate on the right axis
    const int w = 560, h = 360, ml = 60, mr = 60, mt = 30, mb = 50;
    std::map<std::string, std::vector<const SweepRecord*>> by_dataset;
    double qmax = 0.0, emax = 0.0;
    for (const SweepRecord& r : records) {
        by_dataset[r.dataset].push_back(&r);
        qmax = std::max(qmax, r.q);
        if (r.error_rate) emax = std::max(emax, *r.error_rate);
    }
    if (qmax <= 0.0) qmax = 1.0;
    if (emax <= 0.0) emax = 0.01;
    const char* colors[] = {"#2a9d2a", "#1766b3", "#7a3fb0", "#b37617", "#17a0a8"};

    File file(path);
    std::fprintf(file.f, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\">\n", w, h);
    std::fprintf(file.f, "<rect width=\"%d\" height=\"%d\" fill=\"white\"/>\n", w, h);
    auto px = [&](double q) { return ml + (w - ml - mr) * (q / qmax); };
    auto py_left = [&](double rate) { return h - mb - (h - mt - mb) * rate; };
    auto py_right = [&](double rate) { return h - mb - (h - mt - mb) * (rate / emax); };
    std::fprintf(file.f, "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", ml, h - mb, w - mr, h - mb);
    std::fprintf(file.f, "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", ml, mt, ml, h - mb);
    std::fprintf(file.f, "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", w - mr, mt, w - mr, h - mb);
    std::fprintf(file.f, "<text x=\"%d\" y=\"%d\" font-size=\"11\">quantile</text>\n", (w - ml) / 2, h - 14);
    std::fprintf(file.f,
                 "<text x=\"14\" y=\"%d\" font-size=\"11\" transform=\"rotate(-90 14 %d)\">ignored rate</text>\n",
                 (h + mt) / 2, (h + mt) / 2);
    std::fprintf(file.f,
                 "<text x=\"%d\" y=\"%d\" font-size=\"11\" transform=\"rotate(-90 %d %d)\">error rate</text>\n",
                 w - 12, (h + mt) / 2, w - 12, (h + mt) / 2);

    int color_idx = 0, legend_y = mt;
    for (const auto& [name, rows] : by_dataset) {
        const char* color = colors[color_idx % 5];
        std::string ignored_pts, error_pts;
        char buf[64];
        for (const SweepRecord* r : rows) {
            std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(r->q), py_left(r->ignored_rate));
            ignored_pts += buf;
            if (r->error_rate) {
                std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(r->q), py_right(*r->error_rate));
                error_pts += buf;
            }
        }
        std::fprintf(file.f, "<polyline points=\"%s\" fill=\"none\" stroke=\"%s\" stroke-width=\"1.6\"/>\n",
                     ignored_pts.c_str(), color);
        if (!error_pts.empty())
            std::fprintf(file.f,
                         "<polyline points=\"%s\" fill=\"none\" stroke=\"#cc2222\" stroke-width=\"1.4\" "
                         "stroke-dasharray=\"5,3\"/>\n",
                         error_pts.c_str());
        std::fprintf(file.f, "<text x=\"%d\" y=\"%d\" font-size=\"10\" fill=\"%s\">%s ignored</text>\n",
                     ml + 8, legend_y, color, name.c_str());
        legend_y += 14;
        ++color_idx;
    }
    if (emax > 0.0)
        std::fprintf(file.f, "<text x=\"%d\" y=\"%d\" font-size=\"10\" fill=\"#cc2222\">error (dashed)</text>\n",
                     ml + 8, legend_y);
    std::fprintf(file.f, "</svg>\n");
}

} // namespace dspec
