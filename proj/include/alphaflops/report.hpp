#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "alphaflops/alpha.hpp"
#include "alphaflops/dataset.hpp"
#include "alphaflops/error.hpp"
#include "alphaflops/layer.hpp"

namespace alphaflops {

struct ReportRow {
    LayerDescriptor layer;
    std::uint64_t flops = 0;
    double alpha = 1.0;
    double alpha_flops = 0.0;
    std::optional<double> predicted_ms;
    std::optional<double> measured_ms;
    std::optional<double> ape;  // percent
};

inline ReportRow report_row(const LayerDescriptor& layer, const AlphaParams& params) {
    ReportRow row;
    row.layer = layer;
    row.flops = layer_flops(layer);
    row.alpha = alpha_factor(alpha_input_of(layer), params);
    row.alpha_flops = static_cast<double>(row.flops) * row.alpha;
    row.predicted_ms = predicted_time(layer, params) * 1e3;
    return row;
}

inline std::vector<ReportRow> build_report(const std::vector<LayerDescriptor>& layers,
                                           const AlphaParams& params) {
    std::vector<ReportRow> rows;
    rows.reserve(layers.size());
    for (const LayerDescriptor& layer : layers) rows.push_back(report_row(layer, params));
    return rows;
}

inline std::vector<ReportRow> build_report(const std::vector<TimingRecord>& records,
                                           const AlphaParams& params) {
    std::vector<ReportRow> rows;
    rows.reserve(records.size());
    for (const TimingRecord& rec : records) {
        ReportRow row = report_row(rec.layer, params);
        row.measured_ms = rec.time_ms;
        row.ape = std::abs(*row.predicted_ms - rec.time_ms) / rec.time_ms * 100.0;
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// TSV report: one row per layer, '#' footer lines with summary statistics.
// Tabs separate columns (datasets are comma-separated; keeping the formats
// distinct prevents accidental cross-feeding).
// ---------------------------------------------------------------------------

inline std::string format_report_tsv(const std::vector<ReportRow>& rows) {
    std::string out =
        "layer\tflops\talpha\talpha_flops\tpredicted_ms\tmeasured_ms\tape_pct\n";
    double sum_ape = 0.0, max_ape = 0.0;
    std::size_t n_ape = 0;
    for (const ReportRow& row : rows) {
        out += format_layer(row.layer);
        out += '\t' + std::to_string(row.flops);
        out += '\t' + detail::format_double(row.alpha);
        out += '\t' + detail::format_double(row.alpha_flops);
        out += '\t';
        if (row.predicted_ms) out += detail::format_double(*row.predicted_ms);
        out += '\t';
        if (row.measured_ms) out += detail::format_double(*row.measured_ms);
        out += '\t';
        if (row.ape) {
            out += detail::format_double(*row.ape);
            sum_ape += *row.ape;
            max_ape = std::max(max_ape, *row.ape);
            ++n_ape;
        }
        out += '\n';
    }
    out += "# records = " + std::to_string(rows.size()) + "\n";
    if (n_ape > 0) {
        out += "# mape_pct = " +
               detail::format_double(sum_ape / static_cast<double>(n_ape)) + "\n";
        out += "# max_ape_pct = " + detail::format_double(max_ape) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// SVG sweep charts: measured solid, predicted dashed, one chart per group of
// near-equal-FLOPs rows. A data table rides along in a comment so tests can
// diff plots without pixel comparisons.
// ---------------------------------------------------------------------------

inline std::vector<std::vector<std::size_t>> group_report_rows(
    const std::vector<ReportRow>& rows) {
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        bool fresh = groups.empty();
        if (!fresh) {
            double head =
                static_cast<double>(rows[groups.back().front()].flops);
            double f = static_cast<double>(rows[i].flops);
            fresh = std::abs(f - head) > 0.10 * head;
        }
        if (fresh) groups.emplace_back();
        groups.back().push_back(i);
    }
    return groups;
}

inline std::string render_sweep_svg(const std::vector<ReportRow>& rows,
                                    const std::vector<std::size_t>& group) {
    const double width = 640.0, height = 400.0;
    const double left = 60.0, right = 620.0, top = 30.0, bottom = 360.0;

    double y_max = 0.0;
    for (std::size_t i : group) {
        if (rows[i].predicted_ms) y_max = std::max(y_max, *rows[i].predicted_ms);
        if (rows[i].measured_ms) y_max = std::max(y_max, *rows[i].measured_ms);
    }
    if (y_max <= 0.0) y_max = 1.0;
    y_max *= 1.05;

    auto x_of = [&](std::size_t pos) {
        if (group.size() < 2) return (left + right) / 2.0;
        return left + (right - left) * static_cast<double>(pos) /
                          static_cast<double>(group.size() - 1);
    };
    auto y_of = [&](double ms) { return bottom - (bottom - top) * (ms / y_max); };
    auto fmt = [](double v) { return detail::format_double(v); };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      fmt(width) + "\" height=\"" + fmt(height) + "\" viewBox=\"0 0 " +
                      fmt(width) + " " + fmt(height) + "\">\n";
    svg += "<!-- data\nindex\tlayer\tmeasured_ms\tpredicted_ms\n";
    for (std::size_t pos = 0; pos < group.size(); ++pos) {
        const ReportRow& row = rows[group[pos]];
        svg += std::to_string(pos) + '\t' + format_layer(row.layer) + '\t';
        if (row.measured_ms) svg += fmt(*row.measured_ms);
        svg += '\t';
        if (row.predicted_ms) svg += fmt(*row.predicted_ms);
        svg += '\n';
    }
    svg += "-->\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + fmt(width) + "\" height=\"" +
           fmt(height) + "\" fill=\"white\"/>\n";
    svg += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(bottom) + "\" x2=\"" +
           fmt(right) + "\" y2=\"" + fmt(bottom) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top) + "\" x2=\"" + fmt(left) +
           "\" y2=\"" + fmt(bottom) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt(left) + "\" y=\"20\" font-size=\"12\">time_ms (max " +
           fmt(y_max) + ")</text>\n";

    auto polyline = [&](bool measured) {
        std::string points;
        for (std::size_t pos = 0; pos < group.size(); ++pos) {
            const ReportRow& row = rows[group[pos]];
            const std::optional<double>& v =
                measured ? row.measured_ms : row.predicted_ms;
            if (!v) continue;
            if (!points.empty()) points += ' ';
            points += fmt(x_of(pos)) + ',' + fmt(y_of(*v));
        }
        if (points.empty()) return std::string();
        std::string style = measured ? "stroke=\"#1030a0\""
                                     : "stroke=\"#c03020\" stroke-dasharray=\"6 3\"";
        return "<polyline fill=\"none\" " + style + " stroke-width=\"2\" points=\"" +
               points + "\"/>\n";
    };
    svg += polyline(true);
    svg += polyline(false);
    svg += "</svg>\n";
    return svg;
}

/// One SVG per sweep group, named <prefix>-<n>.svg. Returns the paths.
inline std::vector<std::string> write_plots(const std::vector<ReportRow>& rows,
                                            const std::string& prefix) {
    std::vector<std::string> paths;
    auto groups = group_report_rows(rows);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::string path = prefix + "-" + std::to_string(g + 1) + ".svg";
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write plot: " + path);
        out << render_sweep_svg(rows, groups[g]);
        if (!out) throw DataError("write failed: " + path);
        paths.push_back(path);
    }
    return paths;
}

}  // namespace alphaflops
