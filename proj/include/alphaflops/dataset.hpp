#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "alphaflops/alpha.hpp"
#include "alphaflops/error.hpp"
#include "alphaflops/layer.hpp"

namespace alphaflops {

// ---------------------------------------------------------------------------
// Timing observations
// ---------------------------------------------------------------------------

struct TimingRecord {
    LayerDescriptor layer;
    std::string device;
    double time_ms = 0.0;  // mean or median of repeated runs
    std::uint64_t runs = 1;
    std::optional<double> time_std_ms;

    friend bool operator==(const TimingRecord&, const TimingRecord&) = default;
};

inline void validate(const TimingRecord& r) {
    validate(r.layer);
    if (r.device.empty())
        throw std::invalid_argument("record: device label must be non-empty");
    if (!(r.time_ms > 0.0))
        throw std::invalid_argument("record: time_ms must be > 0");
    if (r.runs < 1) throw std::invalid_argument("record: runs must be >= 1");
    if (r.time_std_ms && !(*r.time_std_ms >= 0.0))
        throw std::invalid_argument("record: time_std_ms must be >= 0");
}

// ---------------------------------------------------------------------------
// CSV schema (comma-separated, UTF-8, header required, no quoting)
//
//   device,layer,w,h,cin,cout,k1,k2,stride,pad,batch,time_ms,runs,time_std_ms
//
// layer is dense or conv2d; dense rows carry d_in/d_out in cin/cout and use
// w=h=k1=k2=1, stride=1, pad=same, batch=1. time_std_ms may be empty.
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 14> kDatasetColumns = {
    "device", "layer",  "w",   "h",   "cin",     "cout", "k1",
    "k2",     "stride", "pad", "batch", "time_ms", "runs", "time_std_ms"};

namespace detail {

enum DatasetColumn : std::size_t {
    kColDevice = 0, kColLayer, kColW, kColH, kColCin, kColCout, kColK1,
    kColK2, kColStride, kColPad, kColBatch, kColTimeMs, kColRuns, kColTimeStdMs
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        std::string_view field = comma == std::string_view::npos
                                     ? line.substr(start)
                                     : line.substr(start, comma - start);
        fields.emplace_back(trim(field));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, eol - pos));
        pos = eol + 1;
    }
    return lines;
}

inline std::uint64_t parse_col_uint(const std::string& value, std::string_view column,
                                    const std::string& where) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size() || v < 1)
        throw DataError(where + ": column \"" + std::string(column) +
                        "\": expected positive integer, got \"" + value + "\"");
    return v;
}

inline double parse_col_double(const std::string& value, std::string_view column,
                               const std::string& where) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw DataError(where + ": column \"" + std::string(column) +
                        "\": expected a number, got \"" + value + "\"");
    return v;
}

inline TimingRecord record_from_fields(const std::array<std::string, 14>& f,
                                       const std::string& where) {
    TimingRecord rec;
    rec.device = f[kColDevice];
    if (rec.device.empty())
        throw DataError(where + ": column \"device\": must be non-empty");

    const std::string& kind = f[kColLayer];
    std::uint64_t w = parse_col_uint(f[kColW], "w", where);
    std::uint64_t h = parse_col_uint(f[kColH], "h", where);
    std::uint64_t cin = parse_col_uint(f[kColCin], "cin", where);
    std::uint64_t cout = parse_col_uint(f[kColCout], "cout", where);
    std::uint64_t k1 = parse_col_uint(f[kColK1], "k1", where);
    std::uint64_t k2 = parse_col_uint(f[kColK2], "k2", where);
    std::uint64_t stride = parse_col_uint(f[kColStride], "stride", where);
    std::uint64_t batch = parse_col_uint(f[kColBatch], "batch", where);

    Padding pad;
    if (f[kColPad] == "same")
        pad = Padding::Same;
    else if (f[kColPad] == "valid")
        pad = Padding::Valid;
    else
        throw DataError(where + ": column \"pad\": expected same or valid, got \"" +
                        f[kColPad] + "\"");

    if (kind == "dense") {
        if (w != 1 || h != 1 || k1 != 1 || k2 != 1 || stride != 1 || batch != 1 ||
            pad != Padding::Same)
            throw DataError(where +
                            ": dense rows require w=h=k1=k2=1, stride=1, pad=same, "
                            "batch=1 (batched dense goes through conv2d rows)");
        rec.layer = DenseDescriptor{cin, cout, true};
    } else if (kind == "conv2d") {
        Conv2dDescriptor c{w, h, cin, cout, k1, k2, stride, pad, batch};
        try {
            validate(c);
        } catch (const std::invalid_argument& e) {
            throw DataError(where + ": " + e.what());
        }
        rec.layer = c;
    } else {
        throw DataError(where + ": column \"layer\": expected dense or conv2d, got \"" +
                        kind + "\"");
    }

    rec.time_ms = parse_col_double(f[kColTimeMs], "time_ms", where);
    if (!(rec.time_ms > 0.0))
        throw DataError(where + ": column \"time_ms\": must be > 0");
    rec.runs = parse_col_uint(f[kColRuns], "runs", where);
    if (!f[kColTimeStdMs].empty()) {
        double std_ms = parse_col_double(f[kColTimeStdMs], "time_std_ms", where);
        if (!(std_ms >= 0.0))
            throw DataError(where + ": column \"time_std_ms\": must be >= 0");
        rec.time_std_ms = std_ms;
    }
    return rec;
}

// Maps header names to canonical column slots; order free, all required,
// duplicates and strangers rejected.
inline std::array<std::size_t, 14> resolve_header(const std::vector<std::string>& header,
                                                  const std::string& where) {
    std::array<std::size_t, 14> slot_of;
    slot_of.fill(SIZE_MAX);
    for (std::size_t i = 0; i < header.size(); ++i) {
        bool known = false;
        for (std::size_t c = 0; c < kDatasetColumns.size(); ++c) {
            if (header[i] == kDatasetColumns[c]) {
                if (slot_of[c] != SIZE_MAX)
                    throw DataError(where + ": duplicate column \"" + header[i] + "\"");
                slot_of[c] = i;
                known = true;
                break;
            }
        }
        if (!known)
            throw DataError(where + ": unknown column \"" + header[i] + "\"");
    }
    for (std::size_t c = 0; c < kDatasetColumns.size(); ++c)
        if (slot_of[c] == SIZE_MAX)
            throw DataError(where + ": missing column \"" +
                            std::string(kDatasetColumns[c]) + "\"");
    return slot_of;
}

}  // namespace detail

inline std::vector<TimingRecord> parse_dataset(std::string_view text,
                                               const std::string& source) {
    auto lines = detail::split_lines(text);
    std::size_t first = 0;
    while (first < lines.size() && detail::trim(lines[first]).empty()) ++first;
    if (first == lines.size()) throw DataError(source + ": missing header");

    auto header = detail::split_csv_line(detail::trim(lines[first]));
    auto slot_of = detail::resolve_header(header, source + ":" + std::to_string(first + 1));

    std::vector<TimingRecord> records;
    for (std::size_t li = first + 1; li < lines.size(); ++li) {
        std::string_view line = detail::trim(lines[li]);
        if (line.empty()) continue;
        std::string where = source + ":" + std::to_string(li + 1);
        auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError(where + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(fields.size()));
        std::array<std::string, 14> canonical;
        for (std::size_t c = 0; c < 14; ++c) canonical[c] = fields[slot_of[c]];
        records.push_back(detail::record_from_fields(canonical, where));
    }
    return records;
}

inline std::vector<TimingRecord> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), path);
}

inline std::string format_dataset(const std::vector<TimingRecord>& records) {
    std::string out;
    for (std::size_t c = 0; c < kDatasetColumns.size(); ++c) {
        if (c) out += ',';
        out += kDatasetColumns[c];
    }
    out += '\n';
    for (const TimingRecord& rec : records) {
        validate(rec);
        if (rec.device.find(',') != std::string::npos ||
            rec.device.find('\n') != std::string::npos)
            throw DataError("device label contains separator: " + rec.device);
        Conv2dDescriptor c;
        std::string kind;
        if (std::holds_alternative<DenseDescriptor>(rec.layer)) {
            kind = "dense";
            c = dense_as_conv(std::get<DenseDescriptor>(rec.layer));
        } else {
            kind = "conv2d";
            c = std::get<Conv2dDescriptor>(rec.layer);
        }
        out += rec.device + ',' + kind + ',';
        out += std::to_string(c.w_in) + ',' + std::to_string(c.h_in) + ',';
        out += std::to_string(c.c_in) + ',' + std::to_string(c.c_out) + ',';
        out += std::to_string(c.k1) + ',' + std::to_string(c.k2) + ',';
        out += std::to_string(c.stride) + ',';
        out += (c.padding == Padding::Same ? "same," : "valid,");
        out += std::to_string(c.batch) + ',';
        out += detail::format_double(rec.time_ms) + ',';
        out += std::to_string(rec.runs) + ',';
        if (rec.time_std_ms) out += detail::format_double(*rec.time_std_ms);
        out += '\n';
    }
    return out;
}

inline void save_dataset(const std::vector<TimingRecord>& records,
                         const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset: " + path);
    out << format_dataset(records);
    if (!out) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Import adapter: maps a foreign CSV layout onto the canonical schema via a
// user-supplied column-mapping file. One line per canonical column:
//
//   time_ms = gpu_mean_ms        # take values from this source column
//   stride  = const:1            # constant for every row
//   time_std_ms =                # always empty
//
// Every canonical column must be mentioned; '#' starts a comment.
// ---------------------------------------------------------------------------

struct ColumnMapping {
    // one entry per canonical column: either a source column name or a constant
    std::array<std::optional<std::string>, 14> source_column;
    std::array<std::optional<std::string>, 14> constant;
};

inline ColumnMapping parse_mapping(std::string_view text, const std::string& source) {
    ColumnMapping map;
    std::array<bool, 14> seen{};
    auto lines = detail::split_lines(text);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        std::string where = source + ":" + std::to_string(li + 1);
        std::string_view line = lines[li];
        std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw DataError(where + ": expected key = value");
        std::string key(detail::trim(line.substr(0, eq)));
        std::string value(detail::trim(line.substr(eq + 1)));

        std::size_t col = SIZE_MAX;
        for (std::size_t c = 0; c < kDatasetColumns.size(); ++c)
            if (key == kDatasetColumns[c]) col = c;
        if (col == SIZE_MAX)
            throw DataError(where + ": unknown column \"" + key + "\"");
        if (seen[col]) throw DataError(where + ": duplicate column \"" + key + "\"");
        seen[col] = true;

        if (value.empty()) {
            if (col != detail::kColTimeStdMs)
                throw DataError(where + ": only time_std_ms may map to empty");
        } else if (value.rfind("const:", 0) == 0) {
            map.constant[col] = value.substr(6);
        } else {
            map.source_column[col] = value;
        }
    }
    for (std::size_t c = 0; c < kDatasetColumns.size(); ++c)
        if (!seen[c])
            throw DataError(source + ": mapping missing column \"" +
                            std::string(kDatasetColumns[c]) + "\"");
    return map;
}

inline std::vector<TimingRecord> load_dataset_mapped(const std::string& csv_path,
                                                     const std::string& mapping_path) {
    std::ifstream map_in(mapping_path, std::ios::binary);
    if (!map_in) throw DataError("cannot open mapping file: " + mapping_path);
    std::ostringstream map_buf;
    map_buf << map_in.rdbuf();
    ColumnMapping map = parse_mapping(map_buf.str(), mapping_path);

    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset: " + csv_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    auto lines = detail::split_lines(text);
    std::size_t first = 0;
    while (first < lines.size() && detail::trim(lines[first]).empty()) ++first;
    if (first == lines.size()) throw DataError(csv_path + ": missing header");
    auto header = detail::split_csv_line(detail::trim(lines[first]));

    std::array<std::size_t, 14> slot_of;
    slot_of.fill(SIZE_MAX);
    for (std::size_t c = 0; c < kDatasetColumns.size(); ++c) {
        if (!map.source_column[c]) continue;
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == *map.source_column[c]) slot_of[c] = i;
        if (slot_of[c] == SIZE_MAX)
            throw DataError(csv_path + ": source column \"" + *map.source_column[c] +
                            "\" (mapped to " + std::string(kDatasetColumns[c]) +
                            ") not found in header");
    }

    std::vector<TimingRecord> records;
    for (std::size_t li = first + 1; li < lines.size(); ++li) {
        std::string_view line = detail::trim(lines[li]);
        if (line.empty()) continue;
        std::string where = csv_path + ":" + std::to_string(li + 1);
        auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError(where + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(fields.size()));
        std::array<std::string, 14> canonical;
        for (std::size_t c = 0; c < 14; ++c) {
            if (map.constant[c])
                canonical[c] = *map.constant[c];
            else if (map.source_column[c])
                canonical[c] = fields[slot_of[c]];
            else
                canonical[c] = "";
        }
        records.push_back(detail::record_from_fields(canonical, where));
    }
    return records;
}

}  // namespace alphaflops
