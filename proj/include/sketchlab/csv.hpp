#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "sketchlab/errors.hpp"

namespace sketchlab::cli {

using Cell = std::variant<std::int64_t, double, std::string>;
using Row = std::vector<Cell>;

/// Serialises a double so it round-trips (17 significant digits);
/// NaN is spelled "NaN" by convention.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "NaN";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string quote_csv(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string format_cell(const Cell& cell) {
    if (std::holds_alternative<std::int64_t>(cell))
        return std::to_string(std::get<std::int64_t>(cell));
    if (std::holds_alternative<double>(cell))
        return format_double(std::get<double>(cell));
    return quote_csv(std::get<std::string>(cell));
}

/// RFC-4180-style CSV with "\n" line endings, header from the manifest.
inline void write_csv(const std::vector<std::string>& header,
                      const std::vector<Row>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << quote_csv(header[i]);
    }
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw std::invalid_argument("write_csv: row width != header width");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << format_cell(row[i]);
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

}  // namespace sketchlab::cli
