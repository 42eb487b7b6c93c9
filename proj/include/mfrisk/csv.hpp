#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "mfrisk/errors.hpp"

namespace mfrisk::csv {

inline std::string_view trim_cr(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

inline double parse_double(std::string_view field, std::size_t row, std::string_view col) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw input_error("row " + std::to_string(row) + ": bad numeric value '" +
                          std::string(field) + "' in column " + std::string(col));
    return value;
}

inline long parse_long(std::string_view field, std::size_t row, std::string_view col) {
    long value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw input_error("row " + std::to_string(row) + ": bad integer value '" +
                          std::string(field) + "' in column " + std::string(col));
    return value;
}

// Reads a header line and verifies it matches; returns data rows split on
// commas, paired with their 1-based file row numbers.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> read_table(
    std::istream& in, std::string_view expected_header) {
    std::string line;
    if (!std::getline(in, line))
        throw input_error("empty input: expected header '" + std::string(expected_header) + "'");
    if (trim_cr(line) != expected_header)
        throw input_error("bad header '" + std::string(trim_cr(line)) + "': expected '" +
                          std::string(expected_header) + "'");
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        const std::string_view body = trim_cr(line);
        if (body.empty()) continue;
        rows.emplace_back(row_no, split(body));
    }
    return rows;
}

// Shortest representation that round-trips, in plain decimal notation;
// keeps emitted files byte-stable.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (std::string_view(buf, ptr).find('e') != std::string_view::npos) {
        const auto [fptr, fec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
        if (fec == std::errc{}) ptr = fptr;
    }
    return std::string(buf, ptr);
}

}  // namespace mfrisk::csv
