#pragma once

// CSV ingestion for prediction-label samples and small formatting helpers.
//
// Format: a header line `v,y`, then one `v,y` record per line with v a
// decimal in [0,1] and y either 0 or 1. Blank lines are ignored, CRLF line
// endings are accepted.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "calib/core.hpp"

namespace calib {

class CsvError : public std::runtime_error {
public:
    CsvError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace detail

inline std::vector<Sample> parse_samples_csv(std::istream& in) {
    std::vector<Sample> out;
    std::string raw;
    std::size_t line = 0;
    bool header = false;
    while (std::getline(in, raw)) {
        ++line;
        const auto text = detail::trim(raw);
        if (text.empty()) continue;
        if (!header) {
            if (text != "v,y") throw CsvError(line, "expected header 'v,y'");
            header = true;
            continue;
        }
        const auto comma = text.find(',');
        if (comma == std::string_view::npos || text.find(',', comma + 1) != std::string_view::npos)
            throw CsvError(line, "expected two comma-separated fields");
        const auto vs = detail::trim(text.substr(0, comma));
        const auto ys = detail::trim(text.substr(comma + 1));
        double v = 0.0;
        const auto [end, ec] = std::from_chars(vs.data(), vs.data() + vs.size(), v);
        if (ec != std::errc() || end != vs.data() + vs.size() || vs.empty())
            throw CsvError(line, "prediction '" + std::string(vs) + "' is not a decimal number");
        if (!(v >= 0.0 && v <= 1.0)) throw CsvError(line, "prediction " + std::string(vs) + " outside [0,1]");
        if (ys != "0" && ys != "1") throw CsvError(line, "label '" + std::string(ys) + "' is not 0 or 1");
        out.push_back({v, ys == "1" ? 1 : 0});
    }
    if (!header) throw CsvError(line == 0 ? 1 : line, "missing header 'v,y'");
    if (out.empty()) throw CsvError(line, "no samples after the header");
    return out;
}

/// Shortest round-trip decimal for a prediction.
inline std::string format_prediction(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline void write_samples_csv(std::ostream& out, const std::vector<Sample>& samples) {
    out << "v,y\n";
    for (const auto& s : samples) out << format_prediction(s.v) << ',' << s.y << '\n';
}

/// Value rounded to 12 significant digits.
inline double round_significant(double x, int digits = 12) {
    if (!std::isfinite(x)) return x;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return std::stod(buf);
}

inline std::string format_significant(double x, int digits = 12) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace calib
