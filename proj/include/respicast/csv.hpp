#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "respicast/errors.hpp"

namespace respicast {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return int(i);
        return -1;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    for (;;) {
        std::size_t comma = line.find(',', pos);
        if (comma == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
        out.back().pop_back();
    return out;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty file: " + path);
    t.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        t.rows.push_back(split_csv_line(line));
    }
    return t;
}

// Shortest round-trip representation; keeps output byte-stable across runs.
inline std::string fmt_double(double x) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, p);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw DataError("bad numeric field: '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw DataError("bad integer field: '" + std::string(s) + "'");
    return v;
}

} // namespace respicast
