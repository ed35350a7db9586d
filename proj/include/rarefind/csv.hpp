#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "rarefind/common.hpp"

namespace rarefind {

// Round-trip safe double formatting; shared by every CSV writer so reruns
// stay byte-identical.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

// Accumulates a whole file in memory, then a single write. Throws ConfigError
// when the path cannot be opened.
class CsvWriter {
public:
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) body_.push_back(',');
            body_ += cells[i];
        }
        body_.push_back('\n');
    }

    const std::string& str() const { return body_; }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot open for writing: " + path);
        out << body_;
        if (!out) throw ConfigError("write failed: " + path);
    }

private:
    std::string body_;
};

std::vector<std::vector<std::string>> read_csv(const std::string& path);

double parse_double(const std::string& text, const std::string& where);
long long parse_int(const std::string& text, const std::string& where);

}  // namespace rarefind
