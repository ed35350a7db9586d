#include "rarefind/csv.hpp"

#include <cerrno>
#include <cstdlib>

namespace rarefind {

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(split_csv_line(line));
    }
    return rows;
}

double parse_double(const std::string& text, const std::string& where) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0' || errno == ERANGE)
        throw ConfigError(where + ": not a number: '" + text + "'");
    return v;
}

long long parse_int(const std::string& text, const std::string& where) {
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0' || errno == ERANGE)
        throw ConfigError(where + ": not an integer: '" + text + "'");
    return v;
}

}  // namespace rarefind
