#pragma once

#include <cstdio>
#include <initializer_list>
#include <string>
#include <vector>

namespace dtsl::csv {

// Floats are written with 6 significant digits.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    return out;
}

inline std::string join(std::initializer_list<std::string> cells) { return join(std::vector<std::string>(cells)); }

}  // namespace dtsl::csv
