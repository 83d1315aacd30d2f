#pragma once

#include <cstdio>
#include <cstdlib>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recall/errors.hpp"

namespace recall {

/// Full-precision decimal form; %.17g round-trips every double exactly.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view s) {
    std::string tmp(s);
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (end == tmp.c_str() || *end != '\0')
        throw IOError("parse_double: bad numeric field '" + tmp + "'");
    return v;
}

/// Space-separated vector of full-precision doubles.
inline std::string format_vector(std::span<const double> values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out.push_back(' ');
        out += format_double(values[i]);
    }
    return out;
}

inline std::vector<double> parse_vector(std::string_view s) {
    std::vector<double> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') ++i;
        const std::size_t start = i;
        while (i < s.size() && s[i] != ' ') ++i;
        if (i > start) out.push_back(parse_double(s.substr(start, i - start)));
    }
    return out;
}

} // namespace recall
