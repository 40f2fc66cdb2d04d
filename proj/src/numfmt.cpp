#include "cted/numfmt.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace cted {

std::string format_number(double x) {
    if (x == 0.0) return "0"; // collapse -0
    if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");

    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x); // shortest round-trip
    *res.ptr = '\0';

    // Count significant digits; fall back to 9-digit general format when over.
    int sig = 0;
    bool counting = false;
    for (const char* p = buf; *p && *p != 'e' && *p != 'E'; ++p) {
        if (*p >= '0' && *p <= '9') {
            if (*p != '0') counting = true;
            if (counting) ++sig;
        }
    }
    if (sig <= 9) return std::string(buf);

    char buf9[64];
    std::snprintf(buf9, sizeof(buf9), "%.9g", x);
    return std::string(buf9);
}

double round9(double x) {
    std::string s = format_number(x);
    return std::strtod(s.c_str(), nullptr);
}

} // namespace cted
