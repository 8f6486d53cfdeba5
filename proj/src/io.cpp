#include "biasci/io.hpp"

#include <cstdio>

namespace biasci {

namespace {

std::string fmt_g(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

} // namespace

std::string fmt_csv(double v) { return fmt_g(v, 15); }

std::string fmt_human(double v) { return fmt_g(v, 6); }

} // namespace biasci
