#pragma once

// Internal helpers for byte-deterministic numeric text output.

#include <charconv>
#include <string>
#include <system_error>

namespace qccd::detail {

// Shortest decimal form that round-trips to the same double. Used for all
// CSV output so identical inputs produce identical bytes.
inline std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

}  // namespace qccd::detail
