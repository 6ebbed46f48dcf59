#pragma once

// Internal canonical-JSON emitter: keys in sorted order (nlohmann's default
// object is map-backed), floats formatted with 17 significant digits so a
// parse/serialize round trip is bit-exact and equal policies produce
// byte-identical files.

#include <cstdint>
#include <cstdio>
#include <string>

#include <json.hpp>

namespace erta::detail {

inline std::string format_double_17g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void canonical_dump(const nlohmann::json& j, std::string& out) {
    using value_t = nlohmann::json::value_t;
    switch (j.type()) {
        case value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                out += nlohmann::json(it.key()).dump();
                out += ':';
                canonical_dump(it.value(), out);
            }
            out += '}';
            break;
        }
        case value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& v : j) {
                if (!first) out += ',';
                first = false;
                canonical_dump(v, out);
            }
            out += ']';
            break;
        }
        case value_t::number_float:
            out += format_double_17g(j.get<double>());
            break;
        default:
            out += j.dump();
            break;
    }
}

inline std::string canonical_dump(const nlohmann::json& j) {
    std::string out;
    canonical_dump(j, out);
    return out;
}

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace erta::detail
