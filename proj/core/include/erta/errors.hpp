#pragma once

#include <stdexcept>
#include <string>

namespace erta {

// Error classes the CLI maps to distinct exit codes (see cli.hpp).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct compat_error : std::runtime_error {
    explicit compat_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct empty_input_error : std::runtime_error {
    explicit empty_input_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace erta
