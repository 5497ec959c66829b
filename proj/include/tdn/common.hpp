#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tdn {

// Contract violations (bad shapes, invalid arguments) throw std::invalid_argument;
// I/O and runtime failures throw std::runtime_error.
[[noreturn]] inline void fail(const std::string& msg) {
    throw std::invalid_argument(msg);
}

inline void check(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

inline std::string shape_str(const std::vector<int>& dims) {
    std::string s = "[";
    for (size_t i = 0; i < dims.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(dims[i]);
    }
    return s + "]";
}

}  // namespace tdn
