#pragma once

#include <functional>
#include <iostream>
#include <string>

namespace inca {

// Warnings go to stderr by default; tests may swap the sink to capture them.
inline std::function<void(const std::string&)>& warning_sink() {
    static std::function<void(const std::string&)> sink = [](const std::string& msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return sink;
}

inline void log_warning(const std::string& msg) { warning_sink()(msg); }

} // namespace inca
