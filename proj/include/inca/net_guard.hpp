#pragma once

#include <atomic>
#include <string>

#include "inca/errors.hpp"

namespace inca::net {

inline std::atomic<bool>& forbidden_flag() {
    static std::atomic<bool> flag{false};
    return flag;
}

// HTTP clients call this before touching a socket. Under --mock (and in
// hermetic tests) the flag is set, so any stray network path fails loudly.
inline void check_allowed(const std::string& what) {
    if (forbidden_flag().load(std::memory_order_relaxed))
        throw Error(Errc::BackendUnavailable,
                    what + " attempted while network I/O is forbidden (mock mode)");
}

struct ScopedForbid {
    ScopedForbid() : previous(forbidden_flag().exchange(true)) {}
    ~ScopedForbid() { forbidden_flag().store(previous); }
    ScopedForbid(const ScopedForbid&) = delete;
    ScopedForbid& operator=(const ScopedForbid&) = delete;
    bool previous;
};

} // namespace inca::net
