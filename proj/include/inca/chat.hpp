#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "inca/errors.hpp"

namespace inca {

struct ChatParams {
    double temperature = 0.0;
    std::size_t max_tokens = 256;
};

// Crude byte-based token estimate used for context-window accounting.
inline std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

// Chat-completion backend. complete() wraps the implementation with the
// interface contract: parameter bounds, the declared context window, no
// control characters other than newline in the output, and max_tokens as an
// upper bound on response length.
class ChatClient {
public:
    virtual ~ChatClient() = default;

    virtual std::string identity() const = 0;

    // 0 means no declared limit.
    virtual std::size_t max_context_tokens() const { return 0; }

    std::string complete(const std::string& prompt, const ChatParams& params) {
        if (prompt.empty()) throw Error(Errc::EmptyInput, "complete: empty prompt");
        if (params.temperature < 0.0 || params.temperature > 2.0)
            throw Error(Errc::InvalidArgument, "complete: temperature outside [0, 2]");
        if (params.max_tokens < 1)
            throw Error(Errc::InvalidArgument, "complete: max_tokens must be >= 1");
        const std::size_t window = max_context_tokens();
        const std::size_t prompt_tokens = estimate_tokens(prompt);
        if (window > 0 && prompt_tokens > window)
            throw Error(Errc::TokenLimitExceeded,
                        "prompt of ~" + std::to_string(prompt_tokens) + " tokens (" +
                            std::to_string(prompt.size()) + " bytes) exceeds the client's " +
                            std::to_string(window) + "-token context window");

        std::string out = do_complete(prompt, params);

        std::string clean;
        clean.reserve(out.size());
        for (char c : out) {
            const auto u = static_cast<unsigned char>(c);
            if (c == '\n')
                clean.push_back(c);
            else if (c == '\t')
                clean.push_back(' ');
            else if (u >= 0x20 && u != 0x7f)
                clean.push_back(c);
            // \r and remaining control bytes are dropped
        }
        if (estimate_tokens(clean) > params.max_tokens) clean.resize(params.max_tokens * 4);
        return clean;
    }

protected:
    virtual std::string do_complete(const std::string& prompt, const ChatParams& params) = 0;
};

} // namespace inca
