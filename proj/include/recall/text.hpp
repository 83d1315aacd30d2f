#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "recall/errors.hpp"

namespace recall {

inline bool is_space(char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
}

/// Canonical text form: trimmed, internal whitespace runs collapsed to a
/// single space. Case and punctuation are preserved.
inline std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(c);
        }
    }
    return out;
}

/// Whitespace-delimited tokens.
inline std::vector<std::string_view> whitespace_tokens(std::string_view text) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) tokens.push_back(text.substr(start, i - start));
    }
    return tokens;
}

/// Whitespace token count, no allocation.
inline std::size_t token_count(std::string_view text) {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : text) {
        const bool sp = is_space(c);
        if (!sp && !in_token) ++n;
        in_token = !sp;
    }
    return n;
}

/// First min(n_words, word count) whitespace-delimited words, rejoined with
/// single spaces. Texts shorter than the prefix come back whole.
inline std::string prefix_of(std::string_view text, std::size_t n_words) {
    if (n_words == 0) throw InputError("prefix_of: n_words must be >= 1");
    const auto tokens = whitespace_tokens(text);
    std::string out;
    const std::size_t take = std::min(n_words, tokens.size());
    for (std::size_t i = 0; i < take; ++i) {
        if (i) out.push_back(' ');
        out.append(tokens[i]);
    }
    return out;
}

} // namespace recall
