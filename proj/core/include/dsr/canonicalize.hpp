#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dsr {

/// Placeholder that every maximal digit run is rewritten to.
inline constexpr std::string_view kNumberPlaceholder = "100";

/// Canonical form of a piece of text: the token list and the text those
/// tokens reproduce when joined with single spaces.
struct CanonicalText {
    std::string text;
    std::vector<std::string> tokens;

    bool empty() const noexcept { return tokens.empty(); }
    std::size_t word_count() const noexcept { return tokens.size(); }
};

/// Splits on whitespace and strips leading/trailing punctuation from each
/// token. Interior punctuation (hyphens, slashes, dots) is kept. Tokens
/// that were pure punctuation disappear.
std::vector<std::string> tokenize(std::string_view text);

/// ASCII case-fold, rewrite every maximal digit run to kNumberPlaceholder,
/// then tokenize. Idempotent: canonicalize(c.text).text == c.text.
CanonicalText canonicalize(std::string_view raw);

/// Join tokens with single spaces.
std::string join_tokens(const std::vector<std::string>& tokens);

} // namespace dsr
