#include "dsr/canonicalize.hpp"

#include "dsr/hash.hpp"

#include <cctype>
#include <cstdio>

namespace dsr {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf, 16);
}

std::string content_id(std::initializer_list<std::string_view> parts) {
    std::string joined;
    for (std::string_view p : parts) {
        joined += p;
        joined += '\x1f';
    }
    std::uint64_t a = fnv1a64(joined);
    std::uint64_t b = fnv1a64(joined, 0x9e3779b97f4a7c15ull);
    return hex64(a) + hex64(b);
}

namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }

// Curly quotes show up in source questions; they are punctuation for
// token-edge stripping purposes.
constexpr std::string_view kUtf8Punct[] = {
    "\xe2\x80\x98", // left single quote
    "\xe2\x80\x99", // right single quote
    "\xe2\x80\x9c", // left double quote
    "\xe2\x80\x9d", // right double quote
};

// Bytes removed from the front of a token; 0 when the front is not
// punctuation.
std::size_t leading_punct(std::string_view tok) {
    if (tok.empty()) return 0;
    unsigned char c = static_cast<unsigned char>(tok.front());
    if (c < 0x80) return std::ispunct(c) ? 1 : 0;
    for (std::string_view q : kUtf8Punct)
        if (tok.substr(0, q.size()) == q) return q.size();
    return 0;
}

std::size_t trailing_punct(std::string_view tok) {
    if (tok.empty()) return 0;
    for (std::string_view q : kUtf8Punct)
        if (tok.size() >= q.size() && tok.substr(tok.size() - q.size()) == q)
            return q.size();
    unsigned char c = static_cast<unsigned char>(tok.back());
    if (c < 0x80) return std::ispunct(c) ? 1 : 0;
    return 0;
}

std::string strip_token(std::string_view tok) {
    while (true) {
        std::size_t n = leading_punct(tok);
        if (n == 0) break;
        tok.remove_prefix(n);
    }
    while (true) {
        std::size_t n = trailing_punct(tok);
        if (n == 0) break;
        tok.remove_suffix(n);
    }
    return std::string(tok);
}

} // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) {
            std::string tok = strip_token(text.substr(start, i - start));
            if (!tok.empty()) tokens.push_back(std::move(tok));
        }
    }
    return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += tokens[i];
    }
    return out;
}

CanonicalText canonicalize(std::string_view raw) {
    std::string folded;
    folded.reserve(raw.size());
    std::size_t i = 0;
    while (i < raw.size()) {
        unsigned char c = static_cast<unsigned char>(raw[i]);
        if (is_digit(c)) {
            folded += kNumberPlaceholder;
            while (i < raw.size() && is_digit(static_cast<unsigned char>(raw[i]))) ++i;
            continue;
        }
        folded += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
        ++i;
    }

    CanonicalText out;
    out.tokens = tokenize(folded);
    out.text = join_tokens(out.tokens);
    return out;
}

} // namespace dsr
