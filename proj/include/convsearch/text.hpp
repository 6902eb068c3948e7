#pragma once

#include <cctype>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace convsearch {

struct AnalyzerConfig {
    bool lowercase = true;
    std::set<std::string> stopwords;
    bool allow_empty_text = false;
};

namespace detail {

// Bytes >= 0x80 belong to multi-byte UTF-8 sequences and are kept inside tokens.
inline bool is_token_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace detail

/// Splits on non-alphanumerics, lowercases, drops configured stopwords.
inline std::vector<std::string> tokenize(std::string_view text, const AnalyzerConfig& config = {}) {
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            if (config.stopwords.find(current) == config.stopwords.end()) tokens.push_back(current);
            current.clear();
        }
    };
    for (char c : text) {
        if (detail::is_token_byte(static_cast<unsigned char>(c))) {
            current.push_back(config.lowercase ? detail::ascii_lower(c) : c);
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

/// Removes a leading list marker ("1." "12)" followed by a space, "-" "*" "•") and surrounding whitespace.
inline std::string_view strip_enumeration(std::string_view line) {
    line = trim(line);
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')') &&
        (i + 1 == line.size() || std::isspace(static_cast<unsigned char>(line[i + 1])))) {
        return trim(line.substr(i + 1));
    }
    if (!line.empty() && (line.front() == '-' || line.front() == '*')) return trim(line.substr(1));
    constexpr std::string_view bullet = "\xE2\x80\xA2";
    if (line.starts_with(bullet)) return trim(line.substr(bullet.size()));
    return line;
}

/// Casefold, drop ASCII punctuation, collapse whitespace runs, trim.
inline std::string normalize_for_match(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (char c : text) {
        auto u = static_cast<unsigned char>(c);
        if (std::ispunct(u)) continue;
        if (std::isspace(u)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(detail::ascii_lower(c));
    }
    return out;
}

}  // namespace convsearch
