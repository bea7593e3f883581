#include "crseval/text.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace crseval::text {

std::string to_lower(const std::string& s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string collapse_ws(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool in_space = false;
    for (unsigned char c : s) {
        if (std::isspace(c) != 0) {
            if (!in_space && !out.empty()) out.push_back(' ');
            in_space = true;
        } else {
            in_space = false;
            out.push_back(static_cast<char>(c));
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::optional<int> title_year(const std::string& title) {
    // Trailing "(yyyy)", possibly followed by whitespace.
    size_t end = title.size();
    while (end > 0 && std::isspace(static_cast<unsigned char>(title[end - 1]))) --end;
    if (end < 6 || title[end - 1] != ')') return std::nullopt;
    size_t open = title.rfind('(', end - 1);
    if (open == std::string::npos || end - open != 6) return std::nullopt;
    int year = 0;
    for (size_t i = open + 1; i + 1 < end; ++i) {
        unsigned char c = static_cast<unsigned char>(title[i]);
        if (std::isdigit(c) == 0) return std::nullopt;
        year = year * 10 + (c - '0');
    }
    return year;
}

std::string normalize_title(const std::string& title) {
    std::string base = title;
    if (auto year = title_year(title)) {
        size_t open = base.rfind('(');
        base = base.substr(0, open);
        (void)year;
    }
    std::string cleaned;
    cleaned.reserve(base.size());
    for (unsigned char c : base) {
        if (std::isalnum(c) != 0) {
            cleaned.push_back(static_cast<char>(std::tolower(c)));
        } else if (std::isspace(c) != 0 || std::ispunct(c) != 0) {
            cleaned.push_back(' ');
        }
    }
    return collapse_ws(cleaned);
}

std::optional<std::string> alignment_key(const std::string& title) {
    auto year = title_year(title);
    if (!year) return std::nullopt;
    return normalize_title(title) + " [" + std::to_string(*year) + "]";
}

bool contains_normalized(const std::string& haystack, const std::string& needle) {
    if (needle.empty()) return false;
    std::string h = normalize_title(haystack);
    // Match on word boundaries within the normalized text.
    std::string padded_h = " " + h + " ";
    std::string padded_n = " " + needle + " ";
    return padded_h.find(padded_n) != std::string::npos;
}

std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : s) {
        if (std::isalnum(c) != 0) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

std::string truncate_words(const std::string& s, size_t max_words) {
    if (max_words == 0) return "";
    size_t words = 0;
    bool in_word = false;
    for (size_t i = 0; i < s.size(); ++i) {
        bool space = std::isspace(static_cast<unsigned char>(s[i])) != 0;
        if (!space && !in_word) {
            ++words;
            if (words > max_words) {
                std::string out = s.substr(0, i);
                while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
                return out;
            }
        }
        in_word = !space;
    }
    return s;
}

std::string truncate_chars(const std::string& s, size_t max_chars) {
    if (s.size() <= max_chars) return s;
    std::string out = s.substr(0, max_chars);
    size_t sp = out.find_last_of(" \t\n");
    if (sp != std::string::npos && sp > 0) out = out.substr(0, sp);
    while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
    return out;
}

size_t count_words(const std::string& s) {
    size_t words = 0;
    bool in_word = false;
    for (unsigned char c : s) {
        bool space = std::isspace(c) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

uint64_t fnv1a64(const std::string& s, uint64_t seed) {
    uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string to_hex(uint64_t v) {
    std::ostringstream oss;
    oss << std::hex << v;
    return oss.str();
}

} // namespace crseval::text
