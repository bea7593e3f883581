#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace crseval::text {

// Lowercase ASCII copy.
std::string to_lower(const std::string& s);

// Collapse runs of whitespace to single spaces and trim the ends.
std::string collapse_ws(const std::string& s);

// Canonical form used for title matching and leakage scans: casefold,
// strip punctuation, collapse whitespace, drop a trailing "(yyyy)" year tag.
std::string normalize_title(const std::string& title);

// Alignment key for title-based catalog matching: normalized title plus the
// release year, which must be present for a key to exist.
std::optional<std::string> alignment_key(const std::string& title);

// Year parsed from a trailing "(yyyy)" in the title, if any.
std::optional<int> title_year(const std::string& title);

// True when `needle` (already normalized) occurs as a substring of the
// normalized form of `haystack`. Empty needles never match.
bool contains_normalized(const std::string& haystack, const std::string& needle);

// Lowercased alphanumeric word tokens.
std::vector<std::string> tokenize(const std::string& s);

// Cut at a word boundary so the result has at most `max_words` tokens.
std::string truncate_words(const std::string& s, size_t max_words);

// Cut to at most `max_chars` bytes, backing up to the previous space when
// the cut lands mid-word.
std::string truncate_chars(const std::string& s, size_t max_chars);

size_t count_words(const std::string& s);

// FNV-1a, the stable 64-bit hash all deterministic components derive from.
uint64_t fnv1a64(const std::string& s, uint64_t seed = 14695981039346656037ull);

std::string to_hex(uint64_t v);

} // namespace crseval::text
