#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lexihal::text {

// One decoded code point together with its byte range in the source string.
struct CodePoint {
    char32_t cp;
    std::size_t offset;  // byte offset of the first byte
    std::size_t size;    // encoded length in bytes
};

// Decodes UTF-8; invalid bytes are passed through one at a time as U+FFFD
// with size 1 so byte offsets always stay consistent with the input.
std::vector<CodePoint> decode_utf8(const std::string& s);

std::string encode_utf8(char32_t cp);

bool is_space(char32_t cp);

// CJK ideographs (the ranges statute text actually uses).
bool is_cjk_ideograph(char32_t cp);

// Ideographs plus CJK/fullwidth punctuation; these tokenize per code point.
bool is_cjk(char32_t cp);

// Fullwidth ASCII variants -> ASCII, ideographic space -> space.
char32_t fold_fullwidth(char32_t cp);

std::string trim(const std::string& s);

// Comparison canon: fold fullwidth forms, collapse whitespace runs to a
// single space, trim. All statute-name and content comparisons go through
// this before any equality or substring test.
std::string normalize_text(const std::string& s);

std::size_t count_code_points(const std::string& s);

bool starts_with(const std::string& s, std::size_t byte_pos, const std::string& prefix);

// FNV-1a 64-bit. Used everywhere a stable cross-platform hash is needed
// (feature hashing, config digests); std::hash is implementation-defined.
std::uint64_t fnv1a64(const std::string& s);

std::string to_hex(std::uint64_t v);

}  // namespace lexihal::text
