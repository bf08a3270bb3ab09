#include "lexihal/text.hpp"

#include "lexihal/error.hpp"

namespace lexihal::text {

std::vector<CodePoint> decode_utf8(const std::string& s) {
    std::vector<CodePoint> out;
    out.reserve(s.size());
    std::size_t i = 0;
    const auto n = s.size();
    while (i < n) {
        const unsigned char b0 = static_cast<unsigned char>(s[i]);
        char32_t cp = 0xFFFD;
        std::size_t len = 1;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 >> 5) == 0x6 && i + 1 < n) {
            const unsigned char b1 = static_cast<unsigned char>(s[i + 1]);
            if ((b1 & 0xC0) == 0x80) {
                cp = ((b0 & 0x1F) << 6) | (b1 & 0x3F);
                len = 2;
            }
        } else if ((b0 >> 4) == 0xE && i + 2 < n) {
            const unsigned char b1 = static_cast<unsigned char>(s[i + 1]);
            const unsigned char b2 = static_cast<unsigned char>(s[i + 2]);
            if ((b1 & 0xC0) == 0x80 && (b2 & 0xC0) == 0x80) {
                cp = ((b0 & 0x0F) << 12) | ((b1 & 0x3F) << 6) | (b2 & 0x3F);
                len = 3;
            }
        } else if ((b0 >> 3) == 0x1E && i + 3 < n) {
            const unsigned char b1 = static_cast<unsigned char>(s[i + 1]);
            const unsigned char b2 = static_cast<unsigned char>(s[i + 2]);
            const unsigned char b3 = static_cast<unsigned char>(s[i + 3]);
            if ((b1 & 0xC0) == 0x80 && (b2 & 0xC0) == 0x80 && (b3 & 0xC0) == 0x80) {
                cp = ((b0 & 0x07) << 18) | ((b1 & 0x3F) << 12) | ((b2 & 0x3F) << 6) | (b3 & 0x3F);
                len = 4;
            }
        }
        out.push_back({cp, i, len});
        i += len;
    }
    return out;
}

std::string encode_utf8(char32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

bool is_space(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' ||
           cp == U'\v' || cp == 0x3000 || cp == 0x00A0;
}

bool is_cjk_ideograph(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
           (cp >= 0xF900 && cp <= 0xFAFF);
}

bool is_cjk(char32_t cp) {
    return is_cjk_ideograph(cp) || (cp >= 0x3000 && cp <= 0x303F) ||
           (cp >= 0xFF00 && cp <= 0xFFEF);
}

char32_t fold_fullwidth(char32_t cp) {
    if (cp >= 0xFF01 && cp <= 0xFF5E) return cp - 0xFEE0;
    if (cp == 0x3000) return U' ';
    return cp;
}

std::string trim(const std::string& s) {
    const auto cps = decode_utf8(s);
    std::size_t first = cps.size();
    std::size_t last = 0;
    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (!is_space(cps[i].cp)) {
            if (first == cps.size()) first = i;
            last = i;
        }
    }
    if (first == cps.size()) return "";
    const std::size_t begin = cps[first].offset;
    const std::size_t end = cps[last].offset + cps[last].size;
    return s.substr(begin, end - begin);
}

std::string normalize_text(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    bool emitted = false;
    for (const auto& c : decode_utf8(s)) {
        const char32_t cp = fold_fullwidth(c.cp);
        if (is_space(cp)) {
            pending_space = emitted;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out += encode_utf8(cp);
        emitted = true;
    }
    return out;
}

std::size_t count_code_points(const std::string& s) { return decode_utf8(s).size(); }

bool starts_with(const std::string& s, std::size_t byte_pos, const std::string& prefix) {
    return s.compare(byte_pos, prefix.size(), prefix) == 0;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

}  // namespace lexihal::text

namespace lexihal {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorKind::NoScriptMatch: return "NoScriptMatch";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::DuplicateStatute: return "DuplicateStatute";
        case ErrorKind::EmptyStore: return "EmptyStore";
        case ErrorKind::Unparseable: return "Unparseable";
        case ErrorKind::FallbackParseError: return "FallbackParseError";
        case ErrorKind::MissingField: return "MissingField";
        case ErrorKind::ScoreParseError: return "ScoreParseError";
        case ErrorKind::OutOfRangeScore: return "OutOfRangeScore";
        case ErrorKind::TokenOutOfRange: return "TokenOutOfRange";
        case ErrorKind::InvalidLogProb: return "InvalidLogProb";
        case ErrorKind::DivergenceDetected: return "DivergenceDetected";
        case ErrorKind::RevisionFailed: return "RevisionFailed";
        case ErrorKind::ValidationFailed: return "ValidationFailed";
        case ErrorKind::AllQuestionsFiltered: return "AllQuestionsFiltered";
        case ErrorKind::IoError: return "IoError";
    }
    return "Error";
}

}  // namespace lexihal
