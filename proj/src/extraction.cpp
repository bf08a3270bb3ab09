#include "lexihal/extraction.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "lexihal/text.hpp"

namespace lexihal::extraction {

using text::CodePoint;

namespace {

struct ByteSpan {
    std::size_t start = 0;
    std::size_t end = 0;
};

bool overlaps(const ByteSpan& a, const ByteSpan& b) {
    return a.start < b.end && b.start < a.end;
}

bool is_inline_space(char32_t cp) { return cp == U' ' || cp == U'\t' || cp == 0x3000; }

char32_t closing_quote_for(char32_t opener) {
    switch (opener) {
        case U'“': return U'”';
        case U'‘': return U'’';
        case U'"': return U'"';
        case U'\'': return U'\'';
        case U'「': return U'」';
        case U'『': return U'』';
        default: return 0;
    }
}

std::string rtrim_bytes(const std::string& s) {
    const auto cps = text::decode_utf8(s);
    std::size_t end = 0;
    for (const auto& c : cps)
        if (!text::is_space(c.cp)) end = c.offset + c.size;
    return s.substr(0, end);
}

// Shared tail of G1/G2: parses "第NUM条(之SUB)?(：CONTENT)?" starting at the
// code-point index of 第. Returns false if this is not an article ordinal.
struct OrdinalTail {
    std::string canonical_number;
    std::optional<std::string> content;
    std::size_t end_byte = 0;  // end of the whole citation (content included)
};

bool parse_ordinal_tail(const std::string& s, const std::vector<CodePoint>& cps,
                        std::size_t di /* index of 第 */, OrdinalTail& out) {
    std::size_t i = di + 1;
    const std::size_t num_begin = i;
    while (i < cps.size() && (store::is_numeral_cp(text::fold_fullwidth(cps[i].cp)) || cps[i].cp == U'-'))
        ++i;
    if (i == num_begin) return false;
    if (i >= cps.size() || cps[i].cp != U'条') return false;
    ++i;
    // optional sub-article 之SUB
    if (i < cps.size() && cps[i].cp == U'之') {
        std::size_t j = i + 1;
        while (j < cps.size() && store::is_numeral_cp(text::fold_fullwidth(cps[j].cp))) ++j;
        if (j > i + 1) i = j;
    }
    const std::size_t ordinal_end_byte = cps[i - 1].offset + cps[i - 1].size;

    const std::size_t di_byte = cps[di].offset;
    const std::string ordinal_slice = s.substr(di_byte, ordinal_end_byte - di_byte);
    try {
        out.canonical_number = store::normalize_article_number(ordinal_slice);
    } catch (const Error&) {
        return false;
    }

    // optional colon introducing quoted content
    std::size_t c = i;
    while (c < cps.size() && is_inline_space(cps[c].cp)) ++c;
    if (c < cps.size() && (cps[c].cp == U':' || cps[c].cp == U'：')) {
        const std::size_t colon_end = cps[c].offset + cps[c].size;
        ++c;
        while (c < cps.size() && is_inline_space(cps[c].cp)) ++c;

        char32_t closer = 0;
        if (c < cps.size()) closer = closing_quote_for(cps[c].cp);
        std::size_t content_begin_idx = c + (closer ? 1 : 0);

        // Content runs to the first of: matching closing quote, line break,
        // next citation start (《), or end of text.
        std::size_t e = content_begin_idx;
        std::size_t closed_at = std::string::npos;
        while (e < cps.size()) {
            const char32_t cp = cps[e].cp;
            if (cp == U'\n' || cp == U'《') break;
            if (closer && cp == closer) {
                closed_at = e;
                break;
            }
            ++e;
        }
        const std::size_t content_begin_byte =
            content_begin_idx < cps.size() ? cps[content_begin_idx].offset : s.size();
        const std::size_t content_end_byte = e < cps.size() ? cps[e].offset : s.size();
        std::string content =
            rtrim_bytes(s.substr(content_begin_byte, content_end_byte - content_begin_byte));
        if (content.empty()) {
            out.content = std::nullopt;
            out.end_byte = colon_end;
        } else {
            out.content = content;
            out.end_byte = closed_at != std::string::npos
                               ? cps[closed_at].offset + cps[closed_at].size
                               : content_begin_byte + content.size();
        }
    } else {
        out.content = std::nullopt;
        out.end_byte = ordinal_end_byte;
    }
    return true;
}

std::vector<ExtractedCitation> scan_book_title_mark(const std::string& s,
                                                    const std::vector<CodePoint>& cps) {
    std::vector<ExtractedCitation> found;
    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (cps[i].cp != U'《') continue;
        std::size_t j = i + 1;
        while (j < cps.size() && cps[j].cp != U'》' && cps[j].cp != U'《' && cps[j].cp != U'\n')
            ++j;
        if (j >= cps.size() || cps[j].cp != U'》' || j == i + 1) continue;
        const std::size_t name_begin = cps[i + 1].offset;
        const std::size_t name_end = cps[j].offset;
        if (j + 1 >= cps.size() || cps[j + 1].cp != U'第') continue;
        OrdinalTail tail;
        if (!parse_ordinal_tail(s, cps, j + 1, tail)) continue;
        ExtractedCitation c;
        c.law_name = s.substr(name_begin, name_end - name_begin);
        c.article_number = tail.canonical_number;
        c.content = tail.content;
        c.span_start = cps[i].offset;
        c.span_end = tail.end_byte;
        found.push_back(std::move(c));
    }
    return found;
}

const std::vector<std::u32string>& name_stop_prefixes() {
    static const std::vector<std::u32string> p = {U"根据", U"依据", U"依照", U"按照",
                                                  U"参照", U"适用", U"违反", U"符合",
                                                  U"我国", U"以及"};
    return p;
}

bool acceptable_name_tail(char32_t cp) {
    return cp == U'法' || cp == U'典' || cp == U'例' || cp == U'则' || cp == U'释' || cp == U'定';
}

std::vector<ExtractedCitation> scan_bare_name(const std::string& s,
                                              const std::vector<CodePoint>& cps) {
    std::vector<ExtractedCitation> found;
    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (cps[i].cp != U'第') continue;
        OrdinalTail tail;
        if (!parse_ordinal_tail(s, cps, i, tail)) continue;

        // Law name: the maximal ideograph run ending right before 第.
        std::size_t b = i;
        while (b > 0 && text::is_cjk_ideograph(cps[b - 1].cp)) --b;
        if (i - b < 2) continue;
        std::u32string name32;
        for (std::size_t k = b; k < i; ++k) name32.push_back(cps[k].cp);
        if (!acceptable_name_tail(name32.back())) continue;

        // Peel leading connectives like 根据/依照 off the run.
        std::size_t strip = 0;
        bool stripped = true;
        while (stripped) {
            stripped = false;
            for (const auto& prefix : name_stop_prefixes()) {
                if (name32.size() - strip > prefix.size() &&
                    name32.compare(strip, prefix.size(), prefix) == 0) {
                    strip += prefix.size();
                    stripped = true;
                    break;
                }
            }
        }
        if (name32.size() - strip < 2) continue;
        const std::size_t name_begin = cps[b + strip].offset;
        const std::size_t name_end = cps[i].offset;

        ExtractedCitation c;
        c.law_name = s.substr(name_begin, name_end - name_begin);
        c.article_number = tail.canonical_number;
        c.content = tail.content;
        c.span_start = name_begin;
        c.span_end = tail.end_byte;
        found.push_back(std::move(c));
    }
    return found;
}

std::vector<ExtractedCitation> scan_english(const std::string& s) {
    static const std::regex pattern(
        R"((Article|Section|article|section)\s+([0-9]+(?:-[0-9]+)?)\s+of\s+the\s+)"
        R"(([A-Z][A-Za-z]*(?:\s+(?:[A-Z][A-Za-z]*|of|and|on|the|for|in))*))");
    std::vector<ExtractedCitation> found;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), pattern);
         it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        std::string name = m[3].str();
        // drop trailing lowercase connectors the greedy tail may have grabbed
        static const std::regex trailing(R"(\s+(?:of|and|on|the|for|in)$)");
        name = std::regex_replace(name, trailing, "");
        ExtractedCitation c;
        c.law_name = name;
        c.article_number = store::normalize_article_number(m[2].str());
        c.span_start = static_cast<std::size_t>(m.position(0));
        c.span_end = static_cast<std::size_t>(m.position(3)) + name.size();
        found.push_back(std::move(c));
    }
    return found;
}

std::vector<ExtractedCitation> scan_custom_regex(const std::string& s, const std::string& rx) {
    std::vector<ExtractedCitation> found;
    const std::regex pattern(rx);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), pattern);
         it != std::sregex_iterator(); ++it) {
        const auto& m = *it;
        ExtractedCitation c;
        if (m.size() > 1 && m[1].matched && !m[1].str().empty()) c.law_name = m[1].str();
        if (m.size() > 2 && m[2].matched && !m[2].str().empty()) {
            try {
                c.article_number = store::normalize_article_number(m[2].str());
            } catch (const Error&) {
                continue;
            }
        }
        if (m.size() > 3 && m[3].matched && !m[3].str().empty()) c.content = m[3].str();
        if (!c.law_name && !c.article_number && !c.content) continue;
        c.span_start = static_cast<std::size_t>(m.position(0));
        c.span_end = c.span_start + static_cast<std::size_t>(m.length(0));
        found.push_back(std::move(c));
    }
    return found;
}

std::vector<std::string> split_lines(const std::string& s) {
    std::vector<std::string> lines;
    std::istringstream ss(s);
    std::string line;
    while (std::getline(ss, line)) lines.push_back(line);
    return lines;
}

std::vector<ExtractedCitation> llm_fallback(const std::string& answer_text,
                                            const providers::ChatProvider& chat,
                                            const prompts::TemplateSet& templates) {
    providers::ChatRequest req;
    req.prompt = prompts::fill(templates.statute_extraction, {{"ANSWER", answer_text}});
    req.temperature = 0.0;
    const std::string reply = chat.chat(req).text;
    if (text::trim(reply) == "NONE") return {};

    std::vector<ExtractedCitation> out;
    for (const auto& raw_line : split_lines(reply)) {
        const std::string line = text::trim(raw_line);
        if (line.empty()) continue;
        const auto cps = text::decode_utf8(line);
        auto parsed = scan_book_title_mark(line, cps);
        if (parsed.size() != 1)
            throw Error(ErrorKind::FallbackParseError,
                        "extraction reply line is not a 《NAME》第NUM条 citation: " + line);
        out.push_back(std::move(parsed.front()));
    }
    if (out.empty())
        throw Error(ErrorKind::FallbackParseError, "extraction reply has no citation lines");

    // Re-anchor spans in the source answer: exact content first, then the
    // marked-up name. Unlocatable citations get the full-text span.
    std::size_t cursor = 0;
    for (auto& c : out) {
        std::size_t pos = std::string::npos;
        std::size_t len = 0;
        if (c.content) {
            pos = answer_text.find(*c.content, cursor);
            len = c.content->size();
        }
        if (pos == std::string::npos && c.law_name) {
            const std::string marked = "《" + *c.law_name + "》";
            pos = answer_text.find(marked, cursor);
            len = marked.size();
            if (pos == std::string::npos) {
                pos = answer_text.find(*c.law_name, cursor);
                len = c.law_name->size();
            }
        }
        if (pos != std::string::npos) {
            c.span_start = pos;
            c.span_end = pos + len;
            cursor = pos + len;
        } else {
            c.span_start = 0;
            c.span_end = answer_text.size();
        }
    }
    return out;
}

bool is_full_text_span(const ExtractedCitation& c, const std::string& s) {
    return c.span_start == 0 && c.span_end == s.size();
}

void validate_spans(const std::vector<ExtractedCitation>& citations, const std::string& s) {
    std::vector<ByteSpan> located;
    for (const auto& c : citations) {
        if (!(c.span_start < c.span_end) || c.span_end > s.size())
            throw Error(ErrorKind::ParseError, "citation span out of bounds");
        if (is_full_text_span(c, s) && s.size() > 0) continue;  // unlocated fallback marker
        for (const auto& prev : located)
            if (overlaps(prev, {c.span_start, c.span_end}))
                throw Error(ErrorKind::ParseError, "citation spans overlap");
        located.push_back({c.span_start, c.span_end});
    }
}

}  // namespace

CitationGrammar CitationGrammar::builtin() {
    CitationGrammar g;
    g.patterns = {{"G1", PatternKind::BookTitleMark, ""},
                  {"G2", PatternKind::BareName, ""},
                  {"G3", PatternKind::English, ""}};
    g.llm_fallback_enabled = true;
    return g;
}

CitationGrammar load_grammar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open grammar file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, path + ": " + e.what());
    }
    CitationGrammar g;
    g.llm_fallback_enabled = j.value("llm_fallback_enabled", true);
    if (!j.contains("patterns") || !j["patterns"].is_array() || j["patterns"].empty())
        throw Error(ErrorKind::ParseError, path + ": grammar needs a non-empty patterns list");
    for (const auto& p : j["patterns"]) {
        CitationPattern cp;
        cp.name = p.value("name", "");
        if (p.contains("builtin")) {
            const std::string b = p["builtin"].get<std::string>();
            if (b == "G1") cp.kind = PatternKind::BookTitleMark;
            else if (b == "G2") cp.kind = PatternKind::BareName;
            else if (b == "G3") cp.kind = PatternKind::English;
            else throw Error(ErrorKind::ParseError, path + ": unknown builtin pattern " + b);
        } else if (p.contains("regex")) {
            cp.kind = PatternKind::Regex;
            cp.regex = p["regex"].get<std::string>();
        } else {
            throw Error(ErrorKind::ParseError, path + ": pattern needs builtin or regex");
        }
        g.patterns.push_back(std::move(cp));
    }
    return g;
}

std::vector<ExtractedCitation> extract_citations(const std::string& answer_text,
                                                 const CitationGrammar& grammar,
                                                 const providers::ChatProvider* chat,
                                                 const prompts::TemplateSet& templates) {
    if (answer_text.empty()) throw Error(ErrorKind::EmptyInput, "answer text is empty");
    if (grammar.patterns.empty())
        throw Error(ErrorKind::InvalidArgument, "citation grammar has no patterns");

    const auto cps = text::decode_utf8(answer_text);
    std::vector<ExtractedCitation> accepted;
    std::vector<ByteSpan> claimed;
    for (const auto& pattern : grammar.patterns) {
        std::vector<ExtractedCitation> candidates;
        switch (pattern.kind) {
            case PatternKind::BookTitleMark: candidates = scan_book_title_mark(answer_text, cps); break;
            case PatternKind::BareName: candidates = scan_bare_name(answer_text, cps); break;
            case PatternKind::English: candidates = scan_english(answer_text); break;
            case PatternKind::Regex: candidates = scan_custom_regex(answer_text, pattern.regex); break;
        }
        for (auto& c : candidates) {
            const ByteSpan span{c.span_start, c.span_end};
            bool clash = false;
            for (const auto& prev : claimed)
                if (overlaps(prev, span)) {
                    clash = true;
                    break;
                }
            if (clash) continue;
            claimed.push_back(span);
            accepted.push_back(std::move(c));
        }
    }

    if (accepted.empty() && grammar.llm_fallback_enabled && chat != nullptr) {
        auto fallback = llm_fallback(answer_text, *chat, templates);
        validate_spans(fallback, answer_text);
        return fallback;
    }

    std::sort(accepted.begin(), accepted.end(),
              [](const ExtractedCitation& a, const ExtractedCitation& b) {
                  return a.span_start < b.span_start;
              });
    validate_spans(accepted, answer_text);
    return accepted;
}

std::vector<std::string> parse_numbered_list(const std::string& reply) {
    if (text::trim(reply) == "NONE") return {};
    std::vector<std::string> items;
    for (const auto& raw_line : split_lines(reply)) {
        const std::string line = text::trim(raw_line);
        if (line.empty()) continue;
        // expect "N. item" / "N、item" / "N) item"
        const auto cps = text::decode_utf8(line);
        std::size_t i = 0;
        while (i < cps.size() && text::fold_fullwidth(cps[i].cp) >= U'0' &&
               text::fold_fullwidth(cps[i].cp) <= U'9')
            ++i;
        bool numbered = i > 0 && i < cps.size();
        if (numbered) {
            const char32_t sep = text::fold_fullwidth(cps[i].cp);
            numbered = sep == U'.' || sep == U'、' || sep == U')';
        }
        if (!numbered)
            throw Error(ErrorKind::FallbackParseError, "reply line is not numbered: " + line);
        const std::size_t item_begin = cps[i].offset + cps[i].size;
        const std::string item = text::trim(line.substr(item_begin));
        if (!item.empty()) items.push_back(item);
    }
    if (items.empty())
        throw Error(ErrorKind::FallbackParseError, "numbered-list reply has no items");
    return items;
}

std::vector<std::string> extract_suggestions(const std::string& answer_text,
                                             const providers::ChatProvider& chat,
                                             const prompts::TemplateSet& templates) {
    if (answer_text.empty()) throw Error(ErrorKind::EmptyInput, "answer text is empty");
    providers::ChatRequest req;
    req.prompt = prompts::fill(templates.suggestion_extraction, {{"ANSWER", answer_text}});
    req.temperature = 0.0;
    return parse_numbered_list(chat.chat(req).text);
}

std::string render_citation(const ExtractedCitation& citation) {
    if (!citation.law_name || !citation.article_number)
        throw Error(ErrorKind::MissingField, "render_citation needs law_name and article_number");
    std::string out = "《" + *citation.law_name + "》第" + *citation.article_number + "条";
    if (citation.content) out += "：" + *citation.content;
    return out;
}

std::string render_citation(const store::Statute& statute) {
    std::string out = "《" + statute.law_name + "》第" + statute.article_number + "条";
    if (!statute.content.empty()) out += "：" + statute.content;
    return out;
}

std::string citation_text(const ExtractedCitation& citation) {
    if (citation.law_name && citation.article_number) return render_citation(citation);
    if (citation.content) return *citation.content;
    throw Error(ErrorKind::MissingField, "citation has neither rendered form nor content");
}

}  // namespace lexihal::extraction
