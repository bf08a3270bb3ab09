#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lexihal/prompts.hpp"
#include "lexihal/providers.hpp"
#include "lexihal/statute_store.hpp"

namespace lexihal::extraction {

// A statute citation parsed out of generated text. At least one of
// law_name / article_number / content is present. Spans are byte offsets
// into the UTF-8 source answer; a full-text span (0, source length) marks
// a fallback citation whose text could not be located verbatim.
struct ExtractedCitation {
    std::optional<std::string> law_name;
    std::optional<std::string> article_number;  // canonical, via normalize_article_number
    std::optional<std::string> content;
    std::size_t span_start = 0;
    std::size_t span_end = 0;
};

enum class PatternKind {
    BookTitleMark,  // G1: 《NAME》第NUM条(之SUB)?(：)?(QUOTE)?
    BareName,       // G2: NAME第NUM条, no book marks
    English,        // G3: Article/Section NUM of the NAME
    Regex,          // custom: groups = (name, number?, content?)
};

struct CitationPattern {
    std::string name;
    PatternKind kind = PatternKind::Regex;
    std::string regex;  // only for PatternKind::Regex
};

struct CitationGrammar {
    std::vector<CitationPattern> patterns;
    bool llm_fallback_enabled = true;

    static CitationGrammar builtin();
};

// JSON override file: {"patterns": [{"name": str, "builtin": "G1"|"G2"|"G3"} |
// {"name": str, "regex": str}], "llm_fallback_enabled"?: bool}
CitationGrammar load_grammar(const std::string& path);

// Pattern pass first; when it finds nothing and fallback is enabled and a
// chat provider is given, the extraction prompt is issued and its structured
// reply parsed. Citations come back in order of appearance.
std::vector<ExtractedCitation> extract_citations(
    const std::string& answer_text, const CitationGrammar& grammar,
    const providers::ChatProvider* chat = nullptr,
    const prompts::TemplateSet& templates = prompts::builtin());

// Advice statements pulled out of an answer by the extraction prompt.
// Reply must be a numbered list or the sentinel NONE.
std::vector<std::string> extract_suggestions(
    const std::string& answer_text, const providers::ChatProvider& chat,
    const prompts::TemplateSet& templates = prompts::builtin());

// Parses a "1. ..." / "2、..." numbered-list reply; "NONE" yields an empty
// list, anything unnumbered raises FallbackParseError.
std::vector<std::string> parse_numbered_list(const std::string& reply);

// "《{law_name}》第{article_number}条：{content}"; the content clause is
// omitted when content is absent. Requires law_name and article_number.
std::string render_citation(const ExtractedCitation& citation);
std::string render_citation(const store::Statute& statute);

// Text standing in for the cited statute: rendered form when name+number are
// present, otherwise the quoted content.
std::string citation_text(const ExtractedCitation& citation);

}  // namespace lexihal::extraction
