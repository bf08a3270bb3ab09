#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lexihal/extraction.hpp"
#include "lexihal/prompts.hpp"
#include "lexihal/providers.hpp"
#include "lexihal/statute_store.hpp"

namespace lexihal::metrics {

// Taxonomy of statute hallucinations, as emitted per citation check.
enum class ErrorType { none, wrong_name, wrong_number, fabricated, irrelevant };

const char* error_type_name(ErrorType t);

enum class ContainmentMode {
    paper,    // matched real content must appear inside the cited content
    reverse,  // cited content must appear inside the real content
    either,
};

struct CheckConfig {
    ContainmentMode containment = ContainmentMode::paper;
    double fabrication_floor = 0.5;   // best-match cosine below this => fabricated
    bool vacuous_content_ok = true;   // content flag when the citation quotes nothing
};

// Per-citation verdict. non_hallucinated() is the indicator argument of the
// NHSR sum: all of name, number and content must check out.
struct StatuteCheck {
    extraction::ExtractedCitation citation;
    std::int64_t best_id = -1;
    double best_similarity = 0.0;
    bool name_ok = false;
    bool number_ok = false;
    bool content_ok = false;
    ErrorType error_type = ErrorType::none;

    bool non_hallucinated() const { return name_ok && number_ok && content_ok; }
};

struct SampleMetrics {
    std::vector<StatuteCheck> statute_checks;
    std::optional<double> nhsr;  // absent when the answer cites nothing
    std::optional<double> rel;   // [0,10]
    std::optional<double> t_lc;  // [0,10]
};

// Sets the three flags and the error type of `check` against one known
// statute. Shared by check_statute and by dataprep's provision validation.
void apply_flags(StatuteCheck& check, const store::Statute& statute, const CheckConfig& config);

// Finds the most similar real statute for the citation (by quoted content
// when present, by its rendered form otherwise) and compares name, number
// and content against it.
StatuteCheck check_statute(const extraction::ExtractedCitation& citation,
                           const store::StatuteStore& store,
                           const providers::Embedder& embedder,
                           const CheckConfig& config = {});

// Proportion of non-hallucinated citations; absent (not zero) for an empty
// check list.
std::optional<double> nhsr(const std::vector<StatuteCheck>& checks);

// Judge-scored relevance in [0,10], mean over citations. Clean citations go
// through the direct-relevance prompt, hallucinated ones through the
// reference-comparison prompt.
double statute_relevance(const std::string& question, const std::vector<StatuteCheck>& checks,
                         const store::StatuteStore& store, const providers::ChatProvider& chat,
                         const prompts::TemplateSet& templates = prompts::builtin());

// Judge-scored legality of the answer's advice: 0-5 per suggestion, doubled,
// averaged. Absent when the answer contains no suggestions.
std::optional<double> legal_claim_truthfulness(
    const std::string& question, const std::string& answer,
    const providers::ChatProvider& chat,
    const prompts::TemplateSet& templates = prompts::builtin());

// Multiset token F1. Whitespace-delimited words, except CJK text which
// tokenizes per code point. 0 when either side is empty.
double token_f1(const std::string& candidate, const std::string& reference);

// Selection-metric stand-in: token F1 offline, or provider-embedding cosine
// clamped to [0,1].
struct SimilarityScorer {
    enum class Kind { token_f1, embedding_cosine };
    Kind kind = Kind::token_f1;
    double threshold = 0.8;
    const providers::Embedder* embedder = nullptr;  // required for embedding_cosine

    double score(const std::string& a, const std::string& b) const;
};

// Parses "score: <int>" out of a judge reply; ScoreParseError when absent,
// OutOfRangeScore when outside [lo, hi].
int parse_score(const std::string& reply, int lo, int hi);

}  // namespace lexihal::metrics
