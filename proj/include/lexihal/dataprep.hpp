#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lexihal/extraction.hpp"
#include "lexihal/hipo.hpp"
#include "lexihal/metrics.hpp"
#include "lexihal/prompts.hpp"
#include "lexihal/providers.hpp"
#include "lexihal/statute_store.hpp"

namespace lexihal::dataprep {

enum class Source { revised_public, provision_generated };

const char* source_name(Source s);

struct QARecord {
    std::string id;
    std::string question;
    std::string answer;
    std::vector<std::int64_t> cited_statute_ids;
    Source source = Source::revised_public;
};

struct Replacement {
    std::size_t citation_index = 0;  // index into original_citations
    std::int64_t statute_id = -1;    // the real statute grounding the rewrite
    double similarity = 0.0;
};

struct RevisionTrace {
    std::vector<extraction::ExtractedCitation> original_citations;
    std::vector<Replacement> replacements;
    std::string revised_answer;
};

struct PrepOptions {
    metrics::CheckConfig check;
    extraction::CitationGrammar grammar = extraction::CitationGrammar::builtin();
    // A.1.2-style gate: before rewriting, ask the judge whether the matched
    // statute is relevant to the question; a "no" aborts the revision.
    bool relevance_precheck = false;
    double generation_temperature = 0.7;
    std::size_t min_question_chars = 20;
};

// Statute-revision step: citations that already pass check_statute are kept;
// the rest trigger a rewrite prompt grounded in their best-match statutes.
// One retry, then RevisionFailed. The emitted record never carries a failing
// citation.
std::pair<QARecord, RevisionTrace> revise_answer(
    const std::string& id, const std::string& question, const std::string& raw_answer,
    const store::StatuteStore& store, const providers::ChatProvider& chat,
    const providers::Embedder& embedder, const PrepOptions& options = {},
    const prompts::TemplateSet& templates = prompts::builtin());

struct GeneratedQuestions {
    std::vector<std::string> questions;
    std::vector<std::string> warnings;
};

// Provision-grounded question generation (judge temperature 0.7). Questions
// shorter than the length floor are dropped with a warning; returning fewer
// than n also warns. Never returns more than n.
GeneratedQuestions generate_questions(const store::Statute& provision, int n,
                                      const providers::ChatProvider& chat,
                                      const PrepOptions& options = {},
                                      const prompts::TemplateSet& templates = prompts::builtin());

// Provision-grounded answer generation. The reply must cite the given
// provision (name, number and content all checking out); one retry, then
// ValidationFailed.
std::string generate_answer_from_provision(
    const std::string& question, const store::Statute& provision,
    const providers::ChatProvider& chat, const PrepOptions& options = {},
    const prompts::TemplateSet& templates = prompts::builtin());

using Tokenizer = std::function<hipo::Tokens(const std::string&)>;

// Whitespace-separated decimal token ids ("5 2 7"); anything else is hashed
// into [1, vocab) so EOS stays reserved.
Tokenizer numeric_tokenizer(int vocab_size);

struct BuiltPairs {
    std::vector<hipo::PreferencePair> pairs;
    std::vector<std::string> warnings;
};

// One pair per record that has a model answer; records without one are
// skipped with a warning. Keys in model_answers must all exist in records.
BuiltPairs build_preference_pairs(const std::vector<QARecord>& sft_records,
                                  const std::map<std::string, std::string>& model_answers,
                                  const Tokenizer& tokenizer);

std::vector<QARecord> load_qa_records(const std::string& path);
void save_qa_records(const std::vector<QARecord>& records, const std::string& path);

}  // namespace lexihal::dataprep
