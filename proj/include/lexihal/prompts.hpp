#pragma once

#include <map>
#include <string>

namespace lexihal::prompts {

// Every template carries a distinct machine-checkable marker (the bracketed
// tag on its first line) so scripted mocks and tests can route on it, and
// {PLACEHOLDER} slots filled via fill().
struct TemplateSet {
    std::string statute_extraction;    // {ANSWER}
    std::string suggestion_extraction; // {ANSWER}
    std::string relevance_direct;      // {QUESTION} {STATUTE}
    std::string relevance_reference;   // {QUESTION} {STATUTE} {REFERENCE}
    std::string claim_legality;        // {QUESTION} {SUGGESTION}
    std::string pairwise_rubric;       // {QUESTION} {ANSWER_A} {ANSWER_B}
    std::string question_generation;   // {STATUTE} {N}
    std::string answer_generation;     // {QUESTION} {STATUTE}
    std::string answer_revision;       // {ANSWER} {STATUTES}
    std::string relevance_precheck;    // {QUESTION} {STATUTE}
};

inline constexpr const char* kMarkerExtractStatutes = "[EXTRACT-STATUTES]";
inline constexpr const char* kMarkerExtractSuggestions = "[EXTRACT-SUGGESTIONS]";
inline constexpr const char* kMarkerRelDirect = "[REL-DIRECT]";
inline constexpr const char* kMarkerRelReference = "[REL-REFERENCE]";
inline constexpr const char* kMarkerClaimLegality = "[CLAIM-LEGALITY]";
inline constexpr const char* kMarkerPairwiseRubric = "[PAIRWISE-RUBRIC]";
inline constexpr const char* kMarkerGenQuestions = "[GEN-QUESTIONS]";
inline constexpr const char* kMarkerGenAnswer = "[GEN-ANSWER]";
inline constexpr const char* kMarkerReviseAnswer = "[REVISE-ANSWER]";
inline constexpr const char* kMarkerRelPrecheck = "[REL-PRECHECK]";

const TemplateSet& builtin();

// Returns builtin() with any template whose file <dir>/<field-name>.txt
// exists replaced by that file's contents.
TemplateSet load_overrides(const std::string& dir);

// Replaces every {KEY} occurrence for the given keys; unlisted braces are
// left untouched.
std::string fill(const std::string& tpl, const std::map<std::string, std::string>& values);

}  // namespace lexihal::prompts
