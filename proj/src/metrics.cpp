#include "lexihal/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "lexihal/text.hpp"

namespace lexihal::metrics {

const char* error_type_name(ErrorType t) {
    switch (t) {
        case ErrorType::none: return "none";
        case ErrorType::wrong_name: return "wrong_name";
        case ErrorType::wrong_number: return "wrong_number";
        case ErrorType::fabricated: return "fabricated";
        case ErrorType::irrelevant: return "irrelevant";
    }
    return "none";
}

void apply_flags(StatuteCheck& check, const store::Statute& statute, const CheckConfig& config) {
    const auto& citation = check.citation;

    check.name_ok = false;
    if (citation.law_name) {
        const std::string name = text::normalize_text(*citation.law_name);
        for (const auto& alias : statute.aliases)
            if (text::normalize_text(alias) == name) {
                check.name_ok = true;
                break;
            }
    }

    check.number_ok =
        citation.article_number && *citation.article_number == statute.article_number;

    if (!citation.content) {
        check.content_ok = config.vacuous_content_ok;
    } else {
        const std::string cited = text::normalize_text(*citation.content);
        const std::string real = text::normalize_text(statute.content);
        const bool real_in_cited = !real.empty() && cited.find(real) != std::string::npos;
        const bool cited_in_real = !cited.empty() && real.find(cited) != std::string::npos;
        switch (config.containment) {
            case ContainmentMode::paper: check.content_ok = real_in_cited; break;
            case ContainmentMode::reverse: check.content_ok = cited_in_real; break;
            case ContainmentMode::either: check.content_ok = real_in_cited || cited_in_real; break;
        }
    }

    if (check.non_hallucinated()) {
        check.error_type = ErrorType::none;
    } else if (check.best_similarity < config.fabrication_floor) {
        check.error_type = ErrorType::fabricated;
    } else if (!check.name_ok) {
        check.error_type = ErrorType::wrong_name;
    } else if (!check.number_ok) {
        check.error_type = ErrorType::wrong_number;
    } else {
        check.error_type = ErrorType::irrelevant;
    }
}

StatuteCheck check_statute(const extraction::ExtractedCitation& citation,
                           const store::StatuteStore& store,
                           const providers::Embedder& embedder, const CheckConfig& config) {
    if (store.empty()) throw Error(ErrorKind::EmptyStore, "check_statute needs a statute store");
    if (!citation.content && !(citation.law_name && citation.article_number))
        throw Error(ErrorKind::MissingField,
                    "citation needs content or both law_name and article_number");

    const std::string query =
        citation.content ? *citation.content : extraction::render_citation(citation);
    const auto match = store.find_best_match(query, embedder);

    StatuteCheck check;
    check.citation = citation;
    check.best_id = match.statute->id;
    check.best_similarity = match.similarity;
    apply_flags(check, *match.statute, config);
    return check;
}

std::optional<double> nhsr(const std::vector<StatuteCheck>& checks) {
    if (checks.empty()) return std::nullopt;
    std::size_t good = 0;
    for (const auto& c : checks)
        if (c.non_hallucinated()) ++good;
    return static_cast<double>(good) / static_cast<double>(checks.size());
}

int parse_score(const std::string& reply, int lo, int hi) {
    std::string lower = reply;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::size_t pos = lower.find("score");
    while (pos != std::string::npos) {
        std::size_t i = pos + 5;
        while (i < lower.size() && (lower[i] == ' ' || lower[i] == '\t')) ++i;
        if (i < lower.size() && (lower[i] == ':' || lower[i] == '=')) {
            ++i;
            while (i < lower.size() && (lower[i] == ' ' || lower[i] == '\t')) ++i;
            std::size_t j = i;
            while (j < lower.size() && std::isdigit(static_cast<unsigned char>(lower[j]))) ++j;
            if (j > i) {
                const int value = std::stoi(lower.substr(i, j - i));
                if (value < lo || value > hi)
                    throw Error(ErrorKind::OutOfRangeScore,
                                "score " + std::to_string(value) + " outside [" +
                                    std::to_string(lo) + "," + std::to_string(hi) + "]");
                return value;
            }
        }
        pos = lower.find("score", pos + 1);
    }
    throw Error(ErrorKind::ScoreParseError, "no 'score: <int>' in judge reply: " +
                                                reply.substr(0, std::min<std::size_t>(reply.size(), 120)));
}

double statute_relevance(const std::string& question, const std::vector<StatuteCheck>& checks,
                         const store::StatuteStore& store, const providers::ChatProvider& chat,
                         const prompts::TemplateSet& templates) {
    if (checks.empty())
        throw Error(ErrorKind::EmptyInput, "statute_relevance needs at least one citation check");
    double sum = 0.0;
    for (const auto& check : checks) {
        providers::ChatRequest req;
        req.temperature = 0.0;
        const std::string statute_text = extraction::citation_text(check.citation);
        if (check.error_type == ErrorType::none) {
            req.prompt = prompts::fill(templates.relevance_direct,
                                       {{"QUESTION", question}, {"STATUTE", statute_text}});
        } else {
            const store::Statute* best = store.by_id(check.best_id);
            const std::string reference =
                best ? extraction::render_citation(*best) : std::string("(no reference found)");
            req.prompt = prompts::fill(templates.relevance_reference,
                                       {{"QUESTION", question},
                                        {"STATUTE", statute_text},
                                        {"REFERENCE", reference}});
        }
        sum += parse_score(chat.chat(req).text, 0, 10);
    }
    return sum / static_cast<double>(checks.size());
}

std::optional<double> legal_claim_truthfulness(const std::string& question,
                                               const std::string& answer,
                                               const providers::ChatProvider& chat,
                                               const prompts::TemplateSet& templates) {
    const auto suggestions = extraction::extract_suggestions(answer, chat, templates);
    if (suggestions.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto& suggestion : suggestions) {
        providers::ChatRequest req;
        req.temperature = 0.0;
        req.prompt = prompts::fill(templates.claim_legality,
                                   {{"QUESTION", question}, {"SUGGESTION", suggestion}});
        const int s = parse_score(chat.chat(req).text, 0, 5);
        sum += 2.0 * s;
    }
    return sum / static_cast<double>(suggestions.size());
}

namespace {

std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> tokens;
    std::string word;
    for (const auto& c : text::decode_utf8(s)) {
        if (text::is_space(c.cp)) {
            if (!word.empty()) tokens.push_back(std::move(word));
            word.clear();
        } else if (text::is_cjk(c.cp)) {
            if (!word.empty()) tokens.push_back(std::move(word));
            word.clear();
            tokens.push_back(text::encode_utf8(c.cp));
        } else {
            word += text::encode_utf8(c.cp);
        }
    }
    if (!word.empty()) tokens.push_back(std::move(word));
    return tokens;
}

}  // namespace

double token_f1(const std::string& candidate, const std::string& reference) {
    const auto cand = tokenize(candidate);
    const auto ref = tokenize(reference);
    if (cand.empty() || ref.empty()) return 0.0;

    std::map<std::string, int> ref_counts;
    for (const auto& t : ref) ++ref_counts[t];
    std::size_t matched = 0;
    for (const auto& t : cand) {
        auto it = ref_counts.find(t);
        if (it != ref_counts.end() && it->second > 0) {
            --it->second;
            ++matched;
        }
    }
    if (matched == 0) return 0.0;
    const double precision = static_cast<double>(matched) / static_cast<double>(cand.size());
    const double recall = static_cast<double>(matched) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

double SimilarityScorer::score(const std::string& a, const std::string& b) const {
    switch (kind) {
        case Kind::token_f1: return token_f1(a, b);
        case Kind::embedding_cosine: {
            if (!embedder)
                throw Error(ErrorKind::InvalidArgument,
                            "embedding_cosine scorer needs an embedder");
            const auto va = embedder->embed_one(a);
            const auto vb = embedder->embed_one(b);
            return std::clamp(providers::cosine(va, vb), 0.0, 1.0);
        }
    }
    return 0.0;
}

}  // namespace lexihal::metrics
