#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lexihal/providers.hpp"

namespace lexihal::store {

// One canonical legal provision. article_number is already canonical
// (Arabic digits, optional "-n" sub-article suffix).
struct Statute {
    std::int64_t id = 0;
    std::string law_name;
    std::set<std::string> aliases;  // includes the canonical name
    std::string article_number;
    std::string content;
};

struct MatchResult {
    const Statute* statute = nullptr;
    double similarity = 0.0;  // cosine against the matched content embedding
};

class StatuteStore {
public:
    StatuteStore(std::vector<Statute> statutes, const providers::Embedder& embedder);

    const std::vector<Statute>& statutes() const { return statutes_; }
    const std::vector<providers::EmbeddingVector>& index() const { return index_; }
    bool empty() const { return statutes_.empty(); }
    std::size_t size() const { return statutes_.size(); }

    const Statute* by_id(std::int64_t id) const;

    // Argmax of cosine(embed(query), content embedding); ties go to the
    // lowest statute id.
    MatchResult find_best_match(const std::string& query_text,
                                const providers::Embedder& embedder) const;

private:
    std::vector<Statute> statutes_;
    std::vector<providers::EmbeddingVector> index_;
};

// JSON Lines, one statute per line:
//   {"id": int?, "law_name": str, "aliases": [str]?, "article_number": str, "content": str}
// Missing aliases defaults to {law_name}; missing ids are assigned sequentially.
StatuteStore load_store(const std::string& path, const providers::Embedder& embedder);

std::vector<Statute> parse_statutes_jsonl(const std::string& path);
std::string statutes_to_jsonl(const std::vector<Statute>& statutes);
void save_statutes(const std::vector<Statute>& statutes, const std::string& path);

// "第三百零二条" -> "302", "第1079条之三" -> "1079-3", "Article 15" -> "15".
// Idempotent; throws Unparseable when no numeral can be found.
std::string normalize_article_number(const std::string& raw);

// Chinese numeral (零/十/百/千/万 place values, or plain digits) to integer.
// Supports values up to 99,999. Returns nullopt on anything else.
std::optional<std::int64_t> chinese_numeral_to_int(const std::string& numeral);

// True for code points that can appear inside an article numeral
// (digits, Chinese numeral characters, place-value markers).
bool is_numeral_cp(char32_t cp);

}  // namespace lexihal::store
