#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lexihal/error.hpp"

namespace lexihal::providers {

// Unit-L2-norm embedding. Dimension is fixed per provider.
using EmbeddingVector = std::vector<double>;

double dot(const EmbeddingVector& a, const EmbeddingVector& b);
double l2_norm(const EmbeddingVector& v);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct ChatRequest {
    std::string prompt;
    double temperature = 0.0;
    std::optional<std::int64_t> seed;
    int max_tokens = 1024;
};

struct ChatResponse {
    std::string text;
    std::string provider_id;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;
    // One vector per input, in input order. Throws EmptyInput on any blank text.
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) const = 0;

    EmbeddingVector embed_one(const std::string& text) const;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual ChatResponse chat(const ChatRequest& request) const = 0;
};

// Offline embedder: character 2- and 3-grams over code points (with ^/$
// boundary sentinels so single-character texts still produce features),
// feature-hashed into D buckets, counts L2-normalized. Leading/trailing
// whitespace is trimmed first, so padding never changes the vector.
class HashEmbedder : public Embedder {
public:
    explicit HashEmbedder(std::size_t dimension = 256);
    std::size_t dimension() const override { return dimension_; }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) const override;

private:
    std::size_t dimension_;
};

struct ScriptRule {
    std::string pattern;
    std::string response;
    bool regex = false;  // default: plain substring match
};

// Deterministic chat mock: first rule whose pattern matches the prompt wins.
// An unscripted prompt throws NoScriptMatch — that is a test-fixture gap,
// never something to paper over.
class ScriptedChatProvider : public ChatProvider {
public:
    explicit ScriptedChatProvider(std::vector<ScriptRule> rules);
    ChatResponse chat(const ChatRequest& request) const override;

private:
    std::vector<ScriptRule> rules_;
};

// JSON Lines, one rule per line: {"pattern": str, "response": str, "regex"?: bool}
std::vector<ScriptRule> load_script(const std::string& path);

// Test/glue helper: wraps an arbitrary function as a chat provider.
class FunctionChatProvider : public ChatProvider {
public:
    explicit FunctionChatProvider(std::function<std::string(const ChatRequest&)> fn)
        : fn_(std::move(fn)) {}
    ChatResponse chat(const ChatRequest& request) const override {
        return {fn_(request), "function"};
    }

private:
    std::function<std::string(const ChatRequest&)> fn_;
};

struct HttpConfig {
    std::string url;          // falls back to LEXIHAL_EMBED_URL / LEXIHAL_CHAT_URL
    std::string api_key;      // falls back to LEXIHAL_API_KEY
    int max_retries = 3;
    int initial_backoff_ms = 500;  // doubles per retry
    int timeout_sec = 30;
};

// POST {"texts": [string]} -> {"vectors": [[number]]}
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(HttpConfig config, std::size_t dimension);
    std::size_t dimension() const override { return dimension_; }
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) const override;

private:
    HttpConfig config_;
    std::size_t dimension_;
};

// POST {"prompt", "temperature", "seed", "max_tokens"} -> {"text": string}
class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(HttpConfig config);
    ChatResponse chat(const ChatRequest& request) const override;

private:
    HttpConfig config_;
};

}  // namespace lexihal::providers
