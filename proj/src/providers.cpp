#include "lexihal/providers.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "lexihal/text.hpp"

namespace lexihal::providers {

using nlohmann::json;

double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    double s = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const EmbeddingVector& v) { return std::sqrt(dot(v, v)); }

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

EmbeddingVector Embedder::embed_one(const std::string& text) const {
    return embed({text}).front();
}

HashEmbedder::HashEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw Error(ErrorKind::InvalidArgument, "embedding dimension must be positive");
}

std::vector<EmbeddingVector> HashEmbedder::embed(const std::vector<std::string>& texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& raw : texts) {
        const std::string trimmed = text::trim(raw);
        if (trimmed.empty()) throw Error(ErrorKind::EmptyInput, "cannot embed blank text");

        // Code points with boundary sentinels; n-grams are built over these.
        std::vector<std::string> cps;
        cps.emplace_back("\x02");  // begin sentinel
        for (const auto& c : text::decode_utf8(trimmed)) cps.push_back(text::encode_utf8(c.cp));
        cps.emplace_back("\x03");  // end sentinel

        EmbeddingVector v(dimension_, 0.0);
        for (std::size_t n = 2; n <= 3; ++n) {
            if (cps.size() < n) continue;
            for (std::size_t i = 0; i + n <= cps.size(); ++i) {
                std::string gram;
                for (std::size_t k = 0; k < n; ++k) gram += cps[i + k];
                v[text::fnv1a64(gram) % dimension_] += 1.0;
            }
        }
        const double norm = l2_norm(v);
        for (auto& x : v) x /= norm;
        out.push_back(std::move(v));
    }
    return out;
}

ScriptedChatProvider::ScriptedChatProvider(std::vector<ScriptRule> rules)
    : rules_(std::move(rules)) {}

namespace {

void validate_request(const ChatRequest& request) {
    if (text::trim(request.prompt).empty())
        throw Error(ErrorKind::EmptyInput, "chat prompt is blank");
    if (request.temperature < 0.0)
        throw Error(ErrorKind::InvalidArgument, "chat temperature must be >= 0");
    if (request.max_tokens <= 0)
        throw Error(ErrorKind::InvalidArgument, "max_tokens must be positive");
}

}  // namespace

ChatResponse ScriptedChatProvider::chat(const ChatRequest& request) const {
    validate_request(request);
    for (const auto& rule : rules_) {
        bool hit = false;
        if (rule.regex) {
            hit = std::regex_search(request.prompt, std::regex(rule.pattern));
        } else {
            hit = request.prompt.find(rule.pattern) != std::string::npos;
        }
        if (hit) {
            if (rule.response.empty())
                throw Error(ErrorKind::ParseError, "script rule has an empty response");
            return {rule.response, "mock"};
        }
    }
    const std::string head = request.prompt.substr(0, 120);
    throw Error(ErrorKind::NoScriptMatch, "no script rule matches prompt starting with: " + head);
}

std::vector<ScriptRule> load_script(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open script file: " + path);
    std::vector<ScriptRule> rules;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError,
                        path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.contains("pattern") || !j.contains("response"))
            throw Error(ErrorKind::ParseError,
                        path + ":" + std::to_string(line_no) + ": rule needs pattern and response");
        ScriptRule r;
        r.pattern = j.at("pattern").get<std::string>();
        r.response = j.at("response").get<std::string>();
        r.regex = j.value("regex", false);
        rules.push_back(std::move(r));
    }
    return rules;
}

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

// Runs one HTTP POST with retries and exponential backoff. Returns the body.
std::string post_with_retries(const HttpConfig& config, const char* env_url,
                              const std::string& body) {
    const std::string url = config.url.empty() ? env_or(env_url, "") : config.url;
    if (url.empty())
        throw Error(ErrorKind::InvalidArgument,
                    std::string("no provider URL configured (set ") + env_url + ")");
    const std::string api_key = config.api_key.empty() ? env_or("LEXIHAL_API_KEY", "") : config.api_key;

    // Split scheme://host:port/path for httplib.
    std::string host_part = url;
    std::string path = "/";
    auto scheme_end = host_part.find("://");
    if (scheme_end != std::string::npos) host_part = host_part.substr(scheme_end + 3);
    auto slash = host_part.find('/');
    if (slash != std::string::npos) {
        path = host_part.substr(slash);
        host_part = host_part.substr(0, slash);
    }

    std::string last_error = "no attempt made";
    int backoff_ms = config.initial_backoff_ms;
    const int attempts = std::max(1, config.max_retries);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        httplib::Client client(host_part);
        client.set_connection_timeout(config.timeout_sec);
        client.set_read_timeout(config.timeout_sec);
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        return res->body;
    }
    throw ProviderError(url + ": " + last_error, attempts);
}

}  // namespace

HttpEmbedder::HttpEmbedder(HttpConfig config, std::size_t dimension)
    : config_(std::move(config)), dimension_(dimension) {}

std::vector<EmbeddingVector> HttpEmbedder::embed(const std::vector<std::string>& texts) const {
    for (const auto& t : texts)
        if (text::trim(t).empty()) throw Error(ErrorKind::EmptyInput, "cannot embed blank text");
    json req;
    req["texts"] = texts;
    const std::string body = post_with_retries(config_, "LEXIHAL_EMBED_URL", req.dump());
    json resp;
    try {
        resp = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("embedding response: ") + e.what());
    }
    if (!resp.contains("vectors") || !resp["vectors"].is_array() ||
        resp["vectors"].size() != texts.size())
        throw Error(ErrorKind::ParseError, "embedding response missing vectors for every input");
    std::vector<EmbeddingVector> out;
    for (const auto& jv : resp["vectors"]) {
        EmbeddingVector v = jv.get<EmbeddingVector>();
        if (v.size() != dimension_)
            throw Error(ErrorKind::ParseError, "embedding dimension mismatch: got " +
                                                   std::to_string(v.size()) + ", expected " +
                                                   std::to_string(dimension_));
        const double norm = l2_norm(v);
        if (!(norm > 0.0))
            throw Error(ErrorKind::ParseError, "embedding response contains a zero vector");
        for (auto& x : v) x /= norm;  // enforce the unit-norm contract locally
        out.push_back(std::move(v));
    }
    return out;
}

HttpChatProvider::HttpChatProvider(HttpConfig config) : config_(std::move(config)) {}

ChatResponse HttpChatProvider::chat(const ChatRequest& request) const {
    validate_request(request);
    json req;
    req["prompt"] = request.prompt;
    req["temperature"] = request.temperature;
    if (request.seed)
        req["seed"] = *request.seed;
    else
        req["seed"] = nullptr;
    req["max_tokens"] = request.max_tokens;
    const std::string body = post_with_retries(config_, "LEXIHAL_CHAT_URL", req.dump());
    json resp;
    try {
        resp = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("chat response: ") + e.what());
    }
    if (!resp.contains("text") || !resp["text"].is_string() ||
        resp["text"].get<std::string>().empty())
        throw Error(ErrorKind::ParseError, "chat response missing non-empty text");
    return {resp["text"].get<std::string>(), "http"};
}

}  // namespace lexihal::providers
