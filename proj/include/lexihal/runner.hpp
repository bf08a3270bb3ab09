#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lexihal/dataprep.hpp"
#include "lexihal/hipo.hpp"
#include "lexihal/metrics.hpp"
#include "lexihal/prompts.hpp"
#include "lexihal/providers.hpp"
#include "lexihal/winrate.hpp"

namespace lexihal::runner {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitSampleFailures = 2;

struct EvalSample {
    std::string id;
    std::string question;
    std::vector<std::int64_t> reference_statute_ids;
    std::string reference_answer;
};

struct OutputRecord {
    std::string sample_id;
    std::string answer;
};

std::vector<EvalSample> load_samples(const std::string& path);
std::vector<OutputRecord> load_outputs(const std::string& path);

struct RunOptions {
    std::string provider = "mock";  // mock | http
    std::string script_path;        // chat script for the mock provider
    std::string embed_url;          // http provider endpoints
    std::string chat_url;
    std::size_t embed_dim = 256;
    std::uint64_t seed = 0;
    int max_concurrency = 4;
    metrics::CheckConfig check;
    std::string prompt_dir;    // optional prompt template overrides
    std::string grammar_path;  // optional citation grammar override file
    bool pooled_nhsr = false;  // pool citations across samples instead of per-sample mean
    bool llm_extraction_fallback = false;  // let eval fall back to the extraction prompt
};

// Resolved provider bundle; mock providers are pure and shared across workers.
struct Providers {
    std::unique_ptr<providers::Embedder> embedder;
    std::unique_ptr<providers::ChatProvider> chat;
};

Providers make_providers(const RunOptions& options);

prompts::TemplateSet resolve_templates(const RunOptions& options);

// Digest over the resolved key=value view of a run's configuration; embedded
// in every report so identical inputs are provably identical runs.
std::string config_digest(const std::map<std::string, std::string>& resolved);

std::map<std::string, std::string> resolved_config(const RunOptions& options,
                                                   const std::string& subcommand);

struct RunResult {
    nlohmann::json report;
    int exit_code = kExitOk;
};

// Pretty-printed JSON, keys sorted, trailing newline: bit-exact for goldens.
std::string report_to_string(const nlohmann::json& report);
void write_report(const nlohmann::json& report, const std::string& path);

RunResult run_eval(const std::string& samples_path, const std::string& outputs_path,
                   const std::string& statutes_path, const RunOptions& options);

RunResult run_winrate(const std::string& samples_path, const std::string& answers_a_path,
                      const std::string& answers_b_path, const RunOptions& options);

struct HipoDemoOptions {
    hipo::HipoConfig config;
    int sft_steps = 20;
    double sft_learning_rate = 0.5;
    std::string out_dir = "hipo_out";
    std::string pairs_path;  // optional external corpus; built-in when empty
};

// The built-in synthetic corpus (vocab 10, EOS 0, token 9 plays the role of
// a fabricated citation).
std::vector<std::pair<hipo::Tokens, hipo::Tokens>> builtin_hipo_corpus();
int builtin_hipo_vocab();

// Hallucination stand-in for the toy loop: any generated occurrence of the
// forbidden token counts as a hallucinated statute.
hipo::HallucinationCheck forbidden_token_check(int token);

RunResult run_hipo_demo(const HipoDemoOptions& demo, const RunOptions& options);

RunResult run_prep_revise(const std::string& input_path, const std::string& statutes_path,
                          const std::string& output_path, const RunOptions& options);

RunResult run_prep_genqa(const std::string& statutes_path, int per_statute,
                         const std::string& output_path, const RunOptions& options);

RunResult run_prep_pairs(const std::string& records_path, const std::string& answers_path,
                         const std::string& output_path, int vocab_size,
                         const RunOptions& options);

}  // namespace lexihal::runner
